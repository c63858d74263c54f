"""Embedding stores: word vectors, per-layer contextual stacks, concatenation.

Text formats are canonical: floats are rendered with repr so that any
load/save cycle is byte-stable, and writers emit keys in sorted order.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from medlink.errors import ConfigError, FormatError, ValidationError
from medlink.text import fmt_float, tokenize

log = logging.getLogger(__name__)


class WordVectorStore:
    """Immutable token → vector map with a single declared dimension."""

    def __init__(self, dim, vectors=None):
        if dim < 1:
            raise ConfigError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self.vectors = dict(vectors or {})

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, token):
        return token in self.vectors

    def get(self, token):
        return self.vectors.get(token)


@dataclass(frozen=True)
class LayerStack:
    """L x d matrix of per-layer contextual embeddings for one key."""

    key: str
    layers: np.ndarray

    @property
    def num_layers(self):
        return self.layers.shape[0]

    @property
    def dim(self):
        return self.layers.shape[1]


def _parse_floats(parts, path, lineno):
    values = []
    for part in parts:
        try:
            value = float(part)
        except ValueError:
            raise FormatError(f"bad float {part!r}", path=path, line=lineno)
        if not math.isfinite(value):
            raise FormatError(f"non-finite value {part!r}", path=path, line=lineno)
        values.append(value)
    return values


def load_word_vectors(path):
    """Read the text vector format: header `N d`, then `token v1 .. vd` rows."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(" ")
        if len(header) != 2:
            raise FormatError("header must be 'N d'", path=path, line=1)
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError("header must be 'N d'", path=path, line=1)
        if count < 0 or dim < 1:
            raise FormatError(f"bad header counts N={count} d={dim}", path=path, line=1)
        vectors = {}
        rows = 0
        for lineno, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise FormatError(
                    f"expected token plus {dim} floats, got {len(parts) - 1}",
                    path=path,
                    line=lineno,
                )
            token = parts[0]
            if not token:
                raise FormatError("empty token", path=path, line=lineno)
            if token in vectors:
                log.warning("%s: duplicate token %r (line %d); keeping last", path, token, lineno)
            vectors[token] = np.array(_parse_floats(parts[1:], path, lineno), dtype=np.float64)
            rows += 1
        if rows != count:
            raise FormatError(f"header declared {count} rows, found {rows}", path=path)
    return WordVectorStore(dim=dim, vectors=vectors)


def save_word_vectors(store, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(store.vectors)} {store.dim}\n")
        for token in sorted(store.vectors):
            rendered = " ".join(fmt_float(v) for v in store.vectors[token])
            fh.write(f"{token} {rendered}\n")


def load_layer_stacks(path):
    """Read layer stacks: header `N L d`, then per record a key line + L rows."""
    stacks = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(" ")
        if len(header) != 3:
            raise FormatError("header must be 'N L d'", path=path, line=1)
        try:
            count, num_layers, dim = (int(h) for h in header)
        except ValueError:
            raise FormatError("header must be 'N L d'", path=path, line=1)
        if count < 0 or num_layers < 1 or dim < 1:
            raise FormatError(
                f"bad header counts N={count} L={num_layers} d={dim}", path=path, line=1
            )
        lineno = 1
        for _ in range(count):
            key = fh.readline()
            lineno += 1
            if key == "":
                raise FormatError(f"expected {count} records, file ended early", path=path)
            key = key.rstrip("\n")
            if not key:
                raise FormatError("empty record key", path=path, line=lineno)
            if key in stacks:
                raise ValidationError(f"{path}: duplicate key {key!r} (line {lineno})")
            rows = []
            for _ in range(num_layers):
                raw = fh.readline()
                lineno += 1
                if raw == "":
                    raise FormatError("record truncated", path=path, line=lineno)
                parts = raw.rstrip("\n").split(" ")
                if len(parts) != dim:
                    raise FormatError(
                        f"expected {dim} floats, got {len(parts)}", path=path, line=lineno
                    )
                rows.append(_parse_floats(parts, path, lineno))
            stacks[key] = LayerStack(key=key, layers=np.array(rows, dtype=np.float64))
        if fh.readline() != "":
            raise FormatError("trailing content after declared records", path=path)
    return stacks


def save_layer_stacks(stacks, path):
    items = sorted(stacks.items())
    if items:
        num_layers, dim = items[0][1].layers.shape
    else:
        num_layers, dim = 1, 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(items)} {num_layers} {dim}\n")
        for key, stack in items:
            if stack.layers.shape != (num_layers, dim):
                raise ValidationError(
                    f"stack {key!r} has shape {stack.layers.shape}, expected {(num_layers, dim)}"
                )
            fh.write(key + "\n")
            for row in stack.layers:
                fh.write(" ".join(fmt_float(v) for v in row) + "\n")


def term_embedding(store, term):
    """Mean of in-vocabulary token vectors; (zero vector, True) if all OOV.

    Tokens are summed in sorted order so the result is exactly invariant
    under token reordering.
    """
    tokens = sorted(tokenize(term))
    vecs = [store.vectors[t] for t in tokens if t in store.vectors]
    if not vecs:
        return np.zeros(store.dim, dtype=np.float64), True
    return np.add.reduce(vecs) / len(vecs), False


def concept_label_embedding(store, graph, sctid):
    """Mean over the concept's per-label embeddings, skipping all-OOV labels."""
    labels = graph.labels_of(sctid)
    parts = []
    for label in labels:
        vec, oov = term_embedding(store, label)
        if not oov:
            parts.append(vec)
    if not parts:
        return np.zeros(store.dim, dtype=np.float64), True
    return np.add.reduce(parts) / len(parts), False


def concat(vectors):
    """Concatenate vectors in order; dimension is the sum of the parts."""
    if not len(vectors):
        raise ConfigError("concat requires at least one vector")
    return np.concatenate([np.asarray(v, dtype=np.float64) for v in vectors])


def cosine(u, v):
    """Cosine similarity with the zero-vector convention: undefined pairs score 0."""
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))
