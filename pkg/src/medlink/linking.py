"""Ranked candidate retrieval and deterministic back-off cascades.

A cascade evaluates matcher components in order and answers with the
first non-miss. String components contribute rank-1 singleton rankings;
a neural component always answers with its full top-k, so nothing may
legally follow it.
"""

import logging

import numpy as np

from .align import forward
from .errors import ConfigError, FormatError, NotFoundError, ValidationError
from .matchers import dictionary_lookup, exact_match, fuzzy_match
from .text import fmt_float
from .vectors import concept_label_embedding

log = logging.getLogger(__name__)

RECIPE_KINDS = ("label", "node2vec")
CASCADE_KINDS = ("dict", "exact", "lev", "stoilos", "neural")


class Ranking:
    """Scored candidates for one query, non-increasing, unique sctids."""

    def __init__(self, mention_id, candidates):
        candidates = tuple((str(s), float(v)) for s, v in candidates)
        seen = set()
        for i, (sctid, score) in enumerate(candidates):
            if not np.isfinite(score):
                raise ValidationError(f"non-finite score for candidate {sctid!r}")
            if sctid in seen:
                raise ValidationError(f"duplicate candidate sctid {sctid!r}")
            seen.add(sctid)
            if i and candidates[i - 1][1] < score:
                raise ValidationError("candidate scores must be non-increasing")
        self.mention_id = mention_id
        self.candidates = candidates

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def sctids(self):
        return [sctid for sctid, _ in self.candidates]


class ConceptTargetIndex:
    """Per-concept target matrix in ascending-sctid order.

    Unit-normalized rows are cached next to the originals; zero targets
    stay zero so the cosine convention carries through.
    """

    def __init__(self, sctids, targets):
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim != 2 or targets.shape[0] != len(sctids):
            raise ValidationError("targets must be one row per concept")
        self.sctids = tuple(str(s) for s in sctids)
        self.targets = targets
        norms = np.linalg.norm(targets, axis=1, keepdims=True)
        self.unit_targets = np.divide(
            targets, norms, out=np.zeros_like(targets), where=norms > 0
        )
        self._order_key = np.array([int(s) for s in self.sctids])

    def __len__(self):
        return len(self.sctids)

    @property
    def dim(self):
        return self.targets.shape[1]


def build_target_index(graph, components):
    """Concatenate per-concept recipe components into a target index.

    Each component is a (kind, store) pair with kind in RECIPE_KINDS.
    Label components mean the concept's label embeddings; node2vec
    components look the sctid up directly, zero-filling misses with a
    warning. Concepts come out in ascending numeric sctid order.
    """
    components = list(components)
    if not components:
        raise ConfigError("target index needs at least one recipe component")
    for kind, store in components:
        if kind not in RECIPE_KINDS:
            raise ConfigError(f"unknown recipe kind {kind!r}; expected one of {RECIPE_KINDS}")
        if store.dim < 1:
            raise ValidationError(f"recipe component {kind!r} has no dimension")
    sctids = graph.sctids()
    rows = []
    for sctid in sctids:
        parts = []
        for kind, store in components:
            if kind == "label":
                vec, oov = concept_label_embedding(store, graph, sctid)
                if oov:
                    log.warning("concept %s has no in-vocabulary label; zero-filled", sctid)
            else:
                vec = store.get(sctid)
                if vec is None:
                    log.warning("concept %s has no node vector; zero-filled", sctid)
                    vec = np.zeros(store.dim, dtype=np.float64)
            if vec.shape != (store.dim,):
                raise ValidationError(
                    f"component {kind!r} produced dim {vec.shape} for {sctid}, "
                    f"expected ({store.dim},)"
                )
            parts.append(vec)
        rows.append(np.concatenate(parts))
    dim = sum(store.dim for _, store in components)
    targets = np.array(rows, dtype=np.float64).reshape(len(sctids), dim)
    return ConceptTargetIndex(sctids, targets)


def rank(model, index, inputs, k=10, mention_id=""):
    """Top-k concepts by cosine between the model prediction and targets.

    Exhaustive scan over the index is the reference semantics; score
    ties break by ascending sctid. A zero prediction scores every
    concept 0 and degenerates to the ascending-sctid prefix.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    batch = [np.asarray(x, dtype=np.float64)[None, ...] for x in inputs]
    pred = forward(model, batch)[0][0]
    norm = float(np.linalg.norm(pred))
    if norm == 0.0:
        scores = np.zeros(len(index))
    else:
        scores = index.unit_targets @ (pred / norm)
    order = np.lexsort((index._order_key, -scores))[:k]
    return Ranking(mention_id, [(index.sctids[j], float(scores[j])) for j in order])


class DictionaryComponent:
    """Most-frequent-concept lookup; misses on unseen terms."""

    is_neural = False

    def __init__(self, dictionary, name="dict"):
        self.dictionary = dictionary
        self.name = name

    def link(self, mention):
        hit = dictionary_lookup(self.dictionary, mention.term)
        if not hit.is_hit:
            return None
        return Ranking(mention.id, [(hit.sctid, hit.score)])


class ExactComponent:
    """Folded-label equality against the knowledge graph."""

    is_neural = False

    def __init__(self, graph, name="exact"):
        self.graph = graph
        self.name = name

    def link(self, mention):
        hit = exact_match(self.graph, mention.term)
        if not hit.is_hit:
            return None
        return Ranking(mention.id, [(hit.sctid, hit.score)])


class FuzzyComponent:
    """Global string-distance scan thresholded at tau."""

    is_neural = False

    def __init__(self, graph, metric, tau, name=None):
        self.graph = graph
        self.metric = metric
        self.tau = tau
        self.name = name if name is not None else f"{metric}:{tau:g}"

    def link(self, mention):
        hit = fuzzy_match(self.graph, mention.term, self.metric, self.tau)
        if not hit.is_hit:
            return None
        return Ranking(mention.id, [(hit.sctid, hit.score)])


class NeuralComponent:
    """Trained alignment model over a target index; never misses."""

    is_neural = True

    def __init__(self, model, index, features, k=10, name="neural"):
        if len(index) < 1:
            raise ValidationError("neural component needs a non-empty target index")
        self.model = model
        self.index = index
        self.features = features
        self.k = k
        self.name = name

    def link(self, mention):
        inputs = self.features.get(mention.id)
        if inputs is None:
            raise NotFoundError(f"no input features for mention {mention.id!r}")
        return rank(self.model, self.index, inputs, k=self.k, mention_id=mention.id)


class Cascade:
    """First-non-miss composition with per-mention provenance."""

    def __init__(self, components):
        self.components = tuple(components)

    def link(self, mention):
        for component in self.components:
            ranking = component.link(mention)
            if ranking is not None:
                return ranking, component.name
        return None, "miss"


def build_cascade(components):
    """Validate component order; anything after a neural stage is dead code."""
    components = list(components)
    if not components:
        raise ValidationError("cascade needs at least one component")
    for i, component in enumerate(components[:-1]):
        if component.is_neural:
            raise ValidationError(
                f"component {components[i + 1].name!r} follows neural component "
                f"{component.name!r} and can never fire"
            )
    return Cascade(components)


def parse_cascade_spec(text):
    """Parse 'dict+stoilos:0.07+neural:n6' into (kind, tau, label) triples."""
    if not text or not text.strip():
        raise ValidationError("empty cascade spec")
    specs = []
    for token in text.strip().split("+"):
        token = token.strip()
        kind, _, arg = token.partition(":")
        if kind not in CASCADE_KINDS:
            raise ValidationError(
                f"unknown cascade component {token!r}; expected one of {CASCADE_KINDS}"
            )
        if kind in ("lev", "stoilos"):
            try:
                tau = float(arg)
            except ValueError:
                raise ValidationError(f"component {token!r} needs a numeric threshold")
            if not 0.0 <= tau <= 1.0:
                raise ValidationError(f"threshold out of [0, 1] in {token!r}")
            specs.append((kind, tau, None))
        elif kind == "neural":
            specs.append((kind, None, arg or None))
        else:
            if arg:
                raise ValidationError(f"component {kind!r} takes no argument, got {token!r}")
            specs.append((kind, None, None))
    return tuple(specs)


def link_all(cascade, mentions):
    """Run a cascade over mentions, yielding (mention_id, ranking, provenance)."""
    for mention in mentions:
        ranking, provenance = cascade.link(mention)
        yield mention.id, ranking, provenance


def write_predictions(path, results):
    """Serialize rankings as mention_id, 1-based rank, sctid, score, provenance."""
    with open(path, "w", encoding="utf-8") as fh:
        for mention_id, ranking, provenance in results:
            if ranking is None:
                continue
            for r, (sctid, score) in enumerate(ranking, start=1):
                fh.write(f"{mention_id}\t{r}\t{sctid}\t{fmt_float(score)}\t{provenance}\n")


def load_predictions(path):
    """Read a predictions file into mention id -> [(sctid, score, provenance)].

    Candidate order follows the written rank column, which must count up
    from 1 without gaps per mention.
    """
    ranked = {}
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 5:
                raise FormatError(
                    f"expected 5 tab-separated fields, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            mention_id, rank_text, sctid, score_text, provenance = parts
            try:
                r = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise FormatError(
                    f"bad rank or score in {raw.rstrip()!r}", path=path, line=lineno
                )
            if not np.isfinite(score):
                raise FormatError(f"non-finite score {score_text!r}", path=path, line=lineno)
            rows = ranked.setdefault(mention_id, [])
            if r != len(rows) + 1:
                raise FormatError(
                    f"rank {r} out of sequence for mention {mention_id!r}",
                    path=path,
                    line=lineno,
                )
            keys = seen.setdefault(mention_id, set())
            if sctid in keys:
                raise FormatError(
                    f"duplicate sctid {sctid!r} for mention {mention_id!r}",
                    path=path,
                    line=lineno,
                )
            keys.add(sctid)
            rows.append((sctid, score, provenance))
    return ranked
