"""Per-layer term embeddings from a frozen transformer.

Mention sentences go through the model once; the term's sub-token
vectors are mean-pooled within each requested encoder layer, giving one
(L, d) stack per mention. Concept labels are encoded the same way as
bare strings, one stack per (concept, label) pair. The model is never
trained or fine-tuned here.
"""

import logging
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from medlink_exporter.stacks import write_layer_stacks

log = logging.getLogger(__name__)

KINDS = ("mentions", "labels")
BATCH_SIZE = 8

CORPUS_HEADER = ("ID", "Term", "General SCTID", "Specific SCTID", "Example", "Subreddit")


@dataclass(frozen=True)
class ExportJob:
    """One export run: model, input file, span policy, layers, output."""

    model: str
    input: str
    kind: str
    out: str
    layers: tuple = None  # 1-based encoder layer indices; None means all
    max_len: int = 64

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.max_len < 8:
            raise ValueError(f"max_len must be >= 8, got {self.max_len}")
        if self.layers is not None:
            if not self.layers:
                raise ValueError("layer set must be non-empty")
            if any(i < 1 for i in self.layers):
                raise ValueError(f"layer indices are 1-based, got {self.layers}")


class Encoder:
    """Tokenizer + frozen model pair with the layer bookkeeping."""

    def __init__(self, model_path):
        self.tokenizer = AutoTokenizer.from_pretrained(model_path)
        self.model = AutoModel.from_pretrained(model_path)
        self.model.eval()
        self.num_layers = self.model.config.num_hidden_layers
        self.dim = self.model.config.hidden_size

    def resolve_layers(self, job):
        if job.layers is None:
            return tuple(range(1, self.num_layers + 1))
        layers = tuple(sorted(set(job.layers)))
        if layers[-1] > self.num_layers:
            raise ValueError(
                f"layer {layers[-1]} out of range; model has {self.num_layers} encoder layers"
            )
        return layers


def _find_span(example, term):
    """Character span of the term in the sentence, or None.

    Case-insensitive via lower(), which is length-preserving for the
    scripts this corpus uses, so offsets map back to the original text.
    """
    start = example.lower().find(term.lower())
    if start < 0:
        return None
    return start, start + len(term)


def _encode(tokenizer, text, span, max_len):
    """Token ids plus the indices of the term's sub-tokens.

    With span None every real (non-special) sub-token counts as the
    term. Over-long sequences are truncated to a window centred on the
    span, keeping the model's [CLS]/[SEP] framing; returns the ids, the
    span token indices, and whether truncation happened.
    """
    enc = tokenizer(text, return_offsets_mapping=True, add_special_tokens=True)
    ids = enc["input_ids"]
    offsets = enc["offset_mapping"]
    real = [i for i, (a, b) in enumerate(offsets) if b > a]
    if span is None:
        token_span = real
    else:
        s, e = span
        token_span = [i for i in real if offsets[i][0] < e and offsets[i][1] > s]
        if not token_span:
            token_span = real
    if not token_span:
        raise ValueError(f"text tokenized to nothing: {text!r}")

    if len(ids) <= max_len:
        return ids, token_span, False

    window = max_len - 2
    body = len(ids) - 2
    center = (token_span[0] + token_span[-1]) // 2 - 1
    start = min(max(center - window // 2, 0), body - window)
    ids = [ids[0]] + ids[1 + start:1 + start + window] + [ids[-1]]
    token_span = [i - start for i in token_span if start < i <= start + window]
    if not token_span:
        token_span = list(range(1, len(ids) - 1))
    return ids, token_span, True


def _forward(encoder, batch):
    """Hidden states for a padded batch of id lists: (L+1, B, T, d)."""
    pad = encoder.tokenizer.pad_token_id
    width = max(len(ids) for ids in batch)
    input_ids = torch.full((len(batch), width), pad, dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.long)
    for row, ids in enumerate(batch):
        input_ids[row, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        mask[row, :len(ids)] = 1
    with torch.no_grad():
        out = encoder.model(
            input_ids=input_ids, attention_mask=mask, output_hidden_states=True
        )
    return out.hidden_states


def _encode_all(encoder, texts_and_spans, layers, max_len):
    """(L, d) stack per input, batch inference in input order."""
    encoded = []
    any_truncated = 0
    for text, span in texts_and_spans:
        ids, token_span, truncated = _encode(encoder.tokenizer, text, span, max_len)
        any_truncated += truncated
        if truncated:
            log.warning(
                "sequence of %d tokens truncated to %d around the term span: %.40r",
                len(encoder.tokenizer(text)["input_ids"]), max_len, text,
            )
        encoded.append((ids, token_span))
    stacks = []
    for lo in range(0, len(encoded), BATCH_SIZE):
        batch = encoded[lo:lo + BATCH_SIZE]
        hidden = _forward(encoder, [ids for ids, _ in batch])
        for row, (_, token_span) in enumerate(batch):
            rows = [
                hidden[layer][row, token_span, :].mean(dim=0).numpy()
                for layer in layers
            ]
            stacks.append(np.stack(rows).astype(np.float64))
    if any_truncated:
        log.warning("%d of %d sequences exceeded max_len", any_truncated, len(encoded))
    return stacks


def read_mentions(path):
    """(id, term, example) rows from the corpus TSV."""
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        header = tuple(fh.readline().rstrip("\n").split("\t"))
        if header != CORPUS_HEADER:
            raise ValueError(f"{path}: expected header {CORPUS_HEADER}, got {header}")
        for lineno, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            mention_id, term, _, _, example, _ = parts
            if mention_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate mention id {mention_id!r}")
            seen.add(mention_id)
            rows.append((mention_id, term, example))
    return rows


def read_concepts(path):
    """(sctid, labels) rows from the concepts TSV."""
    rows = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            sctid, labels, _ = parts
            if sctid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate concept {sctid!r}")
            seen.add(sctid)
            split = [label for label in labels.split("|") if label.strip()]
            if not split:
                raise ValueError(f"{path}:{lineno}: concept {sctid!r} has no labels")
            rows.append((sctid, split))
    return rows


def export_mention_stacks(job):
    """One (L, d) record per mention id, plus a sidecar fallback log.

    Terms missing from their example sentence are encoded alone; each
    such mention gets a line in `<out>.log` (always written, empty when
    nothing fell back, so reruns stay byte-identical).
    """
    encoder = Encoder(job.model)
    layers = encoder.resolve_layers(job)
    mentions = read_mentions(job.input)
    jobs, fallbacks = [], []
    for mention_id, term, example in mentions:
        span = _find_span(example, term)
        if span is None:
            jobs.append((term, None))
            fallbacks.append(f"{mention_id}\tterm not in example; encoded term alone")
            log.warning("mention %s: term %r not in example; encoding term alone",
                        mention_id, term)
        else:
            jobs.append((example, span))
    stacks = _encode_all(encoder, jobs, layers, job.max_len)
    records = {mention_id: stack
               for (mention_id, _, _), stack in zip(mentions, stacks)}
    write_layer_stacks(job.out, records, num_layers=len(layers), dim=encoder.dim)
    with open(f"{job.out}.log", "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in fallbacks))
    log.info("wrote %d mention stacks (%d fallbacks) to %s",
             len(records), len(fallbacks), job.out)
    return job.out


def export_label_stacks(job):
    """One (L, d) record per (concept, label) pair, keyed label:<sctid>:<index>.

    The index is the label's 0-based position within its concept row; the
    consumer means the per-concept records back together.
    """
    encoder = Encoder(job.model)
    layers = encoder.resolve_layers(job)
    concepts = read_concepts(job.input)
    keys, jobs = [], []
    for sctid, labels in concepts:
        for index, label in enumerate(labels):
            keys.append(f"label:{sctid}:{index}")
            jobs.append((label, None))
    stacks = _encode_all(encoder, jobs, layers, job.max_len)
    records = dict(zip(keys, stacks))
    write_layer_stacks(job.out, records, num_layers=len(layers), dim=encoder.dim)
    log.info("wrote %d label stacks for %d concepts to %s",
             len(records), len(concepts), job.out)
    return job.out
