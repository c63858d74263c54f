"""Surface-form linkers: training dictionary, exact label match, fuzzy match.

All matching happens over case-folded strings. Ties anywhere resolve to
the ascending numeric sctid, then label stored order, so results are
reproducible regardless of scan parallelism.
"""

import logging
from dataclasses import dataclass

from medlink.errors import ConfigError, FormatError, ValidationError
from medlink.strings import levenshtein_ratio, stoilos_distance
from medlink.text import fold

log = logging.getLogger(__name__)

METRICS = {
    "lev": levenshtein_ratio,
    "stoilos": stoilos_distance,
}

# Tuning grids for the two fuzzy metrics.
DEFAULT_LEV_GRID = tuple(round(0.10 + 0.01 * i, 2) for i in range(11))
DEFAULT_STOILOS_GRID = tuple(round(0.05 + 0.005 * i, 3) for i in range(11))
DEFAULT_GRIDS = {"lev": DEFAULT_LEV_GRID, "stoilos": DEFAULT_STOILOS_GRID}


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one matcher call; a miss carries neither sctid nor score."""

    sctid: str | None
    score: float | None
    method: str

    @property
    def is_hit(self):
        return self.sctid is not None


def miss(method):
    return MatchResult(sctid=None, score=None, method=method)


class Dictionary:
    """Case-folded term → most frequent training concept (with support)."""

    def __init__(self, entries=None):
        self.map = dict(entries or {})

    def __len__(self):
        return len(self.map)

    def __contains__(self, term):
        return fold(term) in self.map


def build_dictionary(train, level):
    """Most-frequent-concept lookup table from a training partition.

    Frequency ties break to the ascending numeric sctid. Terms that fold
    to nothing are skipped with a warning.
    """
    counts = {}
    for m in train:
        term = fold(m.term)
        if not term.strip():
            log.warning("skipping mention %d: term folds to empty", m.id)
            continue
        per_term = counts.setdefault(term, {})
        gold = m.gold(level)
        per_term[gold] = per_term.get(gold, 0) + 1
    entries = {}
    for term, per_term in counts.items():
        sctid, support = min(per_term.items(), key=lambda kv: (-kv[1], int(kv[0])))
        entries[term] = (sctid, support)
    return Dictionary(entries)


def dictionary_lookup(d, term):
    entry = d.map.get(fold(term))
    if entry is None:
        return miss("dict")
    return MatchResult(sctid=entry[0], score=0.0, method="dict")


def save_dictionary(d, path):
    with open(path, "w", encoding="utf-8") as fh:
        for term in sorted(d.map):
            sctid, support = d.map[term]
            fh.write(f"{term}\t{sctid}\t{support}\n")


def load_dictionary(path):
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError(
                    f"expected 3 tab-separated fields, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            term, sctid, support = parts
            if term in entries:
                raise ValidationError(f"{path}: duplicate term {term!r} (line {lineno})")
            entries[term] = (sctid, int(support))
    return Dictionary(entries)


def exact_match(graph, term):
    owners = graph.concepts_with_label(term)
    if not owners:
        return miss("exact")
    return MatchResult(sctid=owners[0], score=0.0, method="exact")


def _resolve_metric(metric):
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {sorted(METRICS)}")
    return METRICS[metric]


def _scan_labels(graph, term, metric, prefilter=True):
    """Globally minimal (distance, sctid, label_index) over all KG labels.

    For the Levenshtein ratio, ||x|-|y||/max(|x|,|y|) lower-bounds the
    distance, so labels whose bound exceeds the running best cannot win
    or tie; skipping them is a pure optimization.
    """
    distance = _resolve_metric(metric)
    folded = fold(term)
    use_prefilter = prefilter and metric == "lev" and folded
    best = None
    for sctid, concept in graph.concepts.items():
        for idx, label in enumerate(concept.labels):
            flabel = fold(label)
            if use_prefilter and best is not None:
                bound = abs(len(folded) - len(flabel)) / max(len(folded), len(flabel))
                if bound > best[0]:
                    continue
            d = distance(folded, flabel)
            key = (d, int(sctid), idx)
            if best is None or key < best:
                best = key
                if d == 0.0:
                    return best
    return best


def fuzzy_match(graph, term, metric, tau, prefilter=True):
    """Best label across the whole KG if its distance is within tau.

    Ties resolve by smaller distance, then ascending sctid, then label
    stored order; scan order makes the distance-zero early exit safe.
    """
    if not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must be in [0, 1], got {tau}")
    method = metric
    best = _scan_labels(graph, term, metric, prefilter=prefilter)
    if best is None or best[0] > tau:
        return miss(method)
    return MatchResult(sctid=str(best[1]), score=best[0], method=method)


def tune_threshold(graph, dev, level, metric, grid=None):
    """Grid value maximizing fuzzy-match Acc@1 on dev; ties take the smallest tau.

    Each mention's global best label is found once; sweeping tau then
    only gates that fixed winner, which is exactly fuzzy_match semantics.
    """
    if grid is None:
        grid = DEFAULT_GRIDS[metric] if metric in DEFAULT_GRIDS else None
    if not grid:
        raise ConfigError("threshold grid must be non-empty")
    taus = sorted(float(t) for t in grid)
    if taus[0] < 0.0 or taus[-1] > 1.0:
        raise ConfigError(f"grid values must be in [0, 1], got {grid}")

    scans = []
    for m in dev:
        best = _scan_labels(graph, m.term, metric)
        if best is not None:
            scans.append((best[0], str(best[1]) == m.gold(level)))

    best_tau, best_acc = taus[0], -1.0
    for tau in taus:
        hits = sum(1 for dist, correct in scans if dist <= tau and correct)
        acc = hits / len(dev) if dev else 0.0
        if acc > best_acc:
            best_tau, best_acc = tau, acc
    return best_tau
