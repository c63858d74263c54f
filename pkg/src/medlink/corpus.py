"""Mention corpus loading and train/dev/test split generation.

Two split kinds are supported. Stratified guarantees every gold concept
seen in dev or test also occurs in train; zero-shot guarantees the
opposite (dev/test concepts never occur in train). Both are driven by a
seeded RNG and are exact functions of (mentions, level, kind, ratios,
seed).
"""

import hashlib
import random
from dataclasses import dataclass

from medlink.errors import ConfigError, FormatError, InfeasibleSplitError, ValidationError
from medlink.text import fold

GENERAL = "general"
SPECIFIC = "specific"
LEVELS = (GENERAL, SPECIFIC)

STRATIFIED = "stratified"
ZERO_SHOT = "zero-shot"
KINDS = (STRATIFIED, ZERO_SHOT)

DEFAULT_RATIOS = (0.675, 0.11, 0.215)

CORPUS_HEADER = ("ID", "Term", "General SCTID", "Specific SCTID", "Example", "Subreddit")


@dataclass(frozen=True)
class Mention:
    """One annotated corpus row."""

    id: int
    term: str
    general_sctid: str
    specific_sctid: str
    example: str
    subreddit: str

    def gold(self, level):
        check_level(level)
        return self.general_sctid if level == GENERAL else self.specific_sctid

    @property
    def term_in_example(self):
        """Whether the context sentence contains the surface term.

        Real data occasionally paraphrases, so this is informational
        rather than an invariant.
        """
        return fold(self.term) in fold(self.example)


@dataclass
class CorpusSplit:
    level: str
    kind: str
    seed: int
    ratios: tuple[float, float, float]
    train: list[Mention]
    dev: list[Mention]
    test: list[Mention]
    input_checksum: str

    def partitions(self):
        return {"train": self.train, "dev": self.dev, "test": self.test}


def check_level(level):
    if level not in LEVELS:
        raise ConfigError(f"unknown annotation level {level!r}; expected one of {LEVELS}")
    return level


def check_kind(kind):
    if kind not in KINDS:
        raise ConfigError(f"unknown split kind {kind!r}; expected one of {KINDS}")
    return kind


def _check_ratios(ratios):
    if len(ratios) != 3:
        raise ConfigError("ratios must be (train, dev, test)")
    if any(r < 0 for r in ratios) or ratios[0] <= 0:
        raise ConfigError(f"ratios must be positive with nonzero train share, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {ratios}")
    return tuple(float(r) for r in ratios)


def _mention_row(m):
    return f"{m.id}\t{m.term}\t{m.general_sctid}\t{m.specific_sctid}\t{m.example}\t{m.subreddit}"


def corpus_checksum(mentions):
    """SHA-256 over the canonical (id-sorted) serialization of the corpus."""
    digest = hashlib.sha256()
    digest.update(("\t".join(CORPUS_HEADER) + "\n").encode("utf-8"))
    for m in sorted(mentions, key=lambda m: m.id):
        digest.update((_mention_row(m) + "\n").encode("utf-8"))
    return digest.hexdigest()


def load_corpus(path, graph=None):
    """Read a mention corpus TSV (one header row, six columns).

    When `graph` is given, every gold sctid must resolve to a concept.
    """
    mentions = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != list(CORPUS_HEADER):
            raise FormatError(
                f"bad header {header!r}; expected {chr(9).join(CORPUS_HEADER)!r}",
                path=path,
                line=1,
            )
        for lineno, raw in enumerate(fh, start=2):
            parts = raw.rstrip("\n").split("\t")
            if len(parts) != 6:
                raise FormatError(
                    f"expected 6 tab-separated fields, got {len(parts)}",
                    path=path,
                    line=lineno,
                )
            raw_id, term, general, specific, example, subreddit = parts
            try:
                mention_id = int(raw_id)
            except ValueError:
                raise FormatError(f"non-integer id {raw_id!r}", path=path, line=lineno)
            if mention_id in seen_ids:
                raise ValidationError(f"{path}: duplicate mention id {mention_id} (line {lineno})")
            seen_ids.add(mention_id)
            if not term or not example:
                raise ValidationError(
                    f"{path}: empty term or example for id {mention_id} (line {lineno})"
                )
            for sctid in (general, specific):
                if not sctid.isascii() or not sctid.isdigit():
                    raise FormatError(f"invalid sctid {sctid!r}", path=path, line=lineno)
                if graph is not None and sctid not in graph:
                    raise ValidationError(
                        f"{path}: sctid {sctid!r} not in graph (line {lineno})"
                    )
            mentions.append(
                Mention(
                    id=mention_id,
                    term=term,
                    general_sctid=general,
                    specific_sctid=specific,
                    example=example,
                    subreddit=subreddit,
                )
            )
    return mentions


def write_corpus(path, mentions):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(CORPUS_HEADER) + "\n")
        for m in mentions:
            fh.write(_mention_row(m) + "\n")


def _grouped_by_gold(mentions, level):
    groups = {}
    for m in sorted(mentions, key=lambda m: m.id):
        groups.setdefault(m.gold(level), []).append(m)
    # Canonical group order before shuffling: ascending numeric sctid.
    return [(sctid, groups[sctid]) for sctid in sorted(groups, key=int)]


def _greedy_target(counts, targets):
    """Index of the partition with the largest remaining deficit.

    Ties resolve to the earliest partition (train, then dev, then test).
    """
    deficits = [t - c for t, c in zip(targets, counts)]
    best = 0
    for i in (1, 2):
        if deficits[i] > deficits[best]:
            best = i
    return best


def make_split(mentions, level, kind, ratios=DEFAULT_RATIOS, seed=0):
    check_level(level)
    check_kind(kind)
    ratios = _check_ratios(ratios)
    rng = random.Random(seed)

    groups = _grouped_by_gold(mentions, level)
    rng.shuffle(groups)
    for _, members in groups:
        rng.shuffle(members)

    total = len(mentions)
    targets = [r * total for r in ratios]
    parts = ([], [], [])
    counts = [0, 0, 0]

    if kind == STRATIFIED:
        spare = total - len(groups)
        if spare == 0 and (ratios[1] > 0 or ratios[2] > 0):
            raise InfeasibleSplitError(
                "stratified split infeasible: every concept has a single mention, "
                "so nothing remains for dev/test after covering train"
            )
        leftovers = []
        for _, members in groups:
            parts[0].append(members[0])
            counts[0] += 1
            leftovers.extend(members[1:])
        for m in leftovers:
            idx = _greedy_target(counts, targets)
            parts[idx].append(m)
            counts[idx] += 1
    else:
        for _, members in groups:
            idx = _greedy_target(counts, targets)
            parts[idx].extend(members)
            counts[idx] += len(members)

    train, dev, test = (sorted(p, key=lambda m: m.id) for p in parts)
    return CorpusSplit(
        level=level,
        kind=kind,
        seed=seed,
        ratios=ratios,
        train=train,
        dev=dev,
        test=test,
        input_checksum=corpus_checksum(mentions),
    )


def split_stats(split):
    """Sizes, unique-concept counts, concept coverage, and surface overlap."""
    level = split.level
    concept_sets = {
        name: {m.gold(level) for m in part} for name, part in split.partitions().items()
    }

    def coverage(part_name):
        concepts = concept_sets[part_name]
        if not concepts:
            return None
        return len(concepts & concept_sets["train"]) / len(concepts)

    train_terms = {fold(m.term) for m in split.train}
    test_terms = {fold(m.term) for m in split.test}
    surface = len(test_terms & train_terms) / len(test_terms) if test_terms else None

    stats = {
        "train_size": len(split.train),
        "dev_size": len(split.dev),
        "test_size": len(split.test),
        "train_concepts": len(concept_sets["train"]),
        "dev_concepts": len(concept_sets["dev"]),
        "test_concepts": len(concept_sets["test"]),
        "dev_concept_coverage": coverage("dev"),
        "test_concept_coverage": coverage("test"),
        "test_surface_overlap": surface,
    }
    return stats


def write_split(split, outdir):
    """Write train/dev/test TSVs plus the split.meta manifest."""
    for name, part in split.partitions().items():
        write_corpus(outdir / f"{name}.tsv", part)
    meta_lines = [
        f"kind={split.kind}",
        f"level={split.level}",
        f"seed={split.seed}",
        "ratios=" + ",".join(repr(r) for r in split.ratios),
        f"input_checksum={split.input_checksum}",
        f"train_size={len(split.train)}",
        f"dev_size={len(split.dev)}",
        f"test_size={len(split.test)}",
    ]
    (outdir / "split.meta").write_text("".join(f"{l}\n" for l in meta_lines), encoding="utf-8")
