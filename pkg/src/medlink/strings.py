"""Surface-distance kernels used by the fuzzy matchers.

Provides the Levenshtein distance and its normalised ratio, Jaro-Winkler
similarity, and the Stoilos similarity built from an iterative
max-common-substring commonality term and a Hamacher-product difference
term. All comparisons are over Unicode scalar values; callers are expected
to case-fold beforehand (see :mod:`medlink.text`).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class StoilosParams:
    """Knobs of the Stoilos similarity and its Jaro-Winkler term.

    ``hamacher_p`` weights the t-norm in the difference term;
    ``min_substring_len`` is the cutoff below which common substrings stop
    counting toward commonality.
    """

    hamacher_p: float = 0.6
    min_substring_len: int = 3
    winkler_prefix_scale: float = 0.1
    winkler_max_prefix: int = 4

    def __post_init__(self):
        if not 0.0 < self.hamacher_p <= 1.0:
            raise ValueError(f"hamacher_p must be in (0, 1], got {self.hamacher_p}")
        if self.min_substring_len < 1:
            raise ValueError(f"min_substring_len must be >= 1, got {self.min_substring_len}")
        if not 0.0 <= self.winkler_prefix_scale <= 0.25:
            raise ValueError(
                f"winkler_prefix_scale must be in [0, 0.25], got {self.winkler_prefix_scale}"
            )


DEFAULT_STOILOS = StoilosParams()


def levenshtein(x: str, y: str) -> int:
    """Minimum number of single-character edits turning ``x`` into ``y``."""
    if x == y:
        return 0
    if not x:
        return len(y)
    if not y:
        return len(x)
    prev = list(range(len(y) + 1))
    for i, cx in enumerate(x, 1):
        cur = [i]
        for j, cy in enumerate(y, 1):
            cost = 0 if cx == cy else 1
            cur.append(min(cur[-1] + 1, prev[j] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def levenshtein_ratio(x: str, y: str) -> float:
    """Edit distance normalised by the longer string's length, in [0, 1].

    Two empty strings are identical, so the ratio is 0 by definition.
    """
    longest = max(len(x), len(y))
    if longest == 0:
        return 0.0
    return levenshtein(x, y) / longest


def jaro_winkler(
    x: str,
    y: str,
    prefix_scale: float = DEFAULT_STOILOS.winkler_prefix_scale,
    max_prefix: int = DEFAULT_STOILOS.winkler_max_prefix,
) -> float:
    """Jaro similarity boosted by the Winkler common-prefix factor.

    Returns 1 for equal strings (two empties included, by convention) and 0
    when no characters match within the Jaro search window.
    """
    if x == y:
        return 1.0
    len_x, len_y = len(x), len(y)
    if len_x == 0 or len_y == 0:
        return 0.0

    window = max(max(len_x, len_y) // 2 - 1, 0)
    x_match = [False] * len_x
    y_match = [False] * len_y
    matches = 0
    for i, cx in enumerate(x):
        lo = max(0, i - window)
        hi = min(i + window + 1, len_y)
        for j in range(lo, hi):
            if not y_match[j] and y[j] == cx:
                x_match[i] = y_match[j] = True
                matches += 1
                break
    if matches == 0:
        return 0.0

    # Transpositions: matched characters compared in order of appearance.
    transpositions = 0
    j = 0
    for i in range(len_x):
        if not x_match[i]:
            continue
        while not y_match[j]:
            j += 1
        if x[i] != y[j]:
            transpositions += 1
        j += 1
    transpositions //= 2

    jaro = (
        matches / len_x + matches / len_y + (matches - transpositions) / matches
    ) / 3.0

    prefix = 0
    for cx, cy in zip(x, y):
        if cx != cy or prefix >= max_prefix:
            break
        prefix += 1
    return jaro + prefix * prefix_scale * (1.0 - jaro)


def _longest_common_substring(x: str, y: str) -> tuple[int, int, int]:
    """Return (length, start_x, start_y) of the longest common substring.

    Ties go to the smallest start index in ``x``, then in ``y``, so the
    iterative extraction below is deterministic.
    """
    best = (0, 0, 0)
    prev = [0] * (len(y) + 1)
    for i in range(1, len(x) + 1):
        cur = [0] * (len(y) + 1)
        for j in range(1, len(y) + 1):
            if x[i - 1] == y[j - 1]:
                length = prev[j - 1] + 1
                cur[j] = length
                sx, sy = i - length, j - length
                if length > best[0] or (
                    length == best[0] and (sx, sy) < (best[1], best[2])
                ):
                    best = (length, sx, sy)
        prev = cur
    return best


def stoilos_commonality(
    x: str, y: str, params: StoilosParams = DEFAULT_STOILOS
) -> tuple[float, str, str]:
    """Iterative max-common-substring commonality.

    Repeatedly extracts the longest common substring of the residual
    strings until its length drops below ``params.min_substring_len``.
    Returns ``(comm, residual_x, residual_y)`` where
    ``comm = 2 * matched_total / (|x| + |y|)`` over the original lengths,
    which keeps comm in [0, 1]. Two empty strings are trivially fully
    matched (comm = 1).
    """
    total_len = len(x) + len(y)
    if total_len == 0:
        return 1.0, "", ""
    rx, ry = x, y
    matched = 0
    while rx and ry:
        length, sx, sy = _longest_common_substring(rx, ry)
        if length < params.min_substring_len:
            break
        matched += length
        rx = rx[:sx] + rx[sx + length:]
        ry = ry[:sy] + ry[sy + length:]
    return 2.0 * matched / total_len, rx, ry


def stoilos_difference(
    unmatched_x: str,
    unmatched_y: str,
    orig_x: str,
    orig_y: str,
    params: StoilosParams = DEFAULT_STOILOS,
) -> float:
    """Hamacher-product difference over normalised residual lengths.

    Residual lengths are divided by the original string lengths (an empty
    original contributes 0), giving values in [0, 1]; the result is
    ``ux*uy / (p + (1-p) * (ux + uy - ux*uy))``.
    """
    ux = len(unmatched_x) / len(orig_x) if orig_x else 0.0
    uy = len(unmatched_y) / len(orig_y) if orig_y else 0.0
    p = params.hamacher_p
    prod = ux * uy
    return prod / (p + (1.0 - p) * (ux + uy - prod))


def stoilos_similarity(x: str, y: str, params: StoilosParams = DEFAULT_STOILOS) -> float:
    """Commonality minus difference plus Jaro-Winkler; range [-1, 2].

    Identical strings score exactly 2.0 even when shorter than the
    substring cutoff, where the iterative extraction would find nothing.
    """
    if x == y:
        return 2.0
    comm, rx, ry = stoilos_commonality(x, y, params)
    diff = stoilos_difference(rx, ry, x, y, params)
    jw = jaro_winkler(x, y, params.winkler_prefix_scale, params.winkler_max_prefix)
    return comm - diff + jw


def stoilos_distance(x: str, y: str, params: StoilosParams = DEFAULT_STOILOS) -> float:
    """Linear rescaling of the similarity range [-1, 2] onto [1, 0]."""
    return (2.0 - stoilos_similarity(x, y, params)) / 3.0
