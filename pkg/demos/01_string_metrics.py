"""
Comparing string kernels on lay medical spellings
==================================================

Four similarity notions drive the non-neural linkers: plain Levenshtein
distance, its length-normalised ratio, Jaro-Winkler, and the Stoilos
measure built from iterated longest-common-substring extraction. The
spelling perturbations people actually produce (typos, British/American
variants, dropped spaces) land very differently under each.
"""

from medlink.strings import (
    jaro_winkler,
    levenshtein,
    levenshtein_ratio,
    stoilos_distance,
)

PAIRS = [
    ("anemia", "anaemia"),        # British/American variant: one insertion
    ("anemia", "angina"),         # different conditions with similar shape
    ("chronic pain", "chronicpain"),  # dropped space
    ("martha", "marhta"),         # the classic transposition example
    ("fatigued", "fatigue"),
    ("heart attack", "hart atack"),
    ("migraine", "migrane"),
]

print(f"{'x':<14}{'y':<14}{'lev':>4}{'ratio':>8}{'jw':>8}{'stoilos':>9}")
for x, y in PAIRS:
    print(
        f"{x:<14}{y:<14}"
        f"{levenshtein(x, y):>4}"
        f"{levenshtein_ratio(x, y):>8.3f}"
        f"{jaro_winkler(x, y):>8.3f}"
        f"{stoilos_distance(x, y):>9.3f}"
    )

# Both distance columns read "smaller is closer". The normalised ratio
# folds string length out, so the one-edit "anaemia" variant scores far
# closer than the three-edit "angina" even though both are short. Stoilos
# rewards the long shared block in "chronicpain", which the ratio treats
# as just one more edit, and Jaro-Winkler forgives the transposition in
# "marhta" almost entirely. This is why the fuzzy linkers expose the
# metric as a knob: each one has spellings it is blind to.
