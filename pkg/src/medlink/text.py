"""Text normalization shared by the label index, matchers, and embedders.

The matching pipeline lower-cases terms and labels and does nothing else:
no punctuation stripping, no stemming. Keeping the rule in one place makes
sure every component folds identically.
"""

from __future__ import annotations


def fold(s: str) -> str:
    """Unicode-aware lower-casing; the only normalization applied anywhere."""
    return s.lower()


def tokenize(s: str) -> list[str]:
    """Fold, then split on whitespace."""
    return fold(s).split()


def fmt_float(x: float) -> str:
    """Canonical decimal rendering: shortest string that round-trips exactly."""
    return repr(float(x))
