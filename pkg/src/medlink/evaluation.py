"""Scoring of prediction files: Acc@1, Acc@10, MRR, and report rendering."""

import csv
import io
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import ValidationError
from .linking import load_predictions
from .text import fmt_float

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("method", "n", "acc1", "acc10", "mrr")


@dataclass(frozen=True)
class EvalReport:
    """Aggregate retrieval metrics over one mention set."""

    n: int
    acc1: float
    acc10: float
    mrr: float

    def __post_init__(self):
        for name in ("acc1", "acc10", "mrr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} out of [0, 1]: {value}")
        if self.acc1 > self.acc10:
            raise ValidationError(f"acc1 {self.acc1} exceeds acc10 {self.acc10}")
        if self.mrr < self.acc1:
            raise ValidationError(f"mrr {self.mrr} below acc1 {self.acc1}")


def score(predictions, gold, level):
    """Score a predictions file (or preloaded mapping) against gold mentions.

    A hit is the first candidate whose sctid equals the mention's gold
    concept at the chosen level; ranks past the list end are misses.
    Reciprocal rank counts only within the top 10, mirroring Acc@10 as
    the deepest reported cut, so the fixture ranks (1, 2, 11, miss)
    score mrr (1 + 1/2 + 0 + 0) / 4. Mentions absent from the file
    count as misses with a warning.
    """
    if isinstance(predictions, Mapping):
        ranked = predictions
    else:
        ranked = load_predictions(predictions)
    gold = list(gold)
    if not gold:
        raise ValidationError("cannot score an empty mention set")
    n = len(gold)
    acc1 = acc10 = mrr = 0.0
    for m in gold:
        rows = ranked.get(str(m.id))
        if rows is None:
            log.warning("mention %s has no predictions; scored as a miss", m.id)
            continue
        gold_id = m.gold(level)
        r = 0
        for pos, row in enumerate(rows, start=1):
            if row[0] == gold_id:
                r = pos
                break
        if r:
            if r <= 1:
                acc1 += 1.0
            if r <= 10:
                acc10 += 1.0
                mrr += 1.0 / r
    return EvalReport(n=n, acc1=acc1 / n, acc10=acc10 / n, mrr=mrr / n)


def round2(x):
    """Two-decimal string, half-up like the reference tables (0.515 -> 0.52)."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def report_table(reports, format="text"):
    """Render method -> EvalReport rows in insertion order.

    Values print at two decimals half-up; the machine report keeps full
    precision.
    """
    if format not in ("text", "csv"):
        raise ValidationError(f"unknown table format {format!r}")
    rows = [
        (method, str(r.n), round2(r.acc1), round2(r.acc10), round2(r.mrr))
        for method, r in reports.items()
    ]
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    widths = [len(c) for c in TABLE_COLUMNS]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    def render(cells):
        method, rest = cells[0].ljust(widths[0]), cells[1:]
        return "  ".join([method] + [c.rjust(w) for c, w in zip(rest, widths[1:])])
    lines = [render(TABLE_COLUMNS)]
    lines.extend(render(row) for row in rows)
    return "\n".join(lines) + "\n"


def format_machine_report(method, split, level, report):
    """Full-precision key=value block for downstream tooling."""
    return (
        f"method={method}\n"
        f"split={split}\n"
        f"level={level}\n"
        f"n={report.n}\n"
        f"acc1={fmt_float(report.acc1)}\n"
        f"acc10={fmt_float(report.acc10)}\n"
        f"mrr={fmt_float(report.mrr)}\n"
    )
