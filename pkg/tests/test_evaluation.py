"""Eval tests: metric fixtures, the linear-scan oracle, table rendering."""

import numpy as np
import pytest

from medlink.corpus import Mention
from medlink.errors import FormatError, ValidationError
from medlink.evaluation import EvalReport, format_machine_report, report_table, round2, score
from medlink.linking import Ranking, write_predictions

from oracles import metrics_linear_scan


def mention(mid, general, specific=None):
    return Mention(
        id=mid,
        term=f"term {mid}",
        general_sctid=general,
        specific_sctid=specific if specific is not None else general,
        example=f"example {mid}",
        subreddit="r/stub",
    )


def preds(candidate_ids):
    """mention id -> candidate list in the loader's row shape."""
    return {
        str(mid): [(sctid, 0.0, "stub") for sctid in ids]
        for mid, ids in candidate_ids.items()
    }


class TestScore:
    def test_rank_one_scores_all_ones(self):
        report = score(preds({1: ["101"]}), [mention(1, "101")], "general")
        assert (report.acc1, report.acc10, report.mrr) == (1.0, 1.0, 1.0)

    def test_rank_four_scores_quarter_mrr(self):
        report = score(
            preds({1: ["9", "8", "7", "101"]}), [mention(1, "101")], "general"
        )
        assert (report.acc1, report.acc10, report.mrr) == (0.0, 1.0, 0.25)

    def test_fixture_ranks_1_2_11_miss(self):
        candidates = {
            1: ["101"] + [str(900 + i) for i in range(9)],
            2: ["900", "102"],
            3: [str(900 + i) for i in range(10)] + ["103"],
            4: ["900", "901"],
        }
        gold = [mention(i, str(100 + i)) for i in (1, 2, 3, 4)]
        report = score(preds(candidates), gold, "general")
        assert report.acc1 == 0.25
        assert report.acc10 == 0.5
        assert report.mrr == 0.375

    def test_reciprocal_rank_window_matches_acc10(self):
        deep = [str(900 + i) for i in range(9)]
        at_ten = score(preds({1: deep + ["101"]}), [mention(1, "101")], "general")
        assert (at_ten.acc10, at_ten.mrr) == (1.0, 0.1)
        past_ten = score(preds({1: deep + ["999", "101"]}), [mention(1, "101")], "general")
        assert (past_ten.acc10, past_ten.mrr) == (0.0, 0.0)

    def test_missing_mention_scores_zero_with_warning(self, caplog):
        gold = [mention(1, "101"), mention(2, "102")]
        with caplog.at_level("WARNING"):
            report = score(preds({1: ["101"]}), gold, "general")
        assert "2" in caplog.text
        assert report.acc1 == 0.5
        assert report.mrr == 0.5

    def test_rank_past_list_end_is_a_miss(self):
        report = score(preds({1: ["900", "901"]}), [mention(1, "101")], "general")
        assert (report.acc1, report.acc10, report.mrr) == (0.0, 0.0, 0.0)

    def test_level_selects_gold_column(self):
        gold = [mention(1, "101", specific="202")]
        p = preds({1: ["202", "101"]})
        assert score(p, gold, "specific").acc1 == 1.0
        assert score(p, gold, "general").acc1 == 0.0
        assert score(p, gold, "general").mrr == 0.5

    def test_empty_gold_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            score(preds({}), [], "general")

    def test_reads_predictions_from_file(self, tmp_path):
        path = tmp_path / "preds.tsv"
        write_predictions(
            path, [(1, Ranking(1, [("900", 0.9), ("101", 0.8)]), "neural")]
        )
        report = score(path, [mention(1, "101")], "general")
        assert report.mrr == 0.5

    def test_malformed_file_raises_parse_error(self, tmp_path):
        path = tmp_path / "preds.tsv"
        path.write_text("not a prediction row\n")
        with pytest.raises(FormatError):
            score(path, [mention(1, "101")], "general")

    def test_mrr_equals_acc1_when_all_hits_at_rank_one(self):
        candidates = {1: ["101"], 2: ["102"], 3: ["999"]}
        gold = [mention(i, str(100 + i)) for i in (1, 2, 3)]
        report = score(preds(candidates), gold, "general")
        assert report.mrr == report.acc1

    def test_agrees_with_linear_scan_oracle(self):
        rng = np.random.default_rng(11)
        for trial in range(25):
            n = int(rng.integers(1, 100))
            gold = {}
            ranked = {}
            for mid in range(n):
                gold[mid] = str(rng.integers(100, 140))
                depth = int(rng.integers(0, 15))
                ranked[mid] = [
                    str(v) for v in rng.choice(np.arange(100, 140), depth, replace=False)
                ]
                if rng.random() < 0.15:
                    del ranked[mid]
            mentions = [mention(mid, sctid) for mid, sctid in gold.items()]
            report = score(preds(ranked), mentions, "general")
            want = metrics_linear_scan(ranked, gold)
            assert (report.acc1, report.acc10, report.mrr) == want
            assert report.acc1 <= report.acc10 <= 1.0
            assert report.mrr >= report.acc1


class TestEvalReport:
    def test_acc1_above_acc10_rejected(self):
        with pytest.raises(ValidationError, match="exceeds"):
            EvalReport(n=1, acc1=0.8, acc10=0.5, mrr=0.8)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError, match="out of"):
            EvalReport(n=1, acc1=-0.1, acc10=0.5, mrr=0.2)

    def test_mrr_below_acc1_rejected(self):
        with pytest.raises(ValidationError, match="below"):
            EvalReport(n=1, acc1=0.5, acc10=0.5, mrr=0.2)


class TestReportTable:
    def reports(self):
        return {
            "dict": EvalReport(n=4, acc1=0.25, acc10=0.5, mrr=0.375),
            "lev:0.17": EvalReport(n=4, acc1=0.515, acc10=0.515, mrr=0.515),
        }

    def test_text_table_rows_in_insertion_order(self):
        text = report_table(self.reports())
        lines = text.splitlines()
        assert lines[0].split() == ["method", "n", "acc1", "acc10", "mrr"]
        assert lines[1].split() == ["dict", "4", "0.25", "0.50", "0.38"]
        assert lines[2].split() == ["lev:0.17", "4", "0.52", "0.52", "0.52"]

    def test_half_up_rounding(self):
        assert round2(0.515) == "0.52"
        assert round2(0.375) == "0.38"
        assert round2(0.25) == "0.25"
        assert round2(1.0) == "1.00"
        assert round2(0.0) == "0.00"

    def test_empty_reports_render_header_only(self):
        assert report_table({}).splitlines() == ["method  n  acc1  acc10  mrr"]
        assert report_table({}, format="csv") == "method,n,acc1,acc10,mrr\n"

    def test_csv_format(self):
        text = report_table(self.reports(), format="csv")
        assert text.splitlines() == [
            "method,n,acc1,acc10,mrr",
            "dict,4,0.25,0.50,0.38",
            "lev:0.17,4,0.52,0.52,0.52",
        ]

    def test_unknown_format_rejected(self):
        with pytest.raises(ValidationError, match="format"):
            report_table({}, format="html")

    def test_columns_align_across_rows(self):
        text = report_table(self.reports())
        lines = text.splitlines()
        assert len({len(line) for line in lines}) == 1


class TestMachineReport:
    def test_key_value_block_full_precision(self):
        report = EvalReport(n=3, acc1=1 / 3, acc10=2 / 3, mrr=0.5)
        block = format_machine_report("stoilos:0.07", "zeroshot", "general", report)
        lines = block.splitlines()
        assert lines == [
            "method=stoilos:0.07",
            "split=zeroshot",
            "level=general",
            "n=3",
            f"acc1={1 / 3!r}",
            f"acc10={2 / 3!r}",
            "mrr=0.5",
        ]
