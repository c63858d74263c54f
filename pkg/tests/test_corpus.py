"""Corpus parsing and split generation tests."""

import random

import pytest

from medlink.corpus import (
    CORPUS_HEADER,
    GENERAL,
    SPECIFIC,
    STRATIFIED,
    ZERO_SHOT,
    CorpusSplit,
    Mention,
    corpus_checksum,
    load_corpus,
    make_split,
    split_stats,
    write_corpus,
    write_split,
)
from medlink.errors import (
    ConfigError,
    FormatError,
    InfeasibleSplitError,
    ValidationError,
)
from medlink.kg import load_graph

HEADER = "\t".join(CORPUS_HEADER)


def write_rows(tmp_path, rows, name="corpus.tsv"):
    path = tmp_path / name
    path.write_text("".join(f"{r}\n" for r in [HEADER] + rows), encoding="utf-8")
    return path


def make_mention(mid, concept, term=None, specific=None):
    term = term or f"term{concept}"
    return Mention(
        id=mid,
        term=term,
        general_sctid=concept,
        specific_sctid=specific or concept,
        example=f"I have {term} today",
        subreddit="AskDocs",
    )


def random_corpus(rng, n_mentions, n_concepts):
    concepts = [str(100 + i) for i in range(n_concepts)]
    return [make_mention(i + 1, rng.choice(concepts)) for i in range(n_mentions)]


class TestLoadCorpus:
    def test_single_row(self, tmp_path):
        path = write_rows(
            tmp_path,
            ["7\tacid\t34957004\t34957004\tI burned myself with acid\tAskDocs"],
        )
        (m,) = load_corpus(path)
        assert m.id == 7
        assert m.term == "acid"
        assert m.general_sctid == m.specific_sctid == "34957004"
        assert m.term_in_example

    def test_differing_levels(self, tmp_path):
        path = write_rows(
            tmp_path,
            ["8\tacid\t34957004\t698065002\tacid in my throat\tcancer"],
        )
        (m,) = load_corpus(path)
        assert m.gold(GENERAL) == "34957004"
        assert m.gold(SPECIFIC) == "698065002"

    def test_empty_after_header(self, tmp_path):
        assert load_corpus(write_rows(tmp_path, [])) == []

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("ID\tTerm\n", encoding="utf-8")
        with pytest.raises(FormatError, match="header"):
            load_corpus(path)

    def test_wrong_column_count_reports_line(self, tmp_path):
        path = write_rows(tmp_path, ["1\ta\t2\t2\tex\tsub", "2\tb\t3\t3"])
        with pytest.raises(FormatError, match="line 3"):
            load_corpus(path)

    def test_duplicate_id(self, tmp_path):
        path = write_rows(
            tmp_path,
            ["1\ta\t2\t2\ta here\tsub", "1\tb\t3\t3\tb here\tsub"],
        )
        with pytest.raises(ValidationError, match="duplicate"):
            load_corpus(path)

    def test_graph_validation(self, tmp_path):
        cpath = tmp_path / "concepts.tsv"
        cpath.write_text("2\tA\tt\n", encoding="utf-8")
        epath = tmp_path / "edges.tsv"
        epath.write_text("", encoding="utf-8")
        graph = load_graph(cpath, epath)
        good = write_rows(tmp_path, ["1\ta\t2\t2\ta here\tsub"], name="good.tsv")
        assert len(load_corpus(good, graph=graph)) == 1
        bad = write_rows(tmp_path, ["1\ta\t2\t999\ta here\tsub"], name="bad.tsv")
        with pytest.raises(ValidationError, match="999"):
            load_corpus(bad, graph=graph)

    def test_roundtrip(self, tmp_path):
        mentions = [make_mention(i, str(100 + i % 3)) for i in range(1, 8)]
        path = tmp_path / "out.tsv"
        write_corpus(path, mentions)
        assert load_corpus(path) == mentions

    def test_term_in_example_flag(self):
        m = make_mention(1, "5", term="knee pain")
        assert m.term_in_example
        paraphrased = Mention(
            id=2,
            term="knee pain",
            general_sctid="5",
            specific_sctid="5",
            example="my leg hurts",
            subreddit="r",
        )
        assert not paraphrased.term_in_example


class TestMakeSplit:
    def test_single_concept_stratified(self):
        mentions = [make_mention(i, "42") for i in range(1, 7)]
        split = make_split(mentions, GENERAL, STRATIFIED, ratios=(2 / 3, 1 / 6, 1 / 6), seed=3)
        train_concepts = {m.gold(GENERAL) for m in split.train}
        assert "42" in train_concepts
        for part in (split.dev, split.test):
            for m in part:
                assert m.gold(GENERAL) in train_concepts

    def test_singleton_concepts_zero_shot(self):
        mentions = [make_mention(i, str(100 + i)) for i in range(4)]
        split = make_split(mentions, GENERAL, ZERO_SHOT, ratios=(0.5, 0.25, 0.25), seed=1)
        train_c = {m.gold(GENERAL) for m in split.train}
        held_c = {m.gold(GENERAL) for m in split.dev + split.test}
        assert train_c & held_c == set()
        assert len(split.train) + len(split.dev) + len(split.test) == 4

    def test_partition_property(self):
        rng = random.Random(11)
        for trial in range(20):
            mentions = random_corpus(rng, 40, 8)
            kind = STRATIFIED if trial % 2 else ZERO_SHOT
            split = make_split(mentions, GENERAL, kind, seed=trial)
            ids = [m.id for m in split.train + split.dev + split.test]
            assert sorted(ids) == sorted(m.id for m in mentions)
            assert len(set(ids)) == len(ids)

    def test_stratified_coverage_exact(self):
        rng = random.Random(12)
        for trial in range(10):
            mentions = random_corpus(rng, 60, 10)
            split = make_split(mentions, SPECIFIC, STRATIFIED, seed=trial)
            train_c = {m.gold(SPECIFIC) for m in split.train}
            for m in split.dev + split.test:
                assert m.gold(SPECIFIC) in train_c

    def test_zero_shot_overlap_empty(self):
        rng = random.Random(13)
        for trial in range(10):
            mentions = random_corpus(rng, 60, 15)
            split = make_split(mentions, GENERAL, ZERO_SHOT, seed=trial)
            train_c = {m.gold(GENERAL) for m in split.train}
            held_c = {m.gold(GENERAL) for m in split.dev + split.test}
            assert train_c & held_c == set()

    def test_deterministic(self):
        rng = random.Random(14)
        mentions = random_corpus(rng, 50, 9)
        a = make_split(mentions, GENERAL, STRATIFIED, seed=5)
        b = make_split(mentions, GENERAL, STRATIFIED, seed=5)
        assert [m.id for m in a.train] == [m.id for m in b.train]
        assert [m.id for m in a.dev] == [m.id for m in b.dev]
        assert [m.id for m in a.test] == [m.id for m in b.test]

    def test_input_order_irrelevant(self):
        rng = random.Random(15)
        mentions = random_corpus(rng, 50, 9)
        shuffled = list(mentions)
        rng.shuffle(shuffled)
        a = make_split(mentions, GENERAL, STRATIFIED, seed=5)
        b = make_split(shuffled, GENERAL, STRATIFIED, seed=5)
        assert [m.id for m in a.train] == [m.id for m in b.train]

    def test_seed_changes_assignment(self):
        rng = random.Random(16)
        mentions = random_corpus(rng, 50, 9)
        a = make_split(mentions, GENERAL, ZERO_SHOT, seed=1)
        b = make_split(mentions, GENERAL, ZERO_SHOT, seed=2)
        assert [m.id for m in a.train] != [m.id for m in b.train]

    def test_sizes_near_targets(self):
        rng = random.Random(17)
        mentions = random_corpus(rng, 200, 20)
        split = make_split(mentions, GENERAL, STRATIFIED, seed=0)
        assert abs(len(split.train) - 135) <= 20
        assert abs(len(split.dev) - 22) <= 15
        assert abs(len(split.test) - 43) <= 15

    def test_infeasible_stratified(self):
        mentions = [make_mention(i, str(100 + i)) for i in range(5)]
        with pytest.raises(InfeasibleSplitError):
            make_split(mentions, GENERAL, STRATIFIED, seed=0)

    def test_bad_ratios(self):
        mentions = [make_mention(i, "7") for i in range(4)]
        with pytest.raises(ConfigError):
            make_split(mentions, GENERAL, STRATIFIED, ratios=(0.5, 0.5, 0.5))
        with pytest.raises(ConfigError):
            make_split(mentions, GENERAL, STRATIFIED, ratios=(-0.2, 0.6, 0.6))

    def test_bad_level_and_kind(self):
        mentions = [make_mention(1, "7")]
        with pytest.raises(ConfigError):
            make_split(mentions, "meta", STRATIFIED)
        with pytest.raises(ConfigError):
            make_split(mentions, GENERAL, "random")


class TestSplitStats:
    def test_trivial_counts(self):
        parts = [[make_mention(1, "5")], [make_mention(2, "5")], [make_mention(3, "5")]]
        split = CorpusSplit(
            level=GENERAL,
            kind=STRATIFIED,
            seed=0,
            ratios=(1 / 3, 1 / 3, 1 / 3),
            train=parts[0],
            dev=parts[1],
            test=parts[2],
            input_checksum="x",
        )
        stats = split_stats(split)
        assert (stats["train_size"], stats["dev_size"], stats["test_size"]) == (1, 1, 1)
        assert stats["test_concept_coverage"] == 1.0

    def test_coverage_extremes(self):
        rng = random.Random(18)
        mentions = random_corpus(rng, 60, 10)
        stratified = make_split(mentions, GENERAL, STRATIFIED, seed=4)
        assert split_stats(stratified)["test_concept_coverage"] == 1.0
        assert split_stats(stratified)["dev_concept_coverage"] == 1.0
        zero = make_split(mentions, GENERAL, ZERO_SHOT, seed=4)
        assert split_stats(zero)["test_concept_coverage"] == 0.0

    def test_surface_overlap_range(self):
        rng = random.Random(19)
        mentions = random_corpus(rng, 80, 8)
        split = make_split(mentions, GENERAL, STRATIFIED, seed=2)
        overlap = split_stats(split)["test_surface_overlap"]
        assert 0.0 <= overlap <= 1.0


class TestWriteSplit:
    def test_byte_identical_outputs(self, tmp_path):
        rng = random.Random(20)
        mentions = random_corpus(rng, 50, 9)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        out1.mkdir()
        out2.mkdir()
        write_split(make_split(mentions, GENERAL, ZERO_SHOT, seed=9), out1)
        write_split(make_split(mentions, GENERAL, ZERO_SHOT, seed=9), out2)
        for name in ("train.tsv", "dev.tsv", "test.tsv", "split.meta"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_meta_contents(self, tmp_path):
        mentions = [make_mention(i, "7") for i in range(1, 9)]
        split = make_split(mentions, GENERAL, STRATIFIED, seed=3)
        write_split(split, tmp_path)
        meta = dict(
            line.split("=", 1)
            for line in (tmp_path / "split.meta").read_text().splitlines()
        )
        assert meta["kind"] == STRATIFIED
        assert meta["level"] == GENERAL
        assert meta["seed"] == "3"
        assert meta["input_checksum"] == corpus_checksum(mentions)
        assert int(meta["train_size"]) == len(split.train)

    def test_partitions_reload_in_schema(self, tmp_path):
        rng = random.Random(21)
        mentions = random_corpus(rng, 30, 6)
        split = make_split(mentions, GENERAL, STRATIFIED, seed=1)
        write_split(split, tmp_path)
        assert load_corpus(tmp_path / "train.tsv") == split.train
        assert load_corpus(tmp_path / "dev.tsv") == split.dev
        assert load_corpus(tmp_path / "test.tsv") == split.test
