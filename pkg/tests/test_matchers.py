"""Dictionary, exact, and fuzzy matcher tests with a linear-scan oracle."""

import random

import pytest

from medlink.corpus import GENERAL, Mention
from medlink.errors import ConfigError
from medlink.matchers import (
    DEFAULT_LEV_GRID,
    DEFAULT_STOILOS_GRID,
    build_dictionary,
    dictionary_lookup,
    exact_match,
    fuzzy_match,
    load_dictionary,
    save_dictionary,
    tune_threshold,
)
from medlink.strings import levenshtein_ratio, stoilos_distance


def mention(mid, term, concept):
    return Mention(
        id=mid,
        term=term,
        general_sctid=concept,
        specific_sctid=concept,
        example=f"context with {term}",
        subreddit="r",
    )


def fuzzy_scan_oracle(graph, term, metric_fn):
    """Exhaustive scan returning the minimal (distance, sctid, label index)."""
    rows = []
    for sctid, concept in graph.concepts.items():
        for idx, label in enumerate(concept.labels):
            rows.append((metric_fn(term.lower(), label.lower()), int(sctid), idx))
    return min(rows) if rows else None


def random_label(rng, min_len=3, max_len=10):
    alphabet = "aabbccddeeffg hij"
    return "".join(rng.choice(alphabet) for _ in range(rng.randrange(min_len, max_len + 1))).strip() or "abc"


class TestDictionary:
    def test_most_frequent_wins(self):
        train = [
            mention(1, "benzos", "200"),
            mention(2, "Benzos", "200"),
            mention(3, "benzos", "100"),
        ]
        d = build_dictionary(train, GENERAL)
        assert d.map["benzos"] == ("200", 2)

    def test_frequency_tie_takes_smaller_sctid(self):
        train = [mention(1, "acid", "300"), mention(2, "acid", "40")]
        d = build_dictionary(train, GENERAL)
        assert d.map["acid"] == ("40", 1)

    def test_whitespace_term_skipped_with_warning(self, caplog):
        train = [mention(1, "  ", "7"), mention(2, "real", "7")]
        with caplog.at_level("WARNING", logger="medlink.matchers"):
            d = build_dictionary(train, GENERAL)
        assert "folds to empty" in caplog.text
        assert list(d.map) == ["real"]

    def test_lookup_hit_and_miss(self):
        d = build_dictionary([mention(1, "acid", "5")], GENERAL)
        hit = dictionary_lookup(d, "ACID")
        assert hit.is_hit and hit.sctid == "5" and hit.score == 0.0
        assert not dictionary_lookup(d, "base").is_hit

    def test_perfect_on_unambiguous_training_terms(self):
        rng = random.Random(0)
        train = [mention(i, f"term{i % 7}", str(10 + i % 7)) for i in range(30)]
        rng.shuffle(train)
        d = build_dictionary(train, GENERAL)
        hits = sum(
            dictionary_lookup(d, m.term).sctid == m.gold(GENERAL) for m in train
        )
        assert hits == len(train)

    def test_zero_shot_terms_always_miss(self):
        d = build_dictionary([mention(1, "seen", "5")], GENERAL)
        unseen = [mention(2, "novel", "6"), mention(3, "fresh", "7")]
        assert all(not dictionary_lookup(d, m.term).is_hit for m in unseen)

    def test_roundtrip(self, tmp_path):
        train = [mention(i, f"t{i % 4}", str(i % 3 + 1)) for i in range(12)]
        d = build_dictionary(train, GENERAL)
        path = tmp_path / "dict.tsv"
        save_dictionary(d, path)
        again = load_dictionary(path)
        assert again.map == d.map

    def test_persisted_sorted_by_term(self, tmp_path):
        d = build_dictionary(
            [mention(1, "zebra", "1"), mention(2, "apple", "2")], GENERAL
        )
        path = tmp_path / "dict.tsv"
        save_dictionary(d, path)
        terms = [line.split("\t")[0] for line in path.read_text().splitlines()]
        assert terms == sorted(terms)


class TestExactMatch:
    def test_unique_label(self, graph_factory):
        g = graph_factory({"10": ["Headache"], "20": ["Fever"]})
        r = exact_match(g, "headache")
        assert r.sctid == "10" and r.score == 0.0 and r.method == "exact"

    def test_shared_label_takes_smaller_sctid(self, graph_factory):
        g = graph_factory({"30": ["Leg"], "7": ["Leg"]})
        assert exact_match(g, "LEG").sctid == "7"

    def test_miss(self, graph_factory):
        g = graph_factory({"10": ["Headache"]})
        assert not exact_match(g, "migraine").is_hit


class TestFuzzyMatch:
    def test_exact_label_any_tau(self, graph_factory):
        g = graph_factory({"10": ["anaemia"], "20": ["angina"]})
        r = fuzzy_match(g, "anaemia", "lev", tau=0.0)
        assert r.sctid == "10" and r.score == 0.0

    def test_tau_zero_without_exact_misses(self, graph_factory):
        g = graph_factory({"10": ["anaemia"]})
        assert not fuzzy_match(g, "anemia", "lev", tau=0.0).is_hit

    def test_nearest_concept_within_tau(self, graph_factory):
        # Frozen ratios from the DP oracle: d(anemia, anaemia) = 1/7,
        # d(anemia, angina) = 3/6; the anaemia concept wins iff tau >= 1/7.
        assert levenshtein_ratio("anemia", "anaemia") == pytest.approx(1 / 7)
        assert levenshtein_ratio("anemia", "angina") == pytest.approx(0.5)
        g = graph_factory({"10": ["anaemia"], "20": ["angina"]})
        hit = fuzzy_match(g, "anemia", "lev", tau=1 / 7)
        assert hit.sctid == "10"
        assert hit.score == pytest.approx(1 / 7)
        assert not fuzzy_match(g, "anemia", "lev", tau=0.14).is_hit

    def test_totality_at_tau_one(self, graph_factory):
        rng = random.Random(1)
        g = graph_factory({str(i): [random_label(rng)] for i in range(1, 40)})
        for _ in range(50):
            term = random_label(rng)
            assert fuzzy_match(g, term, "lev", tau=1.0).is_hit

    def test_matches_linear_scan_oracle(self, graph_factory):
        rng = random.Random(2)
        for metric, fn in (("lev", levenshtein_ratio), ("stoilos", stoilos_distance)):
            g = graph_factory(
                {
                    str(i): [random_label(rng) for _ in range(rng.randrange(1, 4))]
                    for i in range(1, 30)
                }
            )
            for _ in range(40):
                term = random_label(rng)
                expected = fuzzy_scan_oracle(g, term, fn)
                got = fuzzy_match(g, term, metric, tau=1.0)
                assert got.is_hit
                assert (got.score, int(got.sctid)) == (expected[0], expected[1])

    def test_monotone_in_tau(self, graph_factory):
        rng = random.Random(3)
        g = graph_factory({str(i): [random_label(rng)] for i in range(1, 25)})
        for _ in range(30):
            term = random_label(rng)
            previous_hit = False
            for tau in (0.0, 0.1, 0.3, 0.6, 1.0):
                hit = fuzzy_match(g, term, "lev", tau).is_hit
                assert hit or not previous_hit
                previous_hit = hit

    def test_prefilter_equivalence(self, graph_factory):
        rng = random.Random(4)
        g = graph_factory(
            {str(i): [random_label(rng, 3, 14)] for i in range(1, 35)}
        )
        for _ in range(60):
            term = random_label(rng, 3, 14)
            tau = rng.choice((0.0, 0.1, 0.2, 0.5, 1.0))
            fast = fuzzy_match(g, term, "lev", tau, prefilter=True)
            slow = fuzzy_match(g, term, "lev", tau, prefilter=False)
            assert fast == slow

    def test_bad_metric_and_tau(self, graph_factory):
        g = graph_factory({"1": ["a label"]})
        with pytest.raises(ConfigError):
            fuzzy_match(g, "x", "soundex", 0.1)
        with pytest.raises(ConfigError):
            fuzzy_match(g, "x", "lev", 1.5)


class TestTuneThreshold:
    def test_single_value_grid(self, graph_factory):
        g = graph_factory({"10": ["headache"]})
        dev = [mention(1, "headach", "10")]
        assert tune_threshold(g, dev, GENERAL, "lev", grid=[0.3]) == 0.3

    def test_only_one_tau_links_correctly(self, graph_factory):
        # Gold label sits at distance exactly 1/10 from the term; every
        # other label is far away, so only taus >= 0.10 score anything
        # and the tie rule picks the smallest.
        g = graph_factory({"10": ["abcdefghix"], "20": ["zzzzzz"]})
        dev = [mention(1, "abcdefghij", "10")]
        best = tune_threshold(g, dev, GENERAL, "lev", grid=[0.05, 0.10, 0.15, 0.20])
        assert best == 0.10

    def test_smallest_tau_wins_ties(self, graph_factory):
        g = graph_factory({"10": ["alpha"]})
        dev = [mention(1, "alpha", "10")]
        assert tune_threshold(g, dev, GENERAL, "lev", grid=[0.2, 0.1, 0.15]) == 0.1

    def test_default_grids(self):
        assert DEFAULT_LEV_GRID[0] == 0.10
        assert DEFAULT_LEV_GRID[-1] == 0.20
        assert len(DEFAULT_LEV_GRID) == 11
        assert DEFAULT_STOILOS_GRID[0] == 0.05
        assert DEFAULT_STOILOS_GRID[-1] == 0.10
        assert len(DEFAULT_STOILOS_GRID) == 11

    def test_prefers_accuracy_over_tau(self, graph_factory):
        g = graph_factory({"10": ["abcdefghix"], "20": ["abcdefzzzz"]})
        dev = [mention(1, "abcdefghij", "10"), mention(2, "abcdefzzzz", "20")]
        # tau=0.05 links only the exact term (acc 1/2); tau=0.10 links both.
        assert tune_threshold(g, dev, GENERAL, "lev", grid=[0.05, 0.10]) == 0.10

    def test_empty_grid_rejected(self, graph_factory):
        g = graph_factory({"10": ["a"]})
        with pytest.raises(ConfigError):
            tune_threshold(g, [], GENERAL, "lev", grid=[])
