"""Tests for BLEU, ROUGE-L, METEOR-ex and the interrogative-word table,
checked against the brute-force oracles."""

import math

import numpy as np
import pytest

from oracles import (
    oracle_align,
    oracle_bleu,
    oracle_clipped_counts,
    oracle_lcs,
    oracle_meteor_pair,
    random_token_pair,
)
from qgkit.data import IWClass
from qgkit.metrics import (
    METEOR_LABEL,
    ROUGE_L_BETA,
    EvalReport,
    align_tokens,
    bleu_n,
    evaluate_generation,
    iw_recall_precision,
    lcs_length,
    meteor_variant,
    rouge_l,
    stem,
)


class TestBleu:
    def test_identity_is_one(self):
        corpus = [["the", "cat", "sat"], ["a", "dog", "ran", "home"]]
        assert bleu_n(corpus, corpus) == (1.0, 1.0, 1.0, 1.0)

    def test_clipping_hand_case(self):
        # "the the the" vs "the cat sat": unigram count 3, clipped to 1
        scores = bleu_n([["the", "the", "the"]], [["the", "cat", "sat"]])
        assert scores[0] == pytest.approx(1 / 3)
        assert scores[1] == 0.0

    def test_brevity_penalty_hand_case(self):
        # perfect unigrams, candidate half the reference length
        scores = bleu_n([["a", "b", "c"]], [["a", "b", "c", "d", "e", "f"]], n_max=1)
        assert scores[0] == pytest.approx(math.exp(-1.0))

    def test_no_penalty_when_candidate_longer(self):
        scores = bleu_n([["a", "b", "c", "d"]], [["a", "b"]], n_max=1)
        assert scores[0] == pytest.approx(0.5)  # 2/4 unigrams, BP = 1

    def test_zero_overlap_is_zero(self):
        assert bleu_n([["x", "y"]], [["p", "q"]]) == (0.0, 0.0, 0.0, 0.0)

    def test_empty_candidate(self):
        assert bleu_n([[]], [["a"]]) == (0.0, 0.0, 0.0, 0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bleu_n([["a"]], [["a"], ["b"]])

    def test_clipped_never_exceeds_total(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            cand, ref = random_token_pair(rng)
            for n in range(1, 5):
                clipped, total = oracle_clipped_counts(cand, ref, n)
                assert 0 <= clipped <= total

    def test_matches_oracle_on_random_corpora(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            n_pairs = int(rng.integers(1, 5))
            pairs = [random_token_pair(rng) for _ in range(n_pairs)]
            cands = [c for c, _ in pairs]
            refs = [r for _, r in pairs]
            got = bleu_n(cands, refs)
            for k in range(1, 5):
                want = oracle_bleu(cands, refs, k)
                assert got[k - 1] == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_corpus_level_pooling(self):
        # pooled counts differ from averaging per-sentence scores: the
        # second pair alone has zero overlap yet the corpus BLEU-1 is
        # positive because counts pool before the ratio
        cands = [["a", "a", "a"], ["x"]]
        refs = [["a", "a", "a"], ["y"]]
        assert bleu_n(cands, refs, n_max=1)[0] == pytest.approx(3 / 4)


class TestRougeL:
    def test_identity_is_one(self):
        corpus = [["the", "cat"], ["a", "dog", "ran"]]
        assert rouge_l(corpus, corpus) == 1.0

    def test_swap_hand_case(self):
        assert rouge_l([["the", "cat"]], [["cat", "the"]]) == pytest.approx(0.5)

    def test_disjoint_is_zero(self):
        assert rouge_l([["a", "b"]], [["x", "y"]]) == 0.0

    def test_mean_over_corpus(self):
        cands = [["the", "cat"], ["the", "cat"]]
        refs = [["the", "cat"], ["cat", "the"]]
        assert rouge_l(cands, refs) == pytest.approx(0.75)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            rouge_l([], [["a"]])

    def test_lcs_matches_exhaustive_search(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            cand, ref = random_token_pair(rng, max_len=10)
            assert lcs_length(cand, ref) == oracle_lcs(cand, ref)

    def test_lcs_known_values(self):
        assert lcs_length(list("abcde"), list("ace")) == 3
        assert lcs_length(list("abc"), list("cba")) == 1
        assert lcs_length([], list("abc")) == 0


class TestStemmer:
    @pytest.mark.parametrize(
        "token,expected",
        [
            ("cats", "cat"),
            ("cities", "city"),
            ("boxes", "box"),
            ("watches", "watch"),
            ("glass", "glass"),
            ("running", "run"),
            ("planned", "plan"),
            ("quickly", "quick"),
            ("make", "mak"),
            ("makes", "mak"),
            ("making", "mak"),
            ("ties", "tie"),
            ("tie", "tie"),
            ("is", "is"),
            ("a", "a"),
        ],
    )
    def test_rules(self, token, expected):
        assert stem(token) == expected

    def test_inflection_family_shares_stem(self):
        assert len({stem(t) for t in ["love", "loves", "loved", "loving"]}) == 1

    def test_never_below_two_characters(self):
        for token in ["as", "es", "ed", "we", "be", "so"]:
            assert len(stem(token)) >= 2


class TestMeteor:
    def test_identity_is_one(self):
        corpus = [["what", "is", "this", "?"]]
        assert meteor_variant(corpus, corpus) == 1.0

    def test_zero_matches_is_zero(self):
        assert meteor_variant([["x", "y"]], [["p", "q"]]) == 0.0

    def test_stem_layer_matches(self):
        # single stem match, one chunk: F_mean 1, penalty 0.5
        assert meteor_variant([["cats"]], [["cat"]]) == pytest.approx(0.5)

    def test_penalty_hand_case_swapped(self):
        # both tokens match exactly but in two chunks: penalty 0.5
        assert meteor_variant([["b", "a"]], [["a", "b"]]) == pytest.approx(0.5)

    def test_penalty_hand_case_partial(self):
        # 2 of 3 match in one chunk: P=R=2/3, F_mean=2/3, penalty=1/16
        got = meteor_variant([["a", "b", "x"]], [["a", "b", "y"]])
        assert got == pytest.approx((2 / 3) * (15 / 16))

    def test_exact_match_preferred_over_stem(self):
        res = align_tokens(["cat"], ["cats", "cat"])
        assert res.pairs == ((0, 1),)
        assert res.exact == 1

    def test_alignment_injective(self):
        res = align_tokens(["the", "the"], ["the"])
        assert res.total == 1

    def test_alignment_matches_enumeration(self):
        rng = np.random.default_rng(24)
        for _ in range(100):
            cand, ref = random_token_pair(rng)
            res = align_tokens(cand, ref)
            assert res.complete
            exact, total, chunks, pairs = oracle_align(cand, ref)
            assert (res.exact, res.total, res.chunks, res.pairs) == (
                exact, total, chunks, pairs,
            )

    def test_score_matches_oracle(self):
        rng = np.random.default_rng(25)
        for _ in range(100):
            cand, ref = random_token_pair(rng)
            got = meteor_variant([cand], [ref])
            want = oracle_meteor_pair(cand, ref)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            meteor_variant([["a"]], [])


class TestIWScores:
    GOLD = [
        ["what", "is", "it", "?"],
        ["which", "one", "?"],
        ["where", "is", "it", "?"],
        ["when", "was", "it", "?"],
        ["who", "did", "it", "?"],
        ["why", "though", "?"],
        ["how", "big", "?"],
        ["name", "the", "city", "."],
    ]

    def test_perfect_match(self):
        scores = iw_recall_precision(self.GOLD, self.GOLD)
        assert scores.total_recall == 1.0
        for c in IWClass:
            assert scores.per_class[c].recall == 1.0
            assert scores.per_class[c].precision == 1.0
            assert scores.per_class[c].support == 1

    def test_all_what_against_uniform_gold(self):
        generated = [["what", "is", "it", "?"]] * 8
        scores = iw_recall_precision(generated, self.GOLD)
        assert scores.total_recall == pytest.approx(1 / 8)
        assert scores.per_class[IWClass.What].recall == 1.0
        assert scores.per_class[IWClass.What].precision == pytest.approx(1 / 8)
        for c in IWClass:
            if c != IWClass.What:
                assert scores.per_class[c].recall == 0.0

    def test_support_sums_to_corpus_size(self):
        rng = np.random.default_rng(26)
        starters = ["what", "who", "why", "name", "how", "where"]
        gold = [[starters[i], "x", "?"] for i in rng.integers(0, 6, size=40)]
        gen = [[starters[i], "y", "?"] for i in rng.integers(0, 6, size=40)]
        scores = iw_recall_precision(gen, gold)
        assert scores.support_total() == 40

    def test_total_is_support_weighted_recall(self):
        rng = np.random.default_rng(27)
        starters = ["what", "who", "why", "name", "how", "where"]
        gold = [[starters[i], "x", "?"] for i in rng.integers(0, 6, size=60)]
        gen = [[starters[i], "y", "?"] for i in rng.integers(0, 6, size=60)]
        scores = iw_recall_precision(gen, gold)
        weighted = sum(
            s.recall * s.support for s in scores.per_class.values()
        ) / 60
        assert scores.total_recall == pytest.approx(weighted)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            iw_recall_precision([["what"]], [])


class TestEvalReport:
    def _random_corpus(self, rng, n):
        pairs = [random_token_pair(rng) for _ in range(n)]
        return [c for c, _ in pairs], [r for _, r in pairs]

    def test_bundle_matches_individual_metrics(self):
        rng = np.random.default_rng(28)
        cands, refs = self._random_corpus(rng, 10)
        report = evaluate_generation(cands, refs)
        assert report.bleu == bleu_n(cands, refs)
        assert report.rouge_l == rouge_l(cands, refs)
        assert report.meteor_variant == meteor_variant(cands, refs)
        assert report.n_examples == 10

    def test_all_values_in_unit_interval(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            cands, refs = self._random_corpus(rng, 5)
            report = evaluate_generation(cands, refs)
            values = list(report.bleu) + [
                report.rouge_l,
                report.meteor_variant,
                report.iw_scores.total_recall,
            ]
            for s in report.iw_scores.per_class.values():
                values += [s.recall, s.precision]
            assert all(0.0 <= v <= 1.0 for v in values)

    def test_json_records_conventions(self):
        report = evaluate_generation([["what", "?"]], [["what", "?"]])
        d = report.to_json_dict()
        assert d["rouge_l_beta"] == ROUGE_L_BETA == 1.0
        assert d["meteor_label"] == METEOR_LABEL == "METEOR-ex"
        assert d["bleu_1"] == 1.0
        assert set(d["iw_table"].keys()) == {c.name for c in IWClass}

    def test_metric_columns_flat(self):
        report = evaluate_generation([["a"]], [["a"]])
        cols = report.metric_columns()
        assert [name for name, _ in cols] == [
            "bleu_1", "bleu_2", "bleu_3", "bleu_4",
            "rouge_l", "meteor_variant", "total_iw_recall",
        ]
