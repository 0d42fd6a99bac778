"""Tests for the synthetic corpus generators and the bundled assets."""

import pytest

from qgkit.data import EntityType, IWClass, class_counts, label_interrogative_class, tokenize
from qgkit.synthetic import (
    ENTITY_FOR_CLASS,
    bundled_corpus,
    make_mini_corpus,
    make_separable_corpus,
    marker_token,
)


class TestMarkers:
    def test_pools_disjoint_across_classes(self):
        seen = set()
        for cls in IWClass:
            for k in range(8):
                for novel in (False, True):
                    m = marker_token(cls, k, novel)
                    assert m not in seen
                    seen.add(m)

    def test_novel_pool_disjoint_from_train(self):
        train = {marker_token(IWClass.Who, k) for k in range(8)}
        novel = {marker_token(IWClass.Who, k, novel=True) for k in range(8)}
        assert train.isdisjoint(novel)

    def test_index_bounds(self):
        with pytest.raises(ValueError):
            marker_token(IWClass.Who, 8)

    def test_single_token(self):
        assert tokenize(marker_token(IWClass.What, 0)) == [marker_token(IWClass.What, 0)]


class TestSeparableCorpus:
    def test_class_balance_and_labels(self):
        corpus = make_separable_corpus(6, seed=1)
        counts = class_counts(corpus)
        assert all(counts[c] == 6 for c in IWClass)
        for ex in corpus:
            assert label_interrogative_class(tokenize(ex.question)) == ex.iw_class

    def test_entity_mapping(self):
        corpus = make_separable_corpus(4, seed=2)
        for ex in corpus:
            assert ex.entity_type == ENTITY_FOR_CLASS[ex.iw_class]

    def test_answer_is_class_marker(self):
        corpus = make_separable_corpus(5, seed=3)
        for ex in corpus:
            prefixes = {marker_token(ex.iw_class, k) for k in range(8)}
            assert ex.answer_text in prefixes

    def test_novel_markers_unseen_in_train(self):
        train = make_separable_corpus(8, seed=4)
        novel = make_separable_corpus(8, seed=5, novel=True)
        train_tokens = {t for ex in train for t in tokenize(ex.passage)}
        novel_answers = {ex.answer_text for ex in novel}
        assert train_tokens.isdisjoint(novel_answers)

    def test_deterministic(self):
        a = make_separable_corpus(3, seed=7)
        b = make_separable_corpus(3, seed=7)
        assert a == b
        c = make_separable_corpus(3, seed=8)
        assert a != c

    def test_frame_passages_ambiguous_without_answer(self):
        # six frame classes share the template; stripped of the two
        # markers the token sequence is identical
        corpus = make_separable_corpus(4, seed=9)
        frames = set()
        for ex in corpus:
            if ex.iw_class in (IWClass.Why, IWClass.Others):
                continue
            toks = tokenize(ex.passage)
            frames.add(tuple(toks[:3] + toks[4:5] + toks[6:]))
        assert len(frames) == 1

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            make_separable_corpus(0, seed=0)


class TestMiniCorpus:
    def test_exact_mix(self):
        mini = make_mini_corpus(0)
        counts = class_counts(mini)
        assert len(mini) == 200
        assert counts[IWClass.What] == 56
        assert counts[IWClass.Why] == 9
        assert sum(counts.values()) == 200

    def test_deterministic(self):
        assert make_mini_corpus(3) == make_mini_corpus(3)

    def test_labels_total(self):
        for ex in make_mini_corpus(0):
            assert label_interrogative_class(tokenize(ex.question)) == ex.iw_class


class TestBundledAssets:
    def test_overfit10_loads_with_all_classes(self):
        corpus = bundled_corpus("overfit10")
        assert len(corpus) == 10
        counts = class_counts(corpus)
        assert all(counts[c] >= 1 for c in IWClass)

    def test_overfit10_entity_variety(self):
        types = {ex.entity_type for ex in bundled_corpus("overfit10")}
        assert EntityType.Person in types
        assert EntityType.DateTime in types
        assert EntityType.NONE in types

    def test_mini200_matches_generator(self):
        # the shipped file is frozen output of make_mini_corpus(0); this
        # guards against the two drifting apart
        assert bundled_corpus("mini200") == make_mini_corpus(0)
