import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyqg.corpus import Corpus
from storyqg.numcore import Tensor
from storyqg.typedist import (
    TypeDistribution,
    TypeHeadParams,
    TypePredictor,
    append_pseudo_label,
    ce_loss,
    combined_loss,
    kl_loss,
    predict_distribution,
    recover_counts,
    train_typedist,
)
from tests.conftest import TINY


class TestTypeDistribution:
    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            TypeDistribution(np.array([0.5, -0.1, 0.6]))

    def test_sum_must_be_one(self):
        with pytest.raises(ValueError, match="sums"):
            TypeDistribution(np.array([0.5, 0.4]))


class TestAppendPseudoLabel:
    @pytest.mark.parametrize("counts,expected", [
        ([2, 1, 0], [0.5, 0.25, 0.0, 0.25]),
        ([0, 0, 0], [0.0, 0.0, 0.0, 1.0]),
        ([3, 0, 1], [0.6, 0.0, 0.2, 0.2]),
    ])
    def test_examples(self, counts, expected):
        assert np.allclose(append_pseudo_label(counts).probs, expected, atol=1e-12)

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            append_pseudo_label([1, -1, 0])

    def test_sums_to_one_within_tolerance(self):
        for counts in ([5, 7, 2], [0, 1, 0], [20, 20, 20]):
            assert append_pseudo_label(counts).probs.sum() == pytest.approx(1.0, abs=1e-12)


class TestRecoverCounts:
    def test_examples(self):
        assert recover_counts(TypeDistribution(np.array([0.5, 0.25, 0.0, 0.25]))) == [2, 1, 0]
        assert recover_counts(TypeDistribution(np.array([0.4, 0.4, 0.2]))) == [2, 2]

    def test_no_pseudo_mass_rejected(self):
        with pytest.raises(ValueError, match="pseudo"):
            recover_counts(TypeDistribution(np.array([0.5, 0.5, 0.0])))

    def test_round_trip_exhaustive_small(self):
        for a in range(21):
            for b in range(21):
                for c in range(21):
                    counts = [a, b, c]
                    assert recover_counts(append_pseudo_label(counts)) == counts

    @given(st.lists(st.integers(0, 20), min_size=7, max_size=7))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_t7_randomized(self, counts):
        assert recover_counts(append_pseudo_label(counts)) == counts


class TestLosses:
    def test_kl_zero_for_identical(self):
        d = append_pseudo_label([2, 1, 0])
        assert kl_loss(d, d) == 0.0

    def test_kl_log2_case(self):
        assert kl_loss(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(
            np.log(2), abs=1e-12)

    def test_kl_matches_summation_oracle(self, rng):
        p = rng.dirichlet(np.ones(4))
        q = rng.dirichlet(np.ones(4))
        expected = sum(pi * np.log(pi / qi) for pi, qi in zip(p, q) if pi > 0)
        assert kl_loss(p, q) == pytest.approx(expected, abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_kl_nonnegative_and_zero_iff_equal(self, seed):
        r = np.random.default_rng(seed)
        p = r.dirichlet(np.ones(4))
        q = r.dirichlet(np.ones(4))
        assert kl_loss(p, q) >= -1e-12
        assert kl_loss(p, p) == pytest.approx(0.0, abs=1e-12)

    def test_ce_uniform_two_slots(self):
        assert ce_loss(0, np.array([0.5, 0.5])) == pytest.approx(0.6931, abs=1e-4)

    def test_ce_one_hot_is_zero(self):
        assert ce_loss(1, np.array([0.0, 1.0])) == pytest.approx(0.0, abs=1e-9)

    def test_ce_label_range_checked(self):
        with pytest.raises(ValueError, match="label"):
            ce_loss(5, np.array([0.5, 0.5]))

    def test_combined_examples(self):
        assert combined_loss(1.0, 2.0, 0.7) == pytest.approx(1.3)
        assert combined_loss(1.0, 2.0, 1.0) == 1.0
        assert combined_loss(1.0, 2.0, 0.0) == 2.0

    def test_combined_monotone_in_each_term(self):
        base = combined_loss(1.0, 1.0, 0.6)
        assert combined_loss(1.5, 1.0, 0.6) > base
        assert combined_loss(1.0, 1.5, 0.6) > base

    def test_gamma_validated(self):
        with pytest.raises(ValueError, match="gamma"):
            combined_loss(1.0, 1.0, 1.2)
        with pytest.raises(ValueError, match="gamma"):
            TypeHeadParams(W=Tensor(np.zeros((4, 3))), b=Tensor(np.zeros(4)), gamma=-0.1)


class TestPredictDistribution:
    def test_zero_params_uniform(self):
        head = TypeHeadParams(W=Tensor(np.zeros((4, 3))), b=Tensor(np.zeros(4)))
        d = predict_distribution(Tensor(np.ones(3)), head)
        assert np.allclose(d.probs, 0.25)

    def test_bias_gap_concentrates_mass(self):
        h = Tensor(np.zeros(3))
        masses = []
        for gap in (1.0, 3.0, 6.0):
            head = TypeHeadParams(W=Tensor(np.zeros((4, 3))),
                                  b=Tensor(np.array([gap, -gap, 0.0, 0.0])))
            masses.append(predict_distribution(h, head).probs[0])
        assert masses == sorted(masses)
        assert masses[-1] > 0.9

    def test_matches_softmax_oracle(self, rng):
        W = rng.normal(size=(4, 5))
        b = rng.normal(size=4)
        h = rng.normal(size=5)
        z = W @ h + b
        expected = np.exp(z - z.max())
        expected /= expected.sum()
        head = TypeHeadParams(W=Tensor(W), b=Tensor(b))
        assert np.allclose(predict_distribution(Tensor(h), head).probs, expected, atol=1e-12)


class TestTraining:
    def test_empty_corpus_rejected(self, vocab):
        model = TypePredictor(vocab, seed=0, config=TINY)
        with pytest.raises(ValueError, match="empty"):
            train_typedist(Corpus([]), model, epochs=1)

    def test_single_paragraph_kl_reaches_zero(self, train_corpus, vocab):
        corpus = Corpus(train_corpus.paragraphs[:1])
        model = TypePredictor(vocab, seed=1, config=TINY)
        log = train_typedist(corpus, model, epochs=120, lr=5e-3)
        assert log[-1]["mean_kl"] < 1e-3
        # decreasing trend after warmup
        assert log[-1]["mean_kl"] < log[10]["mean_kl"]

    @pytest.mark.parametrize("gamma", [0.0, 1.0])
    def test_gamma_boundary_values_still_converge(self, train_corpus, vocab, gamma):
        corpus = Corpus(train_corpus.paragraphs[:3])
        model = TypePredictor(vocab, seed=2, config=TINY, gamma=gamma)
        log = train_typedist(corpus, model, epochs=80, lr=5e-3)
        assert log[-1]["mean_loss"] < log[0]["mean_loss"]
        if gamma == 1.0:
            assert log[-1]["mean_kl"] < 0.05

    def test_save_load_round_trip(self, train_corpus, vocab, tmp_path):
        model = TypePredictor(vocab, seed=3, config=TINY)
        model.save(tmp_path / "td")
        again = TypePredictor.load(tmp_path / "td")
        p = train_corpus.paragraphs[0]
        from storyqg.graph import build_token_graph
        g = build_token_graph(p.tokens, p.dep_heads, p.dep_labels, p.edu_spans, p.edu_heads)
        assert np.array_equal(model.predict(p.tokens, g).probs,
                              again.predict(p.tokens, g).probs)
