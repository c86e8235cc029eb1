"""Mixup, loss, training-loop, and grid-search tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calrex import training as tr
from calrex.synthetic import sample_sentences
from conftest import numerical_gradient, relative_error

LN6 = math.log(6.0)


def _one_hot(i, n=6):
    v = np.zeros(n)
    v[i] = 1.0
    return v


class TestMixupPair:
    def test_lambda_one_reproduces_first_source(self):
        rng = np.random.default_rng(0)
        fi, fj = rng.normal(size=8), rng.normal(size=8)
        mixed = tr.mixup_pair(fi, _one_hot(2), fj, _one_hot(5), 1.0)
        np.testing.assert_array_equal(mixed.feature, fi)
        np.testing.assert_array_equal(mixed.label, _one_hot(2))

    def test_lambda_zero_reproduces_second_source(self):
        rng = np.random.default_rng(1)
        fi, fj = rng.normal(size=8), rng.normal(size=8)
        mixed = tr.mixup_pair(fi, _one_hot(2), fj, _one_hot(5), 0.0)
        np.testing.assert_array_equal(mixed.feature, fj)
        np.testing.assert_array_equal(mixed.label, _one_hot(5))

    def test_seven_tenths_mix_of_one_hots(self):
        mixed = tr.mixup_pair(np.ones(4), _one_hot(2), np.zeros(4), _one_hot(5), 0.7)
        assert mixed.label[2] == pytest.approx(0.7)
        assert mixed.label[5] == pytest.approx(0.3)
        assert mixed.label.sum() == pytest.approx(1.0, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(tr.DimensionMismatch):
            tr.mixup_pair(np.ones(3), _one_hot(0), np.ones(4), _one_hot(1), 0.5)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError):
            tr.mixup_pair(np.ones(3), _one_hot(0), np.ones(3), _one_hot(1), 1.5)

    @given(
        lam=st.floats(min_value=0.0, max_value=1.0),
        i=st.integers(min_value=0, max_value=5),
        j=st.integers(min_value=0, max_value=5),
    )
    @settings(max_examples=100, deadline=None)
    def test_convexity_and_mass_conservation(self, lam, i, j):
        mixed = tr.mixup_pair(np.zeros(2), _one_hot(i), np.ones(2), _one_hot(j), lam)
        lo = np.minimum(_one_hot(i), _one_hot(j))
        hi = np.maximum(_one_hot(i), _one_hot(j))
        assert np.all(mixed.label >= lo - 1e-12)
        assert np.all(mixed.label <= hi + 1e-12)
        assert mixed.label.sum() == pytest.approx(1.0, abs=1e-9)


class TestSoftmaxForward:
    def test_zero_head_gives_uniform(self):
        head = tr.ClassifierHead(weight=np.zeros((6, 4)), bias=np.zeros(6))
        probs = tr.softmax_forward(np.ones(4), head)
        np.testing.assert_allclose(probs, np.full(6, 1 / 6), atol=1e-15)

    def test_shift_invariance(self):
        logits = np.array([3.0, -1.0, 0.5, 2.0])
        np.testing.assert_allclose(tr.softmax(logits), tr.softmax(logits + 17.3), atol=1e-12)

    def test_exact_formula(self):
        logits = np.array([2.0, 1.0, 0.0, 0.0, 0.0, 0.0])
        want = np.exp(logits) / np.exp(logits).sum()
        np.testing.assert_allclose(tr.softmax(logits), want, atol=1e-15)

    def test_extreme_logits_stay_finite(self):
        probs = tr.softmax(np.array([1e4, 0.0, -1e4]))
        assert np.all(np.isfinite(probs))
        assert probs.sum() == pytest.approx(1.0)


class TestEntropy:
    def test_one_hot_is_zero(self):
        assert tr.entropy(_one_hot(3)) == 0.0

    def test_uniform_is_log_c(self):
        assert tr.entropy(np.full(6, 1 / 6)) == pytest.approx(LN6, abs=1e-12)

    def test_two_point_uniform(self):
        assert tr.entropy(np.array([0.5, 0.5, 0, 0, 0, 0])) == pytest.approx(
            math.log(2.0), abs=1e-12
        )

    @given(st.lists(st.floats(min_value=1e-6, max_value=1.0), min_size=2, max_size=8))
    @settings(max_examples=80, deadline=None)
    def test_bounds(self, raw):
        p = np.array(raw) / sum(raw)
        h = tr.entropy(p)
        assert -1e-12 <= h <= math.log(len(p)) + 1e-12


class TestLoss:
    def test_perfect_prediction_zero_loss(self):
        p = _one_hot(1)
        assert tr.loss(p, p, beta=0.0) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_vs_one_hot_is_log_c(self):
        assert tr.loss(np.full(6, 1 / 6), _one_hot(0), beta=0.0) == pytest.approx(
            LN6, abs=1e-12
        )

    def test_uniform_with_penalty(self):
        got = tr.loss(np.full(6, 1 / 6), _one_hot(0), beta=0.3)
        assert got == pytest.approx(0.7 * LN6, abs=1e-12)

    @given(
        beta=st.floats(min_value=0.0, max_value=2.0),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_decomposition(self, beta, seed):
        rng = np.random.default_rng(seed)
        p = tr.softmax(rng.normal(size=(3, 6)))
        t = tr.softmax(rng.normal(size=(3, 6)))
        lhs = tr.loss(p, t, beta)
        rhs = tr.loss(p, t, 0.0) - beta * float(np.mean(tr.entropy(p)))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_monotone_in_beta_when_entropy_positive(self):
        rng = np.random.default_rng(4)
        p = tr.softmax(rng.normal(size=6))
        t = _one_hot(2)
        losses = [tr.loss(p, t, b) for b in (0.0, 0.1, 0.3, 0.5, 1.0)]
        assert all(a > b for a, b in zip(losses, losses[1:]))


class TestLossBackward:
    def test_zero_at_minimum(self):
        p = _one_hot(2)
        grad = tr.loss_backward(p, p, beta=0.0)
        np.testing.assert_allclose(grad, np.zeros(6), atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            logits = rng.normal(size=(3, 6))
            targets = tr.softmax(rng.normal(size=(3, 6)))
            beta = float(rng.uniform(0, 0.6))
            grad = tr.loss_backward(tr.softmax(logits), targets, beta)

            def scalar():
                return tr.loss(tr.softmax(logits), targets, beta)

            num = numerical_gradient(scalar, logits, h=1e-4)
            assert relative_error(grad, num) < 1e-4

    def test_beta_linearity(self):
        rng = np.random.default_rng(10)
        p = tr.softmax(rng.normal(size=(4, 6)))
        t = tr.softmax(rng.normal(size=(4, 6)))
        g0 = tr.loss_backward(p, t, 0.0)
        g1 = tr.loss_backward(p, t, 1.0)
        for beta in (0.1, 0.3, 0.7):
            want = g0 + beta * (g1 - g0)
            np.testing.assert_allclose(tr.loss_backward(p, t, beta), want, atol=1e-12)


def _separable_set():
    texts_a = [f"alpha alpha marker{i % 5} ." for i in range(40)]
    texts_b = [f"omega omega marker{i % 5} ." for i in range(40)]
    return texts_a + texts_b, ["CPR:3"] * 40 + ["false"] * 40


class TestFit:
    def test_separable_convergence(self):
        texts, labels = _separable_set()
        clf = tr.MixupPenaltyClassifier(
            dim=8, hidden_dim=12, epochs=50, mix_per_example=0, beta=0.0,
            batch_size=16, learning_rate=0.3, seed=0,
        )
        clf.fit(texts, labels)
        assert clf.score(texts, labels) >= 0.99

    def test_fixed_seed_reproducibility(self):
        texts, labels = sample_sentences(120, seed=5)
        kwargs = dict(dim=8, hidden_dim=12, epochs=3, mix_per_example=2,
                      beta=0.3, batch_size=16, learning_rate=0.2, seed=7)
        a = tr.MixupPenaltyClassifier(**kwargs).fit(texts, labels)
        b = tr.MixupPenaltyClassifier(**kwargs).fit(texts, labels)
        for name, tensor in a.params_.tensors().items():
            np.testing.assert_array_equal(tensor, b.params_.tensors()[name])
        np.testing.assert_array_equal(a.head_.weight, b.head_.weight)
        assert a.log_ == b.log_

    def test_non_finite_loss_reports_batch(self):
        texts, labels = sample_sentences(60, seed=2)
        clf = tr.MixupPenaltyClassifier(
            dim=8, hidden_dim=12, epochs=2, mix_per_example=0,
            batch_size=16, learning_rate=1e200, seed=0,
        )
        with np.errstate(all="ignore"):
            with pytest.raises(tr.NonFiniteLoss) as err:
                clf.fit(texts, labels)
        assert err.value.batch_index >= 0

    def test_penalty_raises_output_entropy(self):
        texts = ["alpha signal .", "omega noise ."]
        labels = ["CPR:3", "false"]
        base = tr.MixupPenaltyClassifier(
            dim=8, hidden_dim=12, epochs=60, mix_per_example=0, beta=0.0,
            batch_size=2, learning_rate=0.3, seed=1,
        ).fit(texts, labels)
        penalized = tr.MixupPenaltyClassifier(
            dim=8, hidden_dim=12, epochs=60, mix_per_example=0, beta=2.0,
            batch_size=2, learning_rate=0.3, seed=1,
        ).fit(texts, labels)
        h_base = float(np.mean(tr.entropy(base.predict_proba(texts))))
        h_pen = float(np.mean(tr.entropy(penalized.predict_proba(texts))))
        assert h_pen > h_base

    def test_dev_log_fields(self):
        texts, labels = sample_sentences(80, seed=3)
        clf = tr.MixupPenaltyClassifier(
            dim=8, hidden_dim=12, epochs=2, mix_per_example=0,
            batch_size=16, learning_rate=0.2, seed=0,
        )
        clf.fit(texts, labels, dev=(texts[:30], labels[:30]))
        assert {"epoch", "loss", "dev_accuracy", "dev_ece"} <= set(clf.log_[0])

    def test_get_params_round_trip(self):
        clf = tr.MixupPenaltyClassifier(beta=0.1, epochs=3)
        clone = tr.MixupPenaltyClassifier(**clf.get_params())
        assert clone.get_params() == clf.get_params()

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            tr.MixupPenaltyClassifier().fit([], [])


class TestTrainConfig:
    def test_from_mapping_coerces_and_filters(self):
        cfg = tr.TrainConfig.from_mapping(
            {"beta": "0.5", "epochs": "7", "workdir": "/tmp/x", "seed": 3}
        )
        assert cfg.beta == 0.5
        assert cfg.epochs == 7
        assert cfg.seed == 3

    def test_rejects_negative_beta(self):
        with pytest.raises(ValueError):
            tr.TrainConfig(beta=-0.1)


class TestGridSearch:
    def test_single_candidate_returned(self):
        texts, labels = sample_sentences(100, seed=8)
        cfg = tr.TrainConfig(dim=8, hidden_dim=12, epochs=2, mix_per_example=0,
                             batch_size=16, learning_rate=0.2, seed=0)
        best, rows = tr.grid_search_beta(
            (texts, labels), (texts[:40], labels[:40]), [0.3], cfg, replicates=1
        )
        assert best == 0.3
        assert len(rows) == 1
        assert {"f1_mean", "f1_var", "ece_mean", "oe_mean"} <= set(rows[0])

    def test_tie_breaks_toward_higher_f1(self):
        rows = [
            {"beta": 0.1, "ece_mean": 0.05, "f1_mean": 0.70},
            {"beta": 0.3, "ece_mean": 0.05, "f1_mean": 0.80},
            {"beta": 0.5, "ece_mean": 0.09, "f1_mean": 0.95},
        ]
        assert tr.select_best_row(rows)["beta"] == 0.3

    def test_lowest_ece_wins(self):
        rows = [
            {"beta": 0.1, "ece_mean": 0.02, "f1_mean": 0.70},
            {"beta": 0.5, "ece_mean": 0.09, "f1_mean": 0.95},
        ]
        assert tr.select_best_row(rows)["beta"] == 0.1
