import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from numsense import numcore as nc
from numsense.binning import DistanceKind
from numsense.errors import BatchTooSmallError, LengthMismatchError, NonFiniteError, ShapeMismatchError
from numsense.losses import (
    compute_lambda,
    degenerate_rows,
    fcrc,
    infonce,
    regression_loss,
    total_loss,
)

KINDS = list(DistanceKind)
label_batches = arrays(
    np.float64,
    st.integers(2, 12),
    elements=st.floats(0, 100, allow_nan=False).map(lambda v: round(v, 1)),
)


def _offdiag_mean(lam):
    m = lam.shape[0]
    return (lam.sum(axis=1) - np.diag(lam)) / (m - 1)


def _random_unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _reference_fcrc(sims, lam):
    # direct loop over anchors, no graph machinery
    m = sims.shape[0]
    total = 0.0
    for i in range(m):
        f = np.exp(sims[i])
        denom = f[i] + sum(lam[i, j] * f[j] for j in range(m) if j != i)
        total += -math.log(f[i] / denom)
    return total / m


class TestComputeLambda:
    def test_worked_example(self):
        lam = compute_lambda([20, 30, 40, 60], "absolute", beta=1.0)
        d = np.array([10.0, 20.0, 40.0])
        expected = d / d.mean()
        np.testing.assert_allclose(lam[0, 1:], expected, rtol=1e-14)
        np.testing.assert_allclose(lam[0, 1:], [0.428571, 0.857143, 1.714286], atol=5e-7)

    def test_equidistant_negatives(self):
        lam = compute_lambda([10, 5, 15], "absolute")
        np.testing.assert_allclose(lam[0, 1:], [1.0, 1.0])

    def test_all_equal_labels_fall_back_to_ones(self):
        lam = compute_lambda([7, 7, 7, 7], "squared")
        off = ~np.eye(4, dtype=bool)
        np.testing.assert_array_equal(lam[off], 1.0)

    def test_fallback_can_be_disabled(self):
        with pytest.raises(ValueError):
            compute_lambda([7, 7, 7], fallback=False)

    def test_batch_too_small(self):
        with pytest.raises(BatchTooSmallError):
            compute_lambda([1.0])

    def test_same_label_negative_gets_zero(self):
        lam = compute_lambda([20, 20, 50, 60], "absolute")
        assert lam[0, 1] == 0.0
        assert lam[1, 0] == 0.0
        np.testing.assert_allclose(_offdiag_mean(lam), 1.0, atol=1e-12)

    def test_degenerate_rows(self):
        np.testing.assert_array_equal(degenerate_rows([3, 3, 4]), [False, False, False])
        np.testing.assert_array_equal(degenerate_rows([3, 3]), [True, True])

    @settings(max_examples=200)
    @given(label_batches, st.sampled_from(KINDS), st.floats(1e-3, 1e3))
    def test_row_mean_is_one(self, labels, kind, beta):
        for mode in ("mean", "exp"):
            lam = compute_lambda(labels, kind, beta, mode=mode)
            assert np.all(lam >= 0)
            keep = ~degenerate_rows(labels, kind) if mode == "mean" else slice(None)
            np.testing.assert_allclose(_offdiag_mean(lam)[keep], 1.0, atol=1e-9)

    @settings(max_examples=200)
    @given(label_batches, st.sampled_from(KINDS), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_beta_cancels_under_mean_normalization(self, labels, kind, b1, b2):
        np.testing.assert_allclose(
            compute_lambda(labels, kind, b1), compute_lambda(labels, kind, b2), atol=1e-12, rtol=0
        )

    @settings(max_examples=200)
    @given(label_batches, st.sampled_from(KINDS), st.sampled_from(["mean", "exp"]))
    def test_monotone_in_distance_within_row(self, labels, kind, mode):
        lam = compute_lambda(labels, kind, 0.1, mode=mode)
        y = np.asarray(labels)
        for i in range(y.size):
            others = [j for j in range(y.size) if j != i]
            order = sorted(others, key=lambda j: abs(y[i] - y[j]))
            vals = lam[i, order]
            assert np.all(np.diff(vals) >= -1e-12)

    def test_exp_mode_depends_on_beta(self):
        labels = [20, 30, 40, 60]
        assert not np.allclose(compute_lambda(labels, mode="exp", beta=0.01), compute_lambda(labels, mode="exp", beta=0.1))


class TestFcrc:
    def test_uniform_weights_reduce_to_infonce(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = rng.normal(size=(6, 6)) * 5
            for direction in ("image", "text"):
                a = fcrc(s, np.ones((6, 6)), direction).item()
                b = infonce(s, direction).item()
                assert abs(a - b) < 1e-12

    def test_two_sample_closed_form(self):
        z = np.eye(2)
        sims = z @ z.T  # cos = 1 on the diagonal, 0 off it, tau = 1
        expected = -math.log(math.e / (math.e + 1.0))
        assert abs(expected - 0.313262) < 1e-6
        assert abs(infonce(sims).item() - expected) < 1e-15
        assert abs(fcrc(sims, np.ones((2, 2)), "text").item() - expected) < 1e-15

    def test_matches_reference_loop(self):
        rng = np.random.default_rng(1)
        labels = rng.uniform(0, 50, size=7)
        lam = compute_lambda(labels)
        sims = rng.normal(size=(7, 7)) * 3
        assert abs(fcrc(sims, lam).item() - _reference_fcrc(sims, lam)) < 1e-12
        assert abs(fcrc(sims, lam, "text").item() - _reference_fcrc(sims.T, lam)) < 1e-12

    def test_large_logits_are_stable(self):
        sims = np.array([[300.0, 0.0], [0.0, 300.0]])
        assert fcrc(sims, np.ones((2, 2))).item() >= 0.0

    def test_single_pair_infonce_is_zero(self):
        assert infonce(np.array([[0.3]])).item() == 0.0

    @given(arrays(np.float64, (5, 5), elements=st.floats(-20, 20)))
    def test_infonce_non_negative(self, sims):
        assert infonce(sims).item() >= 0.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        labels = rng.uniform(0, 50, size=8)
        sims = rng.normal(size=(8, 8))
        perm = rng.permutation(8)
        base = fcrc(sims, compute_lambda(labels)).item()
        permuted = fcrc(sims[np.ix_(perm, perm)], compute_lambda(labels[perm])).item()
        assert abs(base - permuted) < 1e-12

    def test_gradient(self):
        rng = np.random.default_rng(3)
        z, w = rng.normal(size=(6, 8)), rng.normal(size=(6, 8))
        lam = compute_lambda(rng.uniform(16, 77, size=6))

        def build(z, w):
            s = nc.scale(nc.matmul(nc.l2_normalize_rows(z), nc.transpose(nc.l2_normalize_rows(w))), 1 / 0.07)
            return nc.add(fcrc(s, lam, "image"), fcrc(s, lam, "text"))

        assert nc.gradient_check(build, [z, w], tolerance=1e-5).passed

    def test_errors(self):
        with pytest.raises(ShapeMismatchError):
            fcrc(np.zeros((2, 3)), np.ones((2, 3)))
        with pytest.raises(ShapeMismatchError):
            fcrc(np.zeros((3, 3)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            fcrc(np.zeros((2, 2)), np.ones((2, 2)), "sideways")

    def test_non_finite_similarity(self):
        node = nc.DiffNode(np.array([[0.0, np.inf], [0.0, 0.0]]))
        with pytest.raises(NonFiniteError):
            fcrc(node, np.ones((2, 2)))


class TestRegressionLoss:
    def test_identity(self):
        assert regression_loss(np.array([[1.0], [2.0]]), [1.0, 2.0]).item() == 0.0

    def test_hand_computed(self):
        assert regression_loss(np.array([[1.0], [3.0]]), [2.0, 2.0]).item() == 1.0

    def test_subgradient(self):
        pred = nc.leaf([[1.0], [3.0], [2.0], [5.0]])
        nc.backward(regression_loss(pred, [2.0, 2.0, 2.0, 1.0]))
        np.testing.assert_array_equal(pred.grad[:, 0], [-0.25, 0.25, 0.0, 0.25])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            regression_loss(np.zeros((3, 1)), [1.0, 2.0])


class TestTotalLoss:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.z = _random_unit_rows(rng, 6, 4)
        self.w = _random_unit_rows(rng, 6, 4)
        self.y = rng.uniform(16, 77, size=6)
        self.lam = compute_lambda(self.y)

    def test_regression_weight_is_one(self):
        pred = (self.y + np.array([1.0, -2.0, 0.5, 0.0, 3.0, -1.0])).reshape(-1, 1)
        b, node = total_loss(self.z, self.w, self.lam, self.lam, pred, self.y, 0.07)
        assert node.item() == b.total
        assert abs((b.total - b.contrastive) - b.regression) < 1e-12
        assert abs(b.regression - 7.5 / 6) < 1e-12
        assert min(b.fcrc_i2t, b.fcrc_t2i, b.regression) >= 0

    def test_zero_regression_error(self):
        b, _ = total_loss(self.z, self.w, self.lam, self.lam, self.y.reshape(-1, 1), self.y, 0.07)
        assert b.regression == 0.0
        assert b.total == b.contrastive

    def test_inconsistent_batch(self):
        with pytest.raises(ShapeMismatchError):
            total_loss(self.z, self.w[:5], self.lam, self.lam, self.y.reshape(-1, 1), self.y, 0.07)
