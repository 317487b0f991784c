import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from randsel.errors import DegenerateDataError, DegenerateKernelError, InvalidDataError, InvalidParameterError
from randsel.kernelcore import (
    BandwidthSpec,
    alignment,
    center,
    centered_label_alignment,
    centered_norm_sq,
    gaussian_kernel,
    label_kernel,
    median_heuristic,
)


def naive_center(K):
    m = K.shape[0]
    H = np.eye(m) - np.ones((m, m)) / m
    return H @ K @ H


def naive_alignment(A, B):
    m = A.shape[0]
    inner = na = nb = 0.0
    for i in range(m):
        for j in range(m):
            inner += A[i, j] * B[i, j]
            na += A[i, j] ** 2
            nb += B[i, j] ** 2
    return inner / math.sqrt(na * nb)


def random_symmetric(rng, m):
    A = rng.standard_normal((m, m))
    return A + A.T


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


class TestGaussianKernel:
    def test_unit_diagonal(self):
        X = np.random.default_rng(0).standard_normal((7, 3)) * 10
        K = gaussian_kernel(X, 0.3).values
        assert np.all(np.diag(K) == 1.0)

    def test_hand_value(self):
        K = gaussian_kernel([[0.0, 0.0], [1.0, 1.0]], 0.5).values
        assert K[0, 1] == pytest.approx(0.367879441, abs=1e-9)

    def test_tiny_gamma_is_all_ones(self):
        X = np.random.default_rng(1).standard_normal((5, 4))
        np.testing.assert_allclose(gaussian_kernel(X, 1e-300).values, 1.0, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.tuples(st.integers(2, 8), st.integers(1, 4)), elements=finite),
           st.floats(1e-3, 10))
    def test_symmetric_and_bounded(self, X, gamma):
        K = gaussian_kernel(X, gamma).values
        assert np.array_equal(K, K.T)
        assert np.all(K <= 1.0) and np.all(K >= 0.0)

    def test_rejects_bad_input(self):
        with pytest.raises(InvalidDataError):
            gaussian_kernel([[0.0], [np.nan]], 1.0)
        with pytest.raises(InvalidParameterError):
            gaussian_kernel([[0.0], [1.0]], 0.0)
        with pytest.raises(InvalidParameterError):
            gaussian_kernel([[0.0], [1.0]], -1.0)


class TestLabelKernel:
    @pytest.mark.parametrize(
        "y, expected",
        [
            ([1, 1], [[1, 1], [1, 1]]),
            ([1, -1], [[1, -1], [-1, 1]]),
            ([1, -1, -1], [[1, -1, -1], [-1, 1, 1], [-1, 1, 1]]),
        ],
    )
    def test_sign_products(self, y, expected):
        np.testing.assert_array_equal(label_kernel(y).values, expected)

    def test_rejects_other_labels(self):
        with pytest.raises(InvalidDataError):
            label_kernel([1, 0, -1])


class TestCenter:
    def test_constant_kernel_vanishes(self):
        C = center(np.ones((4, 4)))
        np.testing.assert_allclose(C.values, 0.0, atol=1e-15)

    def test_identity_2x2(self):
        np.testing.assert_allclose(center(np.eye(2)).values, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)

    def test_idempotent(self):
        K = random_symmetric(np.random.default_rng(2), 5)
        C1 = center(K)
        np.testing.assert_allclose(center(C1).values, C1.values, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 10_000))
    def test_matches_projection_and_annihilates(self, m, seed):
        rng = np.random.default_rng(seed)
        K = random_symmetric(rng, m) * rng.uniform(0.1, 100)
        C = center(K).values
        np.testing.assert_allclose(C, naive_center(K), atol=1e-10 * np.abs(K).max())
        assert np.all(np.abs(C.sum(axis=1)) < 1e-9 * m * np.abs(K).max())
        assert np.all(np.abs(C.sum(axis=0)) < 1e-9 * m * np.abs(K).max())
        np.testing.assert_allclose(C, C.T, atol=1e-12 * np.abs(K).max())

    def test_caches_frobenius_norm(self):
        K = random_symmetric(np.random.default_rng(3), 6)
        C = center(K)
        assert C.frobenius_norm == pytest.approx(np.linalg.norm(naive_center(K)), rel=1e-12)

    def test_closed_form_norm(self):
        rng = np.random.default_rng(4)
        K = random_symmetric(rng, 9)
        assert centered_norm_sq(K) == pytest.approx(np.sum(naive_center(K) ** 2), rel=1e-10)


class TestAlignment:
    def test_self_and_negation(self):
        C = center(random_symmetric(np.random.default_rng(5), 6))
        assert alignment(C, C) == pytest.approx(1.0, abs=1e-12)
        assert alignment(C, C.scaled(-1.0)) == pytest.approx(-1.0, abs=1e-12)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(6)
        A = center(random_symmetric(rng, 6))
        B = center(random_symmetric(rng, 6))
        assert alignment(A, B) == pytest.approx(naive_alignment(A.values, B.values), abs=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 10_000), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_bounded_symmetric_scale_free(self, m, seed, alpha, beta):
        rng = np.random.default_rng(seed)
        A = center(random_symmetric(rng, m))
        B = center(random_symmetric(rng, m))
        a = alignment(A, B)
        assert -1 - 1e-12 <= a <= 1 + 1e-12
        assert alignment(B, A) == pytest.approx(a, abs=1e-12)
        assert alignment(A.scaled(alpha), B.scaled(beta)) == pytest.approx(a, abs=1e-12)

    def test_degenerate_kernels(self):
        C = center(random_symmetric(np.random.default_rng(7), 4))
        Z = center(np.ones((4, 4)))
        with pytest.raises(DegenerateKernelError):
            alignment(Z, C)
        with pytest.raises(DegenerateKernelError):
            alignment(C, center(label_kernel([1, 1, 1, 1])))

    def test_size_mismatch(self):
        rng = np.random.default_rng(8)
        with pytest.raises(InvalidDataError):
            alignment(center(random_symmetric(rng, 3)), center(random_symmetric(rng, 4)))

    def test_closed_form_label_alignment(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((11, 3))
        y = rng.choice([-1.0, 1.0], 11)
        K = gaussian_kernel(X, 0.4)
        ref = naive_alignment(naive_center(K.values), naive_center(np.outer(y, y)))
        assert float(centered_label_alignment(K.values, y)) == pytest.approx(ref, abs=1e-12)


class TestMedianHeuristic:
    def test_one_pair(self):
        assert median_heuristic([[0.0], [2.0]]) == pytest.approx(0.25)

    def test_three_points(self):
        assert median_heuristic([[0.0], [1.0], [3.0]]) == pytest.approx(0.25)

    def test_identical_rows(self):
        with pytest.raises(DegenerateDataError):
            median_heuristic(np.ones((5, 2)))

    def test_large_sample_is_deterministic(self):
        X = np.random.default_rng(10).standard_normal((600, 3))
        g1, g2 = median_heuristic(X), median_heuristic(X)
        assert g1 == g2
        # subsampled pairs stay close to the exact median
        iu = np.triu_indices(600, 1)
        d = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)[iu]
        assert g1 == pytest.approx(1.0 / np.median(d), rel=0.02)

    def test_bandwidth_spec(self):
        with pytest.raises(InvalidParameterError):
            BandwidthSpec.fixed(0.0)
        with pytest.raises(InvalidParameterError):
            BandwidthSpec("median", 1.0)
        D = np.array([[0.0, 4.0], [4.0, 0.0]])
        assert BandwidthSpec.median().resolve(D) == 0.25
        assert BandwidthSpec.fixed(2.0).resolve(D) == 2.0


class TestLinearKernelIdentity:
    """sqrt(mean_ij y_i y_j <x_i, x_j>) equals ||mean_i y_i x_i|| for any sample."""

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 50), st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_identity(self, m, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((m, d)) * rng.uniform(0.1, 5)
        y = rng.choice([-1.0, 1.0], m)
        lhs = math.sqrt(max(np.mean(np.outer(y, y) * (X @ X.T)), 0.0))
        rhs = np.linalg.norm((y[:, None] * X).mean(axis=0))
        assert lhs == pytest.approx(rhs, abs=1e-10)
