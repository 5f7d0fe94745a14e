import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlstc.errors import DomainError, InsufficientDataError, NumericalError
from mlstc.kernels import eigh, estimate_covariance, log_q_function, q_function, ternary_entropy


def normal_tail(x):
    # independent oracle: high-precision numerical integration of the normal density
    mpmath.mp.dps = 30
    return float(mpmath.quad(lambda t: mpmath.exp(-t * t / 2) / mpmath.sqrt(2 * mpmath.pi), [x, mpmath.inf]))


class TestQFunction:
    def test_zero(self):
        assert q_function(0.0) == 0.5

    def test_far_tail_is_tiny_and_finite(self):
        v = q_function(40.0)
        assert 0.0 <= v < 1e-300
        assert not math.isnan(v)

    def test_five_percent_point(self):
        assert q_function(1.6449) == pytest.approx(normal_tail(1.6449), abs=1e-12)
        assert q_function(1.6449) == pytest.approx(0.05, abs=1e-4)

    @pytest.mark.parametrize("x", [-5.0, -1.3, 0.25, 1.0, 2.5, 4.0, 7.5])
    def test_against_quadrature(self, x):
        assert q_function(x) == pytest.approx(normal_tail(x), abs=1e-12)

    def test_array_input(self):
        out = q_function(np.array([0.0, 1.0]))
        assert out.shape == (2,)

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(DomainError):
            q_function(bad)

    @given(st.floats(-8, 8))
    def test_symmetry(self, x):
        assert abs(q_function(x) + q_function(-x) - 1.0) <= 1e-12

    def test_log_q_matches_deep_tail(self):
        mpmath.mp.dps = 50
        ref = float(mpmath.log(mpmath.erfc(60 / mpmath.sqrt(2)) / 2))
        assert log_q_function(60.0) == pytest.approx(ref, rel=1e-10)


class TestTernaryEntropy:
    def test_examples(self):
        assert ternary_entropy(0.0) == 0.0
        assert ternary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
        assert ternary_entropy(0.25) == pytest.approx(1.5, abs=1e-15)

    def test_equiprobable_is_log3(self):
        assert ternary_entropy(1 / 3) == pytest.approx(math.log2(3), abs=1e-12)

    @pytest.mark.parametrize("bad", [-0.01, 0.51, np.nan])
    def test_out_of_range(self, bad):
        with pytest.raises(DomainError):
            ternary_entropy(bad)

    @given(st.floats(0, 0.5), st.floats(0, 0.5))
    def test_concave(self, a, b):
        mid = ternary_entropy((a + b) / 2)
        assert mid >= (ternary_entropy(a) + ternary_entropy(b)) / 2 - 1e-12


class TestCovariance:
    def test_two_columns(self):
        C = estimate_covariance(np.array([[1.0, -1.0], [0.0, 0.0]]))
        np.testing.assert_allclose(C, [[1.0, 0.0], [0.0, 0.0]])

    def test_repeated_column_is_zero(self):
        col = np.array([[3.0], [-2.0], [1.0]])
        np.testing.assert_array_equal(estimate_covariance(np.repeat(col, 5, axis=1)), np.zeros((3, 3)))

    def test_law_of_large_numbers(self, rng):
        C = estimate_covariance(rng.standard_normal((4, 100_000)))
        assert np.max(np.abs(C - np.eye(4))) < 0.05

    def test_single_column_rejected(self):
        with pytest.raises(InsufficientDataError):
            estimate_covariance(np.ones((3, 1)))

    def test_psd(self, rng):
        C = estimate_covariance(rng.standard_normal((20, 10)))  # rank deficient
        assert eigh(C).eigenvalues.min() >= -1e-9

    def test_uncentred_second_moment(self):
        data = np.array([[1.0, 3.0]])
        assert estimate_covariance(data, center=False)[0, 0] == pytest.approx(5.0)


class TestEigh:
    def test_identity(self):
        s = eigh(np.eye(4))
        np.testing.assert_allclose(s.eigenvalues, 1.0)
        P = np.abs(s.eigenvectors)
        np.testing.assert_allclose(np.sort(P, axis=0)[-1], 1.0)  # a permutation of the identity
        assert np.all(s.eigenvectors >= 0)

    def test_diagonal(self):
        s = eigh(np.diag([1.0, 4.0]))
        np.testing.assert_allclose(s.eigenvalues, [4.0, 1.0])
        np.testing.assert_allclose(s.eigenvectors, [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)

    def test_ar1_two_by_two(self):
        s = eigh(np.array([[1.0, 0.5], [0.5, 1.0]]))
        np.testing.assert_allclose(s.eigenvalues, [1.5, 0.5], atol=1e-14)

    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError):
            eigh(np.array([[1.0, 0.2], [0.0, 1.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            eigh(np.ones((2, 3)))

    def test_non_convergence_reported(self, rng):
        M = rng.standard_normal((30, 30))
        with pytest.raises(NumericalError):
            eigh(M + M.T, max_sweeps=1)

    def test_negative_eigenvalues_clamped(self):
        s = eigh(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(s.eigenvalues, [1.0, 0.0])

    def test_matches_lapack(self, rng):
        M = rng.standard_normal((40, 40))
        C = M @ M.T
        a, b = eigh(C), eigh(C, method="lapack")
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(a.eigenvectors, b.eigenvectors, atol=1e-7)

    def test_deterministic(self, rng):
        M = rng.standard_normal((25, 25))
        C = M + M.T
        np.testing.assert_array_equal(eigh(C).eigenvectors, eigh(C).eigenvectors)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 24), st.integers(0, 2**32 - 1))
    def test_invariants_random_symmetric(self, n, seed):
        r = np.random.Generator(np.random.Philox(seed))
        M = r.standard_normal((n, n))
        C = M @ M.T
        s = eigh(C)
        V = s.eigenvectors
        assert np.max(np.abs(V.T @ V - np.eye(n))) <= 1e-8
        assert np.max(np.abs(s.reconstruct() - C)) <= 1e-7 * np.max(np.abs(C))
        assert np.all(np.diff(s.eigenvalues) <= 0)
        assert np.all(s.eigenvalues >= 0)
        lead = V[np.argmax(np.abs(V), axis=0), np.arange(n)]
        assert np.all(lead >= 0)
