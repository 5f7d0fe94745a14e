"""Scalar and matrix primitives: Gaussian tail, ternary entropy, covariance
estimation and a Jacobi eigensolver for symmetric matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import special

from .errors import DomainError, InsufficientDataError, NumericalError

__all__ = [
    "SymmetricSpectrum",
    "q_function",
    "log_q_function",
    "ternary_entropy",
    "estimate_covariance",
    "eigh",
]

# Eigenvalues below this fraction of the largest one are treated as exactly zero.
DEAD_EIGENVALUE_RTOL = 1e-12


def _require_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def q_function(x):
    """Standard normal upper tail probability ``P[Z > x]``.

    Evaluated as ``erfc(x / sqrt(2)) / 2`` (Cody's rational Chebyshev
    approximations inside :func:`scipy.special.erfc`), which keeps full
    relative precision in the upper tail instead of computing ``1 - Phi(x)``.
    Accepts scalars or arrays; far-tail values underflow to 0.0, never NaN.
    """
    arr = _require_finite(x)
    out = 0.5 * special.erfc(arr / math.sqrt(2.0))
    return _scalar_or_array(out, x)


def log_q_function(x):
    """Natural log of :func:`q_function`, finite far into the upper tail."""
    arr = _require_finite(x)
    out = special.log_ndtr(-arr)
    return _scalar_or_array(out, x)


def ternary_entropy(alpha):
    """Entropy in bits of a symmetric ternary symbol.

    ``alpha`` is the probability of each nonzero symbol, so the zero symbol
    has probability ``1 - 2*alpha``. Uses ``0 log 0 = 0``.
    """
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 0.5):
        raise DomainError("alpha must lie in [0, 0.5]")
    z = 1.0 - 2.0 * a
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(2.0 * special.xlogy(a, a) + special.xlogy(z, z)) / math.log(2.0)
    h = np.maximum(h, 0.0)
    return _scalar_or_array(h, alpha)


def estimate_covariance(data, center=True):
    """Sample covariance of the columns of an ``(n, N)`` matrix.

    Normalised by ``1/N``. With ``center=False`` the raw second-moment matrix
    ``data @ data.T / N`` is returned instead, which is what a quantizer sees
    when no mean is removed before projecting.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DomainError("data must be a 2-D (n, N) matrix")
    N = data.shape[1]
    if N < 2:
        raise InsufficientDataError(f"need at least 2 columns to estimate a covariance, got {N}")
    if center:
        data = data - data.mean(axis=1, keepdims=True)
    cov = data @ data.T / N
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class SymmetricSpectrum:
    """Eigen-pairs of a symmetric PSD matrix, sorted by decreasing eigenvalue.

    ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def live_mask(self) -> np.ndarray:
        """Coordinates carrying non-negligible variance."""
        top = self.eigenvalues[0] if self.n else 0.0
        return self.eigenvalues > DEAD_EIGENVALUE_RTOL * top

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


@njit(cache=True)
def _jacobi_sweeps(A, Vt, target, max_sweeps):
    """Row-cyclic Jacobi on ``A`` in place; ``Vt`` accumulates eigenvectors as rows.

    Returns the number of completed sweeps, or -1 without convergence.
    """
    n = A.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        if np.sqrt(off) <= target:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                app = A[p, p]
                aqq = A[q, q]
                # negligible against both diagonal entries: drop it (Numerical Recipes rule)
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    continue
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[p, k]
                    akq = A[q, k]
                    A[p, k] = c * akp - s * akq
                    A[q, k] = s * akp + c * akq
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                A[p, q] = 0.0
                A[q, p] = 0.0
                for k in range(n):
                    vkp = Vt[p, k]
                    vkq = Vt[q, k]
                    Vt[p, k] = c * vkp - s * vkq
                    Vt[q, k] = s * vkp + c * vkq
    return -1


def _jacobi(C, tol, max_sweeps):
    A = np.array(C, dtype=np.float64, order="C")
    Vt = np.eye(A.shape[0])
    target = tol * float(np.linalg.norm(C))
    sweeps = _jacobi_sweeps(A, Vt, target, max_sweeps)
    if sweeps < 0:
        raise NumericalError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    return np.diag(A).copy(), Vt.T.copy(), sweeps


def eigh(C, method="jacobi", tol=1e-12, max_sweeps=60) -> SymmetricSpectrum:
    """Eigendecomposition of a real symmetric matrix.

    The default ``method="jacobi"`` runs row-cyclic Jacobi rotations until
    the off-diagonal Frobenius mass is at most ``tol * ||C||_F``. ``method="lapack"`` delegates to
    :func:`numpy.linalg.eigh`; both paths share the same post-processing:
    eigenvalues sorted descending with negatives clamped to zero, and every
    eigenvector signed so that its largest-magnitude entry is non-negative.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise DomainError("matrix has non-finite entries")
    scale = float(np.max(np.abs(C))) if C.size else 0.0
    if C.size and float(np.max(np.abs(C - C.T))) > 1e-9 * max(scale, np.finfo(float).tiny):
        raise DomainError("matrix is not symmetric")
    C = 0.5 * (C + C.T)

    if method == "jacobi":
        w, V = _jacobi(C, tol, max_sweeps)[:2]
    elif method == "lapack":
        w, V = np.linalg.eigh(C)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")

    order = np.argsort(-w, kind="stable")
    w = np.maximum(w[order], 0.0)
    V = V[:, order]
    if V.size:
        lead = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
        V = V * np.where(lead < 0.0, -1.0, 1.0)
    return SymmetricSpectrum(eigenvalues=w, eigenvectors=V)
