"""Scalar ternary quantization of Gaussian coordinates.

A coordinate ``x ~ N(0, sigma^2)`` is mapped to ``beta * phi(x)`` where
``phi(x) = sign(x) * [|x| > lam]``. All functions broadcast over numpy arrays
so a whole spectrum can be handled in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError, InfeasibleRateError
from .kernels import log_q_function, q_function, ternary_entropy

__all__ = [
    "QuantizerDim",
    "ternarize",
    "distortion_per_dim",
    "optimal_beta",
    "grid_beta",
    "rate_per_dim",
    "activity",
    "mean_rate",
    "lambda_for_rate",
    "BETA_GRID_POINTS",
    "PEAK_RATIO",
]

BETA_GRID_POINTS = 4096
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Q^{-1}(1/3): the threshold/sigma ratio at which ternary entropy peaks at log2(3).
PEAK_RATIO = float(special.ndtri(2.0 / 3.0))


@dataclass(frozen=True)
class QuantizerDim:
    sigma: float
    lam: float
    beta: float

    def __post_init__(self):
        if self.sigma < 0 or self.lam < 0 or self.beta < 0:
            raise DomainError("sigma, lam and beta must be non-negative")

    @property
    def alpha(self) -> float:
        return float(activity(self.sigma, self.lam))

    @classmethod
    def optimal(cls, sigma, lam):
        return cls(sigma, lam, float(optimal_beta(sigma, lam)))


def ternarize(v, lam):
    """Element-wise ``sign(v) * [|v| > lam]`` as ``int8``."""
    if lam < 0:
        raise DomainError(f"threshold must be non-negative, got {lam}")
    v = np.asarray(v, dtype=float)
    out = np.sign(v).astype(np.int8)
    out[np.abs(v) <= lam] = 0
    return out


def _ratio(sigma, lam):
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(sigma > 0, lam / np.where(sigma > 0, sigma, 1.0), np.inf)
    return sigma, t


def activity(sigma, lam):
    """Probability of each nonzero symbol, ``Q(lam / sigma)``; 0 for dead dimensions."""
    sigma, t = _ratio(sigma, lam)
    live = sigma > 0
    alpha = np.zeros_like(sigma)
    alpha[live] = q_function(t[live])
    return float(alpha) if alpha.ndim == 0 else alpha


def distortion_per_dim(sigma, lam, beta):
    """Expected squared error ``E[(x - beta*phi(x))^2]`` for ``x ~ N(0, sigma^2)``."""
    sigma, t = _ratio(sigma, lam)
    beta = np.asarray(beta, dtype=float)
    live = sigma > 0
    ts = np.where(live, t, 0.0)
    d = sigma**2 + 2.0 * beta**2 * q_function(ts) - 4.0 * beta * sigma / _SQRT_2PI * np.exp(-0.5 * ts**2)
    d = np.where(live, np.maximum(d, 0.0), 0.0)
    return float(d) if d.ndim == 0 else d


def grid_beta(sigma, lam, points=BETA_GRID_POINTS):
    """Grid-search minimiser of :func:`distortion_per_dim` over ``[0, lam + 6 sigma]``.

    Returns ``(beta, step)``; broadcasting over ``sigma``.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    upper = lam + 6.0 * sigma
    frac = np.linspace(0.0, 1.0, points)
    grid = upper[:, None] * frac[None, :]
    d = distortion_per_dim(sigma[:, None], lam, grid)
    best = grid[np.arange(sigma.size), np.argmin(d, axis=1)]
    return best, upper / (points - 1)


def _stationary_beta(sigma, lam):
    # conditional mean E[x | x > lam] = sigma * pdf(t) / Q(t), evaluated in log space
    sigma, t = _ratio(sigma, lam)
    live = sigma > 0
    out = np.zeros_like(sigma)
    tl = t[live]
    out[live] = sigma[live] * np.exp(-0.5 * tl**2 - math.log(_SQRT_2PI) - log_q_function(tl))
    return out


def optimal_beta(sigma, lam):
    """Reconstruction magnitude minimising the per-dimension distortion.

    A 4096-point grid search locates the minimum; the stationary point of the
    distortion in ``beta`` then polishes it. The polished value is only kept
    if it lies within one grid step of the grid minimiser and does not do
    worse, otherwise the grid value is returned. Dead dimensions
    (``sigma == 0``) and thresholds whose activity underflows get 0.
    """
    scalar = np.ndim(sigma) == 0
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if np.any(sigma < 0) or lam < 0:
        raise DomainError("sigma and lam must be non-negative")
    coarse, step = grid_beta(sigma, lam)
    fine = _stationary_beta(sigma, lam)
    keep = (np.abs(fine - coarse) <= step) & (
        distortion_per_dim(sigma, lam, fine) <= distortion_per_dim(sigma, lam, coarse) + 1e-15
    )
    beta = np.where(keep, fine, coarse)
    beta[(sigma == 0) | (activity(sigma, lam) == 0)] = 0.0
    return float(beta[0]) if scalar else beta


def rate_per_dim(sigma, lam):
    """Ternary entropy in bits of the code symbol for one dimension."""
    return ternary_entropy(activity(sigma, lam))


def mean_rate(sigma, lam) -> float:
    """Analytic rate in bits/dim: average ternary entropy over all dimensions."""
    return float(np.mean(rate_per_dim(np.asarray(sigma, dtype=float), lam)))


def _rate_slope(sigma, lam):
    """d(mean_rate)/d(lam)."""
    sigma, t = _ratio(sigma, lam)
    live = sigma > 0
    alpha = activity(sigma, lam)
    a = alpha[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        dh = np.where(a > 0, 2.0 * np.log2((1.0 - 2.0 * a) / a), 0.0)
    dalpha = -np.exp(-0.5 * t[live] ** 2) / (_SQRT_2PI * sigma[live])
    return float(np.sum(dh * dalpha)) / sigma.size


def _peak(sigma):
    """Threshold maximising :func:`mean_rate` and the rate reached there.

    Every dimension peaks at ``PEAK_RATIO * sigma_i``, so the maximiser lies
    between the smallest and largest of those; it is located on a grid and
    refined by root-finding on the slope.
    """
    live = sigma[sigma > 0]
    lo, hi = PEAK_RATIO * float(live.min()), PEAK_RATIO * float(live.max())
    if hi - lo <= 1e-12 * hi:
        return hi, mean_rate(sigma, hi)
    grid = np.linspace(lo, hi, 257)
    rates = np.array([mean_rate(sigma, g) for g in grid])
    i = int(np.argmax(rates))
    best, best_rate = float(grid[i]), float(rates[i])
    for a, b in ((i - 1, i), (i, i + 1)):
        if a < 0 or b >= grid.size:
            continue
        sa, sb = _rate_slope(sigma, grid[a]), _rate_slope(sigma, grid[b])
        if sa > 0 > sb:
            root = optimize.brentq(lambda g: _rate_slope(sigma, g), grid[a], grid[b], xtol=1e-14 * hi)
            r = mean_rate(sigma, root)
            if r >= best_rate:
                best, best_rate = root, r
    return best, best_rate


def _bisect(sigma, target, lo, hi, increasing, tol=1e-10, max_iter=200):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = mean_rate(sigma, mid)
        if abs(r - target) <= tol or hi - lo <= 1e-15 * max(hi, 1.0):
            return mid
        if (r < target) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lambda_for_rate(variances, target_rate, branch="sparse"):
    """Shared threshold giving an analytic mean rate of ``target_rate`` bits/dim.

    The mean ternary entropy is not monotone in the threshold: it rises from
    the binary value at ``lam = 0`` to a peak near ``lam = 0.43 sigma`` and
    then decays to 0. ``branch="sparse"`` (default) searches thresholds above
    the peak, where codes get sparser as the rate drops; ``branch="dense"``
    searches ``[0, peak]``. Both use bisection; the search ends when the rate
    is within 1e-10 bits of the target.
    """
    variances = np.asarray(variances, dtype=float)
    if np.any(variances < 0):
        raise DomainError("variances must be non-negative")
    if not target_rate > 0:
        raise DomainError(f"target rate must be positive, got {target_rate}")
    if target_rate > math.log2(3.0) + 1e-12:
        raise InfeasibleRateError(f"ternary codes cannot exceed log2(3) bits/dim, asked {target_rate}")
    sigma = np.sqrt(variances)
    if not np.any(sigma > 0):
        raise InfeasibleRateError("all dimensions are dead; no positive rate is reachable")

    lam_peak, r_peak = _peak(sigma)
    if target_rate > r_peak + 1e-9:
        raise InfeasibleRateError(
            f"rate {target_rate:.6g} exceeds the maximum {r_peak:.6g} bits/dim reachable with one threshold"
        )
    if target_rate >= r_peak - 1e-12:
        return lam_peak

    if branch == "sparse":
        return _bisect(sigma, target_rate, lam_peak, 12.0 * float(sigma.max()), increasing=False)
    if branch == "dense":
        r0 = mean_rate(sigma, 0.0)
        if target_rate < r0 - 1e-12:
            raise InfeasibleRateError(f"dense branch starts at {r0:.6g} bits/dim, asked {target_rate}")
        if target_rate <= r0:
            return 0.0
        return _bisect(sigma, target_rate, 0.0, lam_peak, increasing=True)
    raise ValueError(f"unknown branch {branch!r}")
