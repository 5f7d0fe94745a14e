"""Reverse water-filling and the Gaussian rate-distortion bound.

For a Gaussian vector with independent coordinates of variance ``sigma_i^2``
the optimal allocation gives every coordinate distortion
``min(w, sigma_i^2)`` for a common water level ``w`` and spends
``0.5 * log2(sigma_i^2 / D_i)`` bits on it. These curves are what the ternary
codecs are compared against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .metrics import RDPoint
from .quantizer import distortion_per_dim, optimal_beta, rate_per_dim

__all__ = ["WaterfillSolution", "waterfill", "waterfill_at_level", "slb_distortion", "slb_curve", "single_layer_allocation"]


@dataclass(frozen=True)
class WaterfillSolution:
    water_level: float
    per_dim_distortion: np.ndarray
    per_dim_rate: np.ndarray
    total_rate: float  # bits/dim
    total_distortion: float  # per-dim MSE


def _variances(spectrum):
    s = np.asarray(spectrum, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("spectrum must be a non-empty 1-D array of variances")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DomainError("variances must be finite and non-negative")
    return s


def waterfill_at_level(spectrum, water_level) -> WaterfillSolution:
    s = _variances(spectrum)
    d = np.minimum(water_level, s)
    r = np.zeros_like(s)
    active = s > water_level
    r[active] = 0.5 * np.log2(s[active] / water_level)
    return WaterfillSolution(
        water_level=float(water_level),
        per_dim_distortion=d,
        per_dim_rate=r,
        total_rate=float(r.mean()),
        total_distortion=float(d.mean()),
    )


def waterfill(spectrum, target_distortion) -> WaterfillSolution:
    """Optimal allocation reaching a per-dimension distortion ``target_distortion``.

    Targets at or above the mean variance return the zero-rate solution
    (every coordinate reconstructed by zero).
    """
    s = _variances(spectrum)
    if not target_distortion > 0:
        raise DomainError(f"target distortion must be positive, got {target_distortion}")
    if target_distortion >= s.mean():
        return waterfill_at_level(s, float(s.max()))

    total = target_distortion * s.size
    lo, hi = 0.0, float(s.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(mid, s).sum() < total:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return waterfill_at_level(s, 0.5 * (lo + hi))


def _level_for_rate(s, rate):
    live = s[s > 0]
    # the rate at level w is at most (n_live/n) * 0.5*log2(max/w), so this brackets the answer
    lo = float(live.min()) * 2.0 ** (-2.0 * rate * s.size / live.size) * 0.5
    hi = float(live.max())
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        if waterfill_at_level(s, math.exp(mid)).total_rate > rate:
            llo = mid
        else:
            lhi = mid
        if lhi - llo <= 1e-15:
            break
    return math.exp(0.5 * (llo + lhi))


def slb_distortion(spectrum, rate) -> float:
    """Distortion of the optimal Gaussian allocation at ``rate`` bits/dim."""
    s = _variances(spectrum)
    if not rate > 0:
        raise DomainError(f"rate must be positive, got {rate}")
    if not np.any(s > 0):
        return 0.0
    return waterfill_at_level(s, _level_for_rate(s, rate)).total_distortion


def slb_curve(spectrum, rate_grid, dataset="", seed=0) -> list[RDPoint]:
    s = _variances(spectrum)
    return [
        RDPoint(method="slb", rate=float(r), distortion=slb_distortion(s, r), layers_used=0, dataset=dataset, seed=seed)
        for r in rate_grid
    ]


def single_layer_allocation(spectrum, lam):
    """Per-dimension ``(rate, distortion)`` of one ternary layer with threshold ``lam``.

    Uses the optimal magnitude per dimension. Returns an ``(n, 2)`` array.
    """
    s = _variances(spectrum)
    if lam < 0:
        raise DomainError("threshold must be non-negative")
    sigma = np.sqrt(s)
    beta = optimal_beta(sigma, lam)
    return np.column_stack([rate_per_dim(sigma, lam), distortion_per_dim(sigma, lam, beta)])
