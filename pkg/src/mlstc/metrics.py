"""Rate and distortion measurements shared by the codecs and the harness."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = ["RDPoint", "measure_distortion", "empirical_ternary_rate", "symbol_entropy"]


@dataclass(frozen=True)
class RDPoint:
    """One point of a rate-distortion curve.

    ``rate`` is bits per dimension and ``distortion`` the per-dimension mean
    squared error on the evaluation split. STC methods also fill
    ``rate_analytic`` (entropy model) and ``rate_empirical`` (symbol
    frequencies measured on the evaluation codes).
    """

    method: str
    rate: float
    distortion: float
    layers_used: int = 1
    lambda_schedule: tuple = ()
    dataset: str = ""
    seed: int = 0
    rate_analytic: float = float("nan")
    rate_empirical: float = float("nan")
    distortion_theory: float = float("nan")
    distortion_train: float = float("nan")
    param: str = ""

    def __post_init__(self):
        if not self.rate >= 0 or not self.distortion >= 0:
            raise DomainError(f"rate and distortion must be non-negative, got {self.rate}, {self.distortion}")
        object.__setattr__(self, "lambda_schedule", tuple(float(x) for x in self.lambda_schedule))

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        row = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "lambda_schedule":
                v = ";".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            row[f.name] = v
        return row

    def sort_key(self):
        return (self.method, self.rate, self.layers_used, self.param)


def measure_distortion(original, reconstructed) -> float:
    """Per-dimension MSE ``(1/(n*M)) * sum ||f_i - fhat_i||^2`` over ``(n, M)`` matrices."""
    original = np.asarray(original, dtype=float)
    reconstructed = np.asarray(reconstructed, dtype=float)
    if original.shape != reconstructed.shape:
        raise DomainError(f"shape mismatch: {original.shape} vs {reconstructed.shape}")
    if original.size == 0:
        raise DomainError("empty input")
    return float(np.mean((original - reconstructed) ** 2))


def symbol_entropy(codes) -> np.ndarray:
    """Per-dimension plug-in entropy (bits) of the symbols in an ``(n, M)`` code matrix."""
    codes = np.asarray(codes)
    M = codes.shape[1]
    p_pos = np.count_nonzero(codes > 0, axis=1) / M
    p_neg = np.count_nonzero(codes < 0, axis=1) / M
    p_zero = np.maximum(1.0 - p_pos - p_neg, 0.0)
    h = -(special.xlogy(p_pos, p_pos) + special.xlogy(p_neg, p_neg) + special.xlogy(p_zero, p_zero))
    return np.maximum(h / np.log(2.0), 0.0)


def empirical_ternary_rate(codes) -> float:
    """Measured rate in bits/dim of an ``(n, M)`` ternary code matrix."""
    return float(np.mean(symbol_entropy(codes)))
