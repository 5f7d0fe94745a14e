"""Binary hashing baselines with reconstruction.

PCA hashing keeps the signs of the top-``k`` eigen-projections and decodes
with the same optimal magnitudes a ternary layer uses at threshold 0. LSH
(Sim-Hash) keeps the signs of ``k`` random Gaussian projections and decodes
with a least-squares decoder followed by one global scale factor. Both cost
exactly ``k/n`` bits per dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DomainError, InsufficientDataError
from .kernels import eigh, estimate_covariance
from .quantizer import optimal_beta

__all__ = ["PCAHash", "LSHHash", "train_pca_hash", "train_lsh", "global_scalar_beta", "sign_codes"]


def global_scalar_beta(F, F_hat) -> float:
    """Scale ``b`` minimising ``||F - b * F_hat||_F``: ``Tr[F F_hat^T] / Tr[F_hat F_hat^T]``."""
    F = np.asarray(F, dtype=float)
    F_hat = np.asarray(F_hat, dtype=float)
    if F.shape != F_hat.shape:
        raise DomainError(f"shape mismatch: {F.shape} vs {F_hat.shape}")
    den = float(np.sum(F_hat * F_hat))
    if den == 0.0:
        raise DegenerateDataError("reconstruction is identically zero")
    return float(np.sum(F * F_hat)) / den


def sign_codes(projected) -> np.ndarray:
    """Binary codes in ``{-1, +1}``; exact zeros map to +1 so every bit is used."""
    return np.where(np.asarray(projected) < 0, -1, 1).astype(np.int8)


def _check_train(train_data):
    F = np.asarray(train_data, dtype=float)
    if F.ndim != 2:
        raise DomainError("expected an (n, N) matrix")
    if F.shape[1] < 2:
        raise InsufficientDataError("need at least two training vectors")
    return F


@dataclass(frozen=True, eq=False)
class PCAHash:
    mean: np.ndarray
    projection: np.ndarray  # (k, n)
    beta: np.ndarray  # (k,)
    sigma: np.ndarray  # (k,)

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @property
    def bits(self) -> int:
        return self.projection.shape[0]

    @property
    def rate(self) -> float:
        return self.bits / self.n

    def encode(self, data) -> np.ndarray:
        return sign_codes(self.projection @ (np.asarray(data, dtype=float) - self.mean[:, None]))

    def decode(self, codes) -> np.ndarray:
        return self.projection.T @ (self.beta[:, None] * np.asarray(codes, dtype=float)) + self.mean[:, None]


def train_pca_hash(train_data, bits, variance_holdout=0.0, eig_method="jacobi") -> PCAHash:
    """Sign codes of the top-``bits`` principal projections.

    ``variance_holdout`` works as in :func:`mlstc.codec.train_single_layer`:
    magnitudes come from variances measured on the reserved trailing columns.
    """
    F = _check_train(train_data)
    n, N = F.shape
    if not 0 <= bits <= n:
        raise DomainError(f"PCA hashing needs 0 <= bits <= n={n}, got {bits}")
    fit, held = F, None
    if variance_holdout > 0:
        split = int(round(N * (1.0 - variance_holdout)))
        if split < 2 or N - split < 2:
            raise InsufficientDataError(f"cannot split {N} columns with variance_holdout={variance_holdout}")
        fit, held = F[:, :split], F[:, split:]
    mean = fit.mean(axis=1)
    spectrum = eigh(estimate_covariance(fit), method=eig_method)
    V = spectrum.eigenvectors[:, :bits]
    if held is None:
        variances = spectrum.eigenvalues[:bits]
    else:
        variances = np.mean((V.T @ (held - mean[:, None])) ** 2, axis=1)
    sigma = np.sqrt(np.where(spectrum.live_mask()[:bits], variances, 0.0))
    return PCAHash(
        mean=mean,
        projection=V.T.copy(),
        beta=optimal_beta(sigma, 0.0) if bits else np.zeros(0),
        sigma=sigma,
    )


@dataclass(frozen=True, eq=False)
class LSHHash:
    mean: np.ndarray
    projection: np.ndarray  # (k, n) random Gaussian
    decoder: np.ndarray  # (n, k) least squares
    scale: float  # global scalar beta

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @property
    def bits(self) -> int:
        return self.projection.shape[0]

    @property
    def rate(self) -> float:
        return self.bits / self.n

    def encode(self, data) -> np.ndarray:
        return sign_codes(self.projection @ (np.asarray(data, dtype=float) - self.mean[:, None]))

    def decode(self, codes) -> np.ndarray:
        return self.scale * (self.decoder @ np.asarray(codes, dtype=float)) + self.mean[:, None]


def train_lsh(train_data, bits, seed=0) -> LSHHash:
    """Sim-Hash with a pseudo-inverse decoder ``W = F X^T (X X^T)^-1``.

    ``X X^T`` gets the same ridge as the ternary ``B'`` fit when it is
    ill-conditioned (condition estimate above 1e12).
    """
    F = _check_train(train_data)
    if bits < 1:
        raise DomainError("LSH needs at least one bit")
    n = F.shape[0]
    mean = F.mean(axis=1)
    centred = F - mean[:, None]
    if not np.any(centred):
        raise DegenerateDataError("training data has zero variance")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    projection = rng.standard_normal((bits, n))
    X = sign_codes(projection @ centred).astype(float)
    G = X @ X.T
    if not np.linalg.cond(G) <= 1e12:
        G = G + 1e-8 * np.trace(G) / bits * np.eye(bits)
    decoder = np.ascontiguousarray(np.linalg.solve(G, X @ centred.T).T)
    scale = global_scalar_beta(centred, decoder @ X)
    return LSHHash(mean=mean, projection=projection, decoder=decoder, scale=scale)
