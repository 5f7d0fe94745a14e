"""Sparse ternary codec: single layer and residual multi-layer (ML-STC).

Data matrices are ``(n, N)`` with one vector per column. A layer projects a
vector onto the eigenbasis of its training data, thresholds every projected
coordinate to ``{-1, 0, +1}`` and reconstructs with per-dimension magnitudes
``beta`` followed by the transposed projection. The multi-layer model
applies further layers to the residual of the previous ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, DomainError, InsufficientDataError, SingularMatrixError
from .kernels import eigh, estimate_covariance
from .metrics import empirical_ternary_rate
from .quantizer import activity, distortion_per_dim, lambda_for_rate, mean_rate, optimal_beta, ternarize

log = logging.getLogger(__name__)

__all__ = [
    "LayerParams",
    "TernaryCode",
    "MLModel",
    "train_single_layer",
    "learn_bprime",
    "encode",
    "decode",
    "encode_matrix",
    "decode_matrix",
    "train_ml",
    "encode_ml",
    "decode_ml",
    "encode_ml_matrix",
    "decode_ml_matrix",
    "layer_empirical_rates",
]

# Residual energy below this fraction of the input energy counts as collapsed.
COLLAPSE_RTOL = 1e-20


@dataclass(frozen=True, eq=False)
class LayerParams:
    """A trained ternary layer.

    ``projection`` holds eigenvectors as rows, so ``projection @ f`` gives
    decorrelated coordinates and ``projection.T`` is the decoder.
    ``mean`` is all zeros for residual layers.
    """

    projection: np.ndarray
    mean: np.ndarray
    lam: float
    beta: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        n = self.sigma.shape[0]
        if self.projection.shape != (n, n):
            raise DomainError(f"projection must be {n}x{n}, got {self.projection.shape}")
        for name in ("mean", "beta", "alpha"):
            if getattr(self, name).shape != (n,):
                raise DomainError(f"{name} must have length {n}")

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def rate(self) -> float:
        """Analytic rate in bits/dim."""
        return mean_rate(self.sigma, self.lam)

    @property
    def live(self) -> np.ndarray:
        return self.sigma > 0

    def expected_distortion(self) -> float:
        """Model distortion per dimension, averaged over the layer's coordinates."""
        return float(np.mean(distortion_per_dim(self.sigma, self.lam, self.beta)))

    @classmethod
    def from_basis(cls, projection, sigma, lam, mean=None):
        sigma = np.asarray(sigma, dtype=float)
        n = sigma.shape[0]
        return cls(
            projection=np.ascontiguousarray(projection, dtype=float),
            mean=np.zeros(n) if mean is None else np.asarray(mean, dtype=float),
            lam=float(lam),
            beta=optimal_beta(sigma, lam),
            alpha=activity(sigma, lam),
            sigma=sigma,
        )


@dataclass(frozen=True)
class TernaryCode:
    """Sparse ternary code of one vector: sorted nonzero positions and their signs."""

    indices: np.ndarray
    signs: np.ndarray
    layer_id: int = 0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        sg = np.asarray(self.signs, dtype=np.int8)
        if idx.shape != sg.shape or idx.ndim != 1:
            raise DomainError("indices and signs must be 1-D arrays of equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise DomainError("indices must be non-negative and strictly increasing")
        if np.any((sg != 1) & (sg != -1)):
            raise DomainError("signs must be +1 or -1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sg)

    @property
    def support(self):
        return list(zip(self.indices.tolist(), self.signs.tolist()))

    def __len__(self):
        return self.indices.size

    def __eq__(self, other):
        if not isinstance(other, TernaryCode):
            return NotImplemented
        return (
            self.layer_id == other.layer_id
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.signs, other.signs)
        )

    @classmethod
    def from_dense(cls, symbols, layer_id=0):
        symbols = np.asarray(symbols)
        idx = np.flatnonzero(symbols)
        return cls(idx, np.sign(symbols[idx]).astype(np.int8), layer_id)

    def to_dense(self, n) -> np.ndarray:
        if self.indices.size and self.indices[-1] >= n:
            raise DomainError(f"code index {self.indices[-1]} out of range for dimension {n}")
        out = np.zeros(n, dtype=np.int8)
        out[self.indices] = self.signs
        return out


@dataclass(frozen=True, eq=False)
class MLModel:
    layers: tuple
    per_layer_rate: np.ndarray = field(default=None)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise DomainError("a model needs at least one layer")
        n = layers[0].n
        if any(layer.n != n for layer in layers):
            raise DomainError("all layers must share the same dimension")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "per_layer_rate", np.array([layer.rate for layer in layers]))

    @property
    def n(self) -> int:
        return self.layers[0].n

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def mean(self) -> np.ndarray:
        return self.layers[0].mean

    def cumulative_rate(self, up_to=None) -> float:
        k = self.num_layers if up_to is None else up_to
        return float(np.sum(self.per_layer_rate[:k]))

    @property
    def lambda_schedule(self):
        return [layer.lam for layer in self.layers]


def _as_matrix(data):
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DomainError(f"expected an (n, N) matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise DomainError("data contains non-finite values")
    return data


def train_single_layer(
    train_data,
    rate=None,
    *,
    lam=None,
    center=True,
    branch="sparse",
    variance_holdout=0.0,
    eig_method="jacobi",
) -> LayerParams:
    """Fit one ternary layer on the columns of ``train_data``.

    Exactly one of ``rate`` (analytic bits/dim, converted to a threshold by
    :func:`lambda_for_rate`) or ``lam`` (explicit threshold) must be given.
    With ``center=True`` the training mean is removed before projecting and
    added back at decode time; residual layers pass ``center=False`` and use
    the uncentred second-moment matrix.

    By default the per-coordinate variances are the sample eigenvalues. Those
    are biased estimates of the variance new data shows along each
    eigenvector (the top ones too large, the bottom ones too small), which
    makes the analytic rate and distortion optimistic on held-out data when
    ``N`` is not much larger than ``n``. ``variance_holdout`` reserves that
    fraction of the (trailing) training columns: the basis is fitted on the
    rest and the variances are measured on the reserved part.
    """
    if (rate is None) == (lam is None):
        raise DomainError("give exactly one of rate or lam")
    F = _as_matrix(train_data)
    n, N = F.shape
    if not 0.0 <= variance_holdout < 1.0:
        raise DomainError("variance_holdout must lie in [0, 1)")
    fit, held = F, None
    if variance_holdout > 0:
        split = int(round(N * (1.0 - variance_holdout)))
        if split < 2 or N - split < 2:
            raise InsufficientDataError(f"cannot split {N} columns with variance_holdout={variance_holdout}")
        fit, held = F[:, :split], F[:, split:]

    mean = fit.mean(axis=1) if center else np.zeros(n)
    C = estimate_covariance(fit, center=center)
    if not np.any(C):
        raise DegenerateDataError("training data has zero covariance")
    spectrum = eigh(C, method=eig_method)
    live = spectrum.live_mask()
    if held is None:
        variances = spectrum.eigenvalues
    else:
        variances = np.mean((spectrum.eigenvectors.T @ (held - mean[:, None])) ** 2, axis=1)
    sigma = np.sqrt(np.where(live, variances, 0.0))
    if lam is None:
        lam = lambda_for_rate(sigma**2, rate, branch=branch)
    elif lam < 0:
        raise DomainError("threshold must be non-negative")
    return LayerParams.from_basis(spectrum.eigenvectors.T, sigma, lam, mean)


def encode_matrix(layer: LayerParams, data) -> np.ndarray:
    """Ternary symbols ``(n, M)`` as ``int8`` for every column of ``data``."""
    F = _as_matrix(data)
    if F.shape[0] != layer.n:
        raise DomainError(f"expected vectors of length {layer.n}, got {F.shape[0]}")
    projected = layer.projection @ (F - layer.mean[:, None])
    codes = ternarize(projected, layer.lam)
    codes[~layer.live] = 0
    return codes


def decode_matrix(layer: LayerParams, codes, add_mean=True) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.shape[0] != layer.n:
        raise DomainError(f"expected codes of length {layer.n}, got {codes.shape[0]}")
    out = layer.projection.T @ (layer.beta[:, None] * codes)
    if add_mean:
        out += layer.mean[:, None]
    return out


def encode(layer: LayerParams, f, layer_id=0) -> TernaryCode:
    f = np.asarray(f, dtype=float)
    if f.shape != (layer.n,):
        raise DomainError(f"expected a vector of length {layer.n}, got shape {f.shape}")
    return TernaryCode.from_dense(encode_matrix(layer, f[:, None])[:, 0], layer_id)


def decode(layer: LayerParams, code: TernaryCode, add_mean=True) -> np.ndarray:
    return decode_matrix(layer, code.to_dense(layer.n)[:, None], add_mean)[:, 0]


def learn_bprime(layer: LayerParams, train_data, codes=None, regularize=True) -> np.ndarray:
    """Least-squares ``B' = A F X^T (X X^T)^-1`` for the layer's decoder.

    ``X`` holds the weighted codes ``beta * phi(A f)`` of the centred training
    data ``F``. The default decoder corresponds to ``B' = I``; this is only used
    to check that claim empirically. When ``X X^T`` is ill-conditioned
    (condition estimate above 1e12) a ridge of ``1e-8 * trace / n`` is added,
    or :class:`SingularMatrixError` is raised with ``regularize=False``.
    """
    F = _as_matrix(train_data)
    if F.shape[1] < 2:
        raise InsufficientDataError("need at least two training vectors")
    if codes is None:
        codes = encode_matrix(layer, F)
    X = layer.beta[:, None] * np.asarray(codes, dtype=float)
    centred = F - layer.mean[:, None]
    G = X @ X.T
    cond = np.linalg.cond(G) if np.any(G) else np.inf
    if not cond <= 1e12:
        if not regularize or np.trace(G) == 0.0:
            # an all-zero code matrix leaves nothing for a trace-scaled ridge to work with
            raise SingularMatrixError(f"X X^T is singular or ill-conditioned (cond={cond:.3g})")
        G = G + 1e-8 * np.trace(G) / G.shape[0] * np.eye(G.shape[0])
    rhs = layer.projection @ centred @ X.T
    # B' G = rhs  ->  G B'^T = rhs^T  (G symmetric)
    return np.linalg.solve(G, rhs.T).T


def train_ml(
    train_data, layer_rate, num_layers, *, branch="sparse", variance_holdout=0.0, eig_method="jacobi"
) -> MLModel:
    """Fit ``num_layers`` ternary layers, each on the residual left by the previous ones.

    ``layer_rate`` is either one rate used for every layer or a sequence with
    one rate per layer. The first layer removes the training mean; every
    later layer re-estimates its own eigenbasis from the current residuals.
    Training stops early (with a warning) if the residual vanishes.
    """
    F = _as_matrix(train_data)
    if num_layers < 1:
        raise DomainError("num_layers must be at least 1")
    rates = np.asarray(layer_rate, dtype=float)
    if rates.ndim == 0:
        rates = np.full(num_layers, float(rates))
    if rates.shape != (num_layers,):
        raise DomainError(f"expected {num_layers} layer rates, got {rates.shape[0]}")

    energy0 = float(np.sum((F - F.mean(axis=1, keepdims=True)) ** 2))
    residual = F
    layers = []
    for l in range(num_layers):
        if l > 0 and float(np.sum(residual**2)) <= COLLAPSE_RTOL * energy0:
            log.warning("residual vanished after %d layers; stopping early", l)
            break
        layer = train_single_layer(
            residual,
            rates[l],
            center=(l == 0),
            branch=branch,
            variance_holdout=variance_holdout,
            eig_method=eig_method,
        )
        layers.append(layer)
        residual = residual - decode_matrix(layer, encode_matrix(layer, residual))
    return MLModel(tuple(layers))


def encode_ml_matrix(model: MLModel, data) -> list:
    """Code matrices, one ``(n, M)`` int8 array per layer."""
    residual = _as_matrix(data)
    out = []
    for layer in model.layers:
        codes = encode_matrix(layer, residual)
        out.append(codes)
        residual = residual - decode_matrix(layer, codes)
    return out


def decode_ml_matrix(model: MLModel, codes, up_to=None) -> np.ndarray:
    k = model.num_layers if up_to is None else up_to
    if not 0 <= k <= model.num_layers:
        raise DomainError(f"up_to must be in [0, {model.num_layers}]")
    if len(codes) < k:
        raise DomainError(f"need codes for {k} layers, got {len(codes)}")
    M = np.asarray(codes[0]).shape[1] if len(codes) else 0
    out = np.repeat(model.mean[:, None], M, axis=1)
    for layer, c in zip(model.layers[:k], codes[:k]):
        out += decode_matrix(layer, c, add_mean=False)
    return out


def encode_ml(model: MLModel, f) -> list:
    f = np.asarray(f, dtype=float)
    if f.shape != (model.n,):
        raise DomainError(f"expected a vector of length {model.n}, got shape {f.shape}")
    mats = encode_ml_matrix(model, f[:, None])
    return [TernaryCode.from_dense(m[:, 0], layer_id=l) for l, m in enumerate(mats)]


def decode_ml(model: MLModel, codes, up_to=None) -> np.ndarray:
    k = model.num_layers if up_to is None else up_to
    if len(codes) > model.num_layers:
        raise DomainError(f"model has {model.num_layers} layers but {len(codes)} codes were given")
    for l, c in enumerate(codes[:k]):
        if c.layer_id != l:
            raise DomainError(f"code for layer {c.layer_id} found at position {l}")
    out = model.mean.copy()
    if not 0 <= k <= model.num_layers or len(codes) < k:
        raise DomainError(f"cannot decode {k} layers from {len(codes)} codes")
    for layer, c in zip(model.layers[:k], codes[:k]):
        out += decode(layer, c, add_mean=False)
    return out


def layer_empirical_rates(model: MLModel, codes) -> list:
    """Measured symbol entropy (bits/dim) of each layer's code matrix."""
    return [empirical_ternary_rate(c) for c in codes]
