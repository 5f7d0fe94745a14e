"""Synthetic Gaussian sources and loaders for idx (MNIST) and fvecs (GIST) files.

All matrices are ``(n, N)``: one vector per column.

Random numbers come from numpy's Philox counter-based generator. Train and
test draws use child streams spawned from the same seed, so a seed
reproduces the same matrices on every platform numpy supports.
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, TruncationError

__all__ = [
    "SyntheticSpec",
    "Dataset",
    "generate",
    "ar1_covariance",
    "ar1_spectrum",
    "load_idx",
    "write_idx",
    "load_fvecs",
    "write_fvecs",
    "load_mnist",
    "load_gist",
]

IDX_UBYTE_3D = 0x00000803
IDX_UBYTE_1D = 0x00000801
# refuse headers declaring more than this many payload bytes before reading anything
MAX_PAYLOAD_BYTES = 1 << 36


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str  # "iid" or "ar1"
    n: int
    N: int
    rho: float = 0.0
    seed: int = 0
    N_test: int | None = None

    def __post_init__(self):
        if self.kind not in ("iid", "ar1"):
            raise DomainError(f"unknown source kind {self.kind!r}")
        if self.n < 1 or self.N < 1 or (self.N_test is not None and self.N_test < 0):
            raise DomainError("n and N must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def name(self) -> str:
        return "iid" if self.kind == "iid" else f"ar1-rho{self.rho:g}"

    def spectrum(self) -> np.ndarray:
        """Eigenvalues of the true source covariance, descending."""
        if self.kind == "iid":
            return np.ones(self.n)
        return ar1_spectrum(self.n, self.rho)


@dataclass(frozen=True, eq=False)
class Dataset:
    train: np.ndarray
    test: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.train.ndim != 2 or self.test.ndim != 2 or self.train.shape[0] != self.test.shape[0]:
            raise DomainError("train and test must be (n, N) matrices with the same n")
        if not (np.all(np.isfinite(self.train)) and np.all(np.isfinite(self.test))):
            raise DomainError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.train.shape[0]


def _draw(spec: SyntheticSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    z = rng.standard_normal((spec.n, count))
    if spec.kind == "iid" or spec.rho == 0.0:
        return z
    innovation = np.sqrt(1.0 - spec.rho**2)
    x = np.empty_like(z)
    x[0] = z[0]
    for t in range(1, spec.n):
        x[t] = spec.rho * x[t - 1] + innovation * z[t]
    return x


def generate(spec: SyntheticSpec) -> Dataset:
    """Draw train (``N`` columns) and test (``N_test``, default ``N``) matrices."""
    train_seq, test_seq = np.random.SeedSequence(spec.seed).spawn(2)
    train = _draw(spec, np.random.Generator(np.random.Philox(train_seq)), spec.N)
    n_test = spec.N if spec.N_test is None else spec.N_test
    test = _draw(spec, np.random.Generator(np.random.Philox(test_seq)), n_test)
    return Dataset(train, test, spec.name)


def ar1_covariance(n, rho) -> np.ndarray:
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def ar1_spectrum(n, rho) -> np.ndarray:
    """Eigenvalues of the ``n x n`` AR(1) Toeplitz covariance, descending."""
    return np.sort(np.linalg.eigvalsh(ar1_covariance(n, rho)))[::-1].clip(min=0.0)


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise TruncationError(f"{what}: expected {count} bytes, got {len(buf)}")
    return buf


def _payload_available(path, header_bytes):
    """Bytes after the header for uncompressed files; None when unknown (gzip)."""
    path = Path(path)
    if path.suffix == ".gz":
        return None
    return os.path.getsize(path) - header_bytes


def load_idx(images_path, labels_path=None, scale=True):
    """Read an idx image file into a ``(rows*cols, N)`` matrix.

    Pixels are scaled to ``[0, 1]`` unless ``scale=False``. Returns
    ``(matrix, labels)`` with ``labels=None`` when no label file is given.
    Files may be gzip-compressed (``.gz`` suffix).
    """
    with _open(images_path) as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, f"{images_path} header"))
        if magic != IDX_UBYTE_3D:
            raise FormatError(f"{images_path}: bad idx magic 0x{magic:08x}, expected 0x{IDX_UBYTE_3D:08x}")
        rows, cols = struct.unpack(">II", _read_exact(fh, 8, f"{images_path} header"))
        expected = count * rows * cols
        if expected > MAX_PAYLOAD_BYTES:
            raise FormatError(f"{images_path}: header declares an implausible {expected} bytes")
        avail = _payload_available(images_path, 16)
        if avail is not None and avail < expected:
            raise TruncationError(f"{images_path}: expected {expected} payload bytes, file has {avail}")
        raw = np.frombuffer(_read_exact(fh, expected, str(images_path)), dtype=np.uint8)
    images = raw.reshape(count, rows * cols).T.astype(np.float64)
    if scale:
        images /= 255.0

    labels = None
    if labels_path is not None:
        with _open(labels_path) as fh:
            magic, lcount = struct.unpack(">II", _read_exact(fh, 8, f"{labels_path} header"))
            if magic != IDX_UBYTE_1D:
                raise FormatError(f"{labels_path}: bad idx magic 0x{magic:08x}, expected 0x{IDX_UBYTE_1D:08x}")
            if lcount != count:
                raise FormatError(f"{labels_path}: {lcount} labels for {count} images")
            avail = _payload_available(labels_path, 8)
            if avail is not None and avail < lcount:
                raise TruncationError(f"{labels_path}: expected {lcount} payload bytes, file has {avail}")
            labels = np.frombuffer(_read_exact(fh, lcount, str(labels_path)), dtype=np.uint8).copy()
    return images, labels


def write_idx(path, images, labels_path=None, labels=None):
    """Write ``(N, rows, cols)`` uint8 images (and optional labels) as idx files."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise DomainError("images must have shape (N, rows, cols)")
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_UBYTE_3D, *images.shape))
        fh.write(images.tobytes())
    if labels_path is not None:
        labels = np.asarray(labels, dtype=np.uint8)
        opener = gzip.open if str(labels_path).endswith(".gz") else open
        with opener(labels_path, "wb") as fh:
            fh.write(struct.pack(">II", IDX_UBYTE_1D, labels.size))
            fh.write(labels.tobytes())


def load_fvecs(path, max_vectors=None) -> np.ndarray:
    """Read an fvecs file into a ``(d, N)`` float64 matrix.

    Each record is a little-endian int32 dimension followed by that many
    float32 values; every record must share the dimension. ``max_vectors``
    reads only the leading records.
    """
    path = Path(path)
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        if size < 4:
            raise TruncationError(f"{path}: file too short for an fvecs header ({size} bytes)")
        (d,) = struct.unpack("<i", fh.read(4))
    if d <= 0:
        raise FormatError(f"{path}: record dimension must be positive, got {d}")
    record = 4 * (d + 1)
    count = size // record
    if size % record:
        raise TruncationError(f"{path}: size {size} is not a multiple of the {record}-byte record length")
    if max_vectors is not None:
        count = min(count, int(max_vectors))
    raw = np.fromfile(path, dtype="<i4", count=count * (d + 1)).reshape(count, d + 1)
    if np.any(raw[:, 0] != d):
        bad = int(np.flatnonzero(raw[:, 0] != d)[0])
        raise FormatError(f"{path}: record {bad} has dimension {raw[bad, 0]}, expected {d}")
    return raw[:, 1:].view("<f4").T.astype(np.float64)


def write_fvecs(path, data):
    """Write the columns of a ``(d, N)`` matrix as fvecs records."""
    data = np.asarray(data, dtype="<f4")
    d, N = data.shape
    out = np.empty((N, d + 1), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = data.T.view("<i4")
    out.tofile(path)


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        p = Path(directory) / name
        if p.exists():
            return p
    raise FileNotFoundError(f"{stem}[.gz] not found in {directory}")


def load_mnist(directory, max_train=None, max_test=None) -> Dataset:
    """Load the standard MNIST idx files from ``directory`` (optionally gzipped)."""
    train, _ = load_idx(_find(directory, "train-images-idx3-ubyte"))
    test, _ = load_idx(_find(directory, "t10k-images-idx3-ubyte"))
    if max_train is not None:
        train = train[:, :max_train]
    if max_test is not None:
        test = test[:, :max_test]
    return Dataset(train, test, "mnist")


def load_gist(directory, n_train=50_000, n_test=10_000, split="learn") -> Dataset:
    """Load a GIST-1M subsample.

    ``split="learn"`` trains on ``gist_learn.fvecs`` and evaluates on
    ``gist_base.fvecs``; ``split="base"`` trains on the base file and
    evaluates on the learn file.
    """
    learn = Path(directory) / "gist_learn.fvecs"
    base = Path(directory) / "gist_base.fvecs"
    if split == "learn":
        train_path, test_path = learn, base
    elif split == "base":
        train_path, test_path = base, learn
    else:
        raise DomainError(f"unknown GIST split {split!r}")
    return Dataset(load_fvecs(train_path, n_train), load_fvecs(test_path, n_test), "gist")
