"""Little-endian binary containers for trained models and codes.

Ternary model (``MLSTC1``)::

    magic  b"MLSTC1"
    u32 n, u32 L
    f64[n]      mean                       (first layer only)
    per layer:  f64[n*n] projection (row-major), f64 lambda,
                f64[n] beta, f64[n] sigma, f64[n] alpha

PCA hash (``PCAH1``): ``u32 n, u32 k, f64[n] mean, f64[k*n] projection,
f64[k] beta, f64[k] sigma``.

LSH (``LSH1``): ``u32 n, u32 k, f64[n] mean, f64[k*n] projection,
f64[n*k] decoder, f64 scale``.

Code file (``MLSTCC1``): ``u32 vectors, u32 layers``, then for every vector
and layer one record ``u32 layer_id, u32 count`` followed by ``count`` pairs
of ``u32 index, i8 sign``.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .baselines import LSHHash, PCAHash
from .codec import LayerParams, MLModel, TernaryCode
from .errors import FormatError, TruncationError

__all__ = [
    "MODEL_MAGIC",
    "PCAH_MAGIC",
    "LSH_MAGIC",
    "CODES_MAGIC",
    "dumps_model",
    "loads_model",
    "save_model",
    "load_model",
    "dumps_codes",
    "loads_codes",
    "save_codes",
    "load_codes",
    "write_code",
    "read_code",
]

MODEL_MAGIC = b"MLSTC1"
PCAH_MAGIC = b"PCAH1"
LSH_MAGIC = b"LSH1"
CODES_MAGIC = b"MLSTCC1"

_PAIR = np.dtype([("index", "<u4"), ("sign", "i1")])


class _Reader:
    def __init__(self, buf: bytes, what: str):
        self.buf = memoryview(buf)
        self.pos = 0
        self.what = what

    def take(self, count):
        if self.pos + count > len(self.buf):
            raise TruncationError(f"{self.what}: needed {count} bytes at offset {self.pos}, {len(self.buf) - self.pos} left")
        out = self.buf[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self, k=1):
        vals = struct.unpack(f"<{k}I", self.take(4 * k))
        return vals if k > 1 else vals[0]

    def f64(self, count=None, shape=None):
        if count is None:
            return struct.unpack("<d", self.take(8))[0]
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape or (count,))

    def done(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{self.what}: {len(self.buf) - self.pos} trailing bytes")


def _f64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def dumps_model(model) -> bytes:
    out = io.BytesIO()
    if isinstance(model, LayerParams):
        model = MLModel((model,))
    if isinstance(model, MLModel):
        n = model.n
        out.write(MODEL_MAGIC + struct.pack("<II", n, model.num_layers))
        out.write(_f64(model.mean))
        for layer in model.layers:
            out.write(_f64(layer.projection))
            out.write(struct.pack("<d", layer.lam))
            for vec in (layer.beta, layer.sigma, layer.alpha):
                out.write(_f64(vec))
    elif isinstance(model, PCAHash):
        out.write(PCAH_MAGIC + struct.pack("<II", model.n, model.bits))
        for arr in (model.mean, model.projection, model.beta, model.sigma):
            out.write(_f64(arr))
    elif isinstance(model, LSHHash):
        out.write(LSH_MAGIC + struct.pack("<II", model.n, model.bits))
        for arr in (model.mean, model.projection, model.decoder):
            out.write(_f64(arr))
        out.write(struct.pack("<d", model.scale))
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return out.getvalue()


def loads_model(buf: bytes):
    """Inverse of :func:`dumps_model`; the magic string selects the model type."""
    if buf.startswith(MODEL_MAGIC):
        r = _Reader(buf, "MLSTC1 model")
        r.take(len(MODEL_MAGIC))
        n, L = r.u32(2)
        if L < 1:
            raise FormatError("MLSTC1 model declares no layers")
        expected = len(MODEL_MAGIC) + 8 + 8 * n + L * 8 * (n * n + 1 + 3 * n)
        if len(buf) != expected:
            raise (TruncationError if len(buf) < expected else FormatError)(
                f"MLSTC1 model with n={n}, L={L} needs {expected} bytes, got {len(buf)}"
            )
        mean = r.f64(n)
        layers = []
        for l in range(L):
            projection = r.f64(n * n, (n, n))
            lam = r.f64()
            beta, sigma, alpha = r.f64(n), r.f64(n), r.f64(n)
            layers.append(
                LayerParams(
                    projection=projection,
                    mean=mean if l == 0 else np.zeros(n),
                    lam=lam,
                    beta=beta,
                    alpha=alpha,
                    sigma=sigma,
                )
            )
        r.done()
        return MLModel(tuple(layers))
    if buf.startswith(PCAH_MAGIC):
        r = _Reader(buf, "PCAH1 model")
        r.take(len(PCAH_MAGIC))
        n, k = r.u32(2)
        expected = len(PCAH_MAGIC) + 8 + 8 * (n + k * n + 2 * k)
        if len(buf) < expected:
            raise TruncationError(f"PCAH1 model needs {expected} bytes, got {len(buf)}")
        model = PCAHash(mean=r.f64(n), projection=r.f64(k * n, (k, n)), beta=r.f64(k), sigma=r.f64(k))
        r.done()
        return model
    if buf.startswith(LSH_MAGIC):
        r = _Reader(buf, "LSH1 model")
        r.take(len(LSH_MAGIC))
        n, k = r.u32(2)
        expected = len(LSH_MAGIC) + 8 + 8 * (n + 2 * k * n + 1)
        if len(buf) < expected:
            raise TruncationError(f"LSH1 model needs {expected} bytes, got {len(buf)}")
        model = LSHHash(mean=r.f64(n), projection=r.f64(k * n, (k, n)), decoder=r.f64(n * k, (n, k)), scale=r.f64())
        r.done()
        return model
    raise FormatError(f"unknown model magic {bytes(buf[:8])!r}")


def save_model(path, model):
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, "rb") as fh:
        return loads_model(fh.read())


def write_code(out, code: TernaryCode):
    pairs = np.empty(len(code), dtype=_PAIR)
    pairs["index"] = code.indices
    pairs["sign"] = code.signs
    out.write(struct.pack("<II", code.layer_id, len(code)))
    out.write(pairs.tobytes())


def read_code(r: _Reader) -> TernaryCode:
    layer_id, count = r.u32(2)
    pairs = np.frombuffer(r.take(_PAIR.itemsize * count), dtype=_PAIR)
    return TernaryCode(pairs["index"].astype(np.int64), pairs["sign"].astype(np.int8), layer_id)


def dumps_codes(codes) -> bytes:
    """Serialise a list (one entry per vector) of per-layer :class:`TernaryCode` lists."""
    num_layers = len(codes[0]) if codes else 0
    out = io.BytesIO()
    out.write(CODES_MAGIC + struct.pack("<II", len(codes), num_layers))
    for per_vector in codes:
        if len(per_vector) != num_layers:
            raise FormatError("every vector must carry the same number of layers")
        for code in per_vector:
            write_code(out, code)
    return out.getvalue()


def loads_codes(buf: bytes):
    if not buf.startswith(CODES_MAGIC):
        raise FormatError(f"unknown code-file magic {bytes(buf[:8])!r}")
    r = _Reader(buf, "code file")
    r.take(len(CODES_MAGIC))
    count, num_layers = r.u32(2)
    # every record needs at least 8 bytes; reject impossible headers before building lists
    if count * num_layers * 8 > len(buf):
        raise TruncationError(f"code file declares {count}x{num_layers} records but has {len(buf)} bytes")
    codes = [[read_code(r) for _ in range(num_layers)] for _ in range(count)]
    r.done()
    return codes


def save_codes(path, codes):
    with open(path, "wb") as fh:
        fh.write(dumps_codes(codes))


def load_codes(path):
    with open(path, "rb") as fh:
        return loads_codes(fh.read())
