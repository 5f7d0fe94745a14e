import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from mlstc.errors import DomainError, FormatError, TruncationError
from mlstc.kernels import estimate_covariance
from mlstc.sources import (
    Dataset,
    SyntheticSpec,
    ar1_covariance,
    ar1_spectrum,
    generate,
    load_fvecs,
    load_gist,
    load_idx,
    load_mnist,
    write_fvecs,
    write_idx,
)

DATA = Path(__file__).parent / "data"


class TestSynthetic:
    def test_rho_zero_is_iid(self):
        ds = generate(SyntheticSpec("ar1", 8, 100_000, rho=0.0, seed=1))
        assert np.max(np.abs(estimate_covariance(ds.train) - np.eye(8))) < 0.05

    def test_rho_09_pair(self):
        ds = generate(SyntheticSpec("ar1", 2, 100_000, rho=0.9, seed=2))
        assert estimate_covariance(ds.train)[0, 1] == pytest.approx(0.9, abs=0.02)

    def test_deterministic(self):
        spec = SyntheticSpec("ar1", 5, 300, rho=0.5, seed=9)
        a, b = generate(spec), generate(spec)
        assert a.train.tobytes() == b.train.tobytes() and a.test.tobytes() == b.test.tobytes()

    def test_train_and_test_differ(self):
        ds = generate(SyntheticSpec("iid", 4, 50, seed=0))
        assert not np.array_equal(ds.train, ds.test)

    def test_seeds_differ(self):
        a = generate(SyntheticSpec("iid", 4, 50, seed=0)).train
        b = generate(SyntheticSpec("iid", 4, 50, seed=1)).train
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("n,rho", [(16, 0.5), (16, 0.9), (8, 0.3)])
    def test_ar1_covariance(self, n, rho):
        N = 40_000
        ds = generate(SyntheticSpec("ar1", n, N, rho=rho, seed=5))
        dev = np.max(np.abs(estimate_covariance(ds.train) - ar1_covariance(n, rho)))
        assert dev <= 5 / np.sqrt(N)

    def test_test_size(self):
        ds = generate(SyntheticSpec("iid", 3, 10, N_test=7))
        assert ds.train.shape == (3, 10) and ds.test.shape == (3, 7)

    @pytest.mark.parametrize("kw", [dict(kind="gauss", n=2, N=2), dict(kind="iid", n=0, N=2), dict(kind="ar1", n=2, N=2, rho=1.0)])
    def test_invalid_spec(self, kw):
        with pytest.raises(DomainError):
            SyntheticSpec(**kw)

    def test_spectrum(self):
        s = ar1_spectrum(2, 0.5)
        np.testing.assert_allclose(s, [1.5, 0.5])
        np.testing.assert_array_equal(SyntheticSpec("iid", 3, 1).spectrum(), np.ones(3))
        assert ar1_spectrum(100, 0.9).sum() == pytest.approx(100.0)

    def test_dataset_validation(self):
        with pytest.raises(DomainError):
            Dataset(np.zeros((2, 3)), np.zeros((3, 3)))
        with pytest.raises(DomainError):
            Dataset(np.array([[np.nan]]), np.zeros((1, 1)))


class TestIdx:
    def test_round_trip(self, tmp_path, rng):
        imgs = rng.integers(0, 256, (5, 3, 4), dtype=np.uint8)
        labels = np.arange(5, dtype=np.uint8)
        write_idx(tmp_path / "i.idx", imgs, tmp_path / "l.idx", labels)
        X, y = load_idx(tmp_path / "i.idx", tmp_path / "l.idx")
        assert X.shape == (12, 5)
        np.testing.assert_allclose(X[:, 2], imgs[2].ravel() / 255.0)
        np.testing.assert_array_equal(y, labels)
        raw, _ = load_idx(tmp_path / "i.idx", scale=False)
        assert raw.max() == imgs.max()

    def test_gzip(self, tmp_path):
        imgs = np.full((2, 2, 2), 255, dtype=np.uint8)
        write_idx(tmp_path / "i.idx.gz", imgs)
        X, _ = load_idx(tmp_path / "i.idx.gz")
        np.testing.assert_array_equal(X, np.ones((4, 2)))

    def test_truncated(self, tmp_path):
        p = tmp_path / "t.idx"
        p.write_bytes(struct.pack(">IIII", 0x803, 10, 28, 28) + b"\0" * 100)
        with pytest.raises(TruncationError, match="7840"):
            load_idx(p)

    def test_truncated_gzip(self, tmp_path):
        p = tmp_path / "t.idx.gz"
        with gzip.open(p, "wb") as fh:
            fh.write(struct.pack(">IIII", 0x803, 10, 2, 2) + b"\0" * 5)
        with pytest.raises(TruncationError):
            load_idx(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "b.idx"
        p.write_bytes(struct.pack(">IIII", 0x801, 1, 1, 1) + b"\0")
        with pytest.raises(FormatError):
            load_idx(p)

    def test_implausible_header_fails_before_reading(self, tmp_path):
        p = tmp_path / "h.idx"
        p.write_bytes(struct.pack(">IIII", 0x803, 2**31, 2**16, 2**16))
        with pytest.raises(FormatError):
            load_idx(p)

    def test_label_count_mismatch(self, tmp_path):
        write_idx(tmp_path / "i.idx", np.zeros((3, 1, 1), np.uint8), tmp_path / "l.idx", np.zeros(2, np.uint8))
        with pytest.raises(FormatError):
            load_idx(tmp_path / "i.idx", tmp_path / "l.idx")

    def test_short_header(self, tmp_path):
        p = tmp_path / "s.idx"
        p.write_bytes(b"\0\0")
        with pytest.raises(TruncationError):
            load_idx(p)

    def test_mnist_fixture(self):
        X, y = load_idx(DATA / "mnist5k-train-images-idx3-ubyte.gz", DATA / "mnist5k-train-labels-idx1-ubyte.gz")
        assert X.shape == (784, 4000) and y.shape == (4000,)
        assert 0.0 <= X.min() and X.max() <= 1.0
        assert set(np.unique(y)) == set(range(10))

    def test_load_mnist_directory(self, tmp_path):
        write_idx(tmp_path / "train-images-idx3-ubyte.gz", np.zeros((6, 2, 2), np.uint8))
        write_idx(tmp_path / "t10k-images-idx3-ubyte", np.zeros((3, 2, 2), np.uint8))
        ds = load_mnist(tmp_path, max_train=4)
        assert ds.train.shape == (4, 4) and ds.test.shape == (4, 3) and ds.name == "mnist"
        with pytest.raises(FileNotFoundError):
            load_mnist(tmp_path / "missing")


class TestFvecs:
    def test_round_trip(self, tmp_path, rng):
        data = rng.standard_normal((4, 3)).astype(np.float32)
        write_fvecs(tmp_path / "a.fvecs", data)
        np.testing.assert_array_equal(load_fvecs(tmp_path / "a.fvecs"), data.astype(np.float64))

    def test_cap(self, tmp_path, rng):
        write_fvecs(tmp_path / "a.fvecs", rng.standard_normal((960, 20)))
        assert load_fvecs(tmp_path / "a.fvecs", max_vectors=7).shape == (960, 7)

    def test_zero_dimension(self, tmp_path):
        p = tmp_path / "z.fvecs"
        p.write_bytes(struct.pack("<i", 0))
        with pytest.raises(FormatError):
            load_fvecs(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "t.fvecs"
        p.write_bytes(struct.pack("<i3f", 3, 1, 2, 3) + struct.pack("<i", 3))
        with pytest.raises(TruncationError):
            load_fvecs(p)

    def test_inconsistent_dimension(self, tmp_path):
        p = tmp_path / "i.fvecs"
        p.write_bytes(struct.pack("<i2f", 2, 1, 2) + struct.pack("<i2f", 1, 1, 2))
        with pytest.raises(FormatError):
            load_fvecs(p)

    def test_gist_split(self, tmp_path, rng):
        learn = rng.standard_normal((5, 8)).astype(np.float32)
        base = rng.standard_normal((5, 12)).astype(np.float32)
        write_fvecs(tmp_path / "gist_learn.fvecs", learn)
        write_fvecs(tmp_path / "gist_base.fvecs", base)
        ds = load_gist(tmp_path, n_train=6, n_test=4)
        np.testing.assert_array_equal(ds.train, learn[:, :6])
        np.testing.assert_array_equal(ds.test, base[:, :4])
        swapped = load_gist(tmp_path, n_train=6, n_test=4, split="base")
        np.testing.assert_array_equal(swapped.train, base[:, :6])
        with pytest.raises(DomainError):
            load_gist(tmp_path, split="other")
