import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlstc.errors import DomainError
from mlstc.metrics import RDPoint, empirical_ternary_rate, measure_distortion, symbol_entropy


class TestMeasureDistortion:
    def test_identical(self, rng):
        a = rng.standard_normal((5, 7))
        assert measure_distortion(a, a) == 0.0

    def test_zero_reconstruction(self, rng):
        a = rng.standard_normal((10, 20_000))
        assert measure_distortion(a, np.zeros_like(a)) == pytest.approx(1.0, abs=0.02)

    def test_single_vector(self):
        assert measure_distortion(np.array([[3.0], [4.0]]), np.zeros((2, 1))) == pytest.approx(12.5)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            measure_distortion(np.zeros((2, 3)), np.zeros((3, 2)))


class TestEntropy:
    def test_binary_equiprobable(self):
        codes = np.array([[1, -1, 1, -1]])
        assert empirical_ternary_rate(codes) == pytest.approx(1.0)

    def test_uniform_ternary(self):
        codes = np.array([[1, -1, 0]])
        assert symbol_entropy(codes)[0] == pytest.approx(math.log2(3))

    def test_constant(self):
        assert empirical_ternary_rate(np.zeros((3, 10), dtype=np.int8)) == 0.0

    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=50))
    def test_bounds(self, symbols):
        h = symbol_entropy(np.array([symbols]))[0]
        assert 0.0 <= h <= math.log2(3) + 1e-12


class TestRDPoint:
    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            RDPoint("stc", -0.1, 0.5)
        with pytest.raises(DomainError):
            RDPoint("stc", 0.1, float("nan"))

    def test_row_formatting(self):
        p = RDPoint("mlstc", 0.5, 0.25, layers_used=2, lambda_schedule=[1.0, 0.5], dataset="iid", seed=4)
        row = p.as_row()
        assert row["lambda_schedule"] == "1.0;0.5"
        assert row["rate"] == "0.5"
        assert set(row) == set(RDPoint.columns())

    def test_sort_key_orders_by_method_then_rate(self):
        pts = [RDPoint("stc", 1.0, 0.1), RDPoint("lsh", 0.5, 0.2), RDPoint("stc", 0.25, 0.4)]
        assert [(p.method, p.rate) for p in sorted(pts, key=RDPoint.sort_key)] == [
            ("lsh", 0.5), ("stc", 0.25), ("stc", 1.0)
        ]
