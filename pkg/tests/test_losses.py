"""Loss-level tests: scalar oracles, identities, invariances, finite differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scoda.errors import ShapeError
from scoda.losses import EPS, cos_loss, space_loss, total_loss


def oracle_cos_loss(t, s):
    """Independent scalar oracle for 1 - mean row cosine."""
    B = t.shape[0]
    acc = 0.0
    for i in range(B):
        nt = math.sqrt(sum(v * v for v in t[i]))
        ns = math.sqrt(sum(v * v for v in s[i]))
        if nt < EPS or ns < EPS:
            continue
        acc += sum(a * b for a, b in zip(t[i], s[i])) / (nt * ns)
    return 1.0 - acc / B


def oracle_space_loss(t, s):
    return oracle_cos_loss(t.T, s.T)


class TestCosLoss:
    def test_identical_features_zero(self):
        rng = np.random.default_rng(0)
        f = rng.uniform(0.5, 1.5, (6, 5))
        v, g, nd = cos_loss(f, f.copy())
        assert v < 1e-12
        assert nd == 0

    def test_orthogonal_exactly_one(self):
        v, _, _ = cos_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        assert v == 1.0

    def test_derived_value(self):
        # rows of ones against unit axes: each cosine is 1/sqrt(2)
        ft = np.array([[1.0, 0.0], [0.0, 1.0]])
        fs = np.array([[1.0, 1.0], [1.0, 1.0]])
        v, _, _ = cos_loss(ft, fs)
        assert abs(v - (1.0 - 1.0 / math.sqrt(2))) < 1e-15
        assert abs(v - oracle_cos_loss(ft, fs)) < 1e-15

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-1, 1, (8, 16))
        s = rng.uniform(-1, 1, (8, 16))
        v, _, _ = cos_loss(t, s)
        assert abs(v - oracle_cos_loss(t, s)) < 1e-12

    def test_degenerate_row_counted_zero_grad(self):
        ft = np.array([[1.0, 0.0], [0.0, 0.0]])
        fs = np.array([[1.0, 0.0], [1.0, 1.0]])
        v, g, nd = cos_loss(ft, fs)
        assert nd == 1
        assert not g[1].any()
        # degenerate row contributes cosine 0: loss = 1 - (1 + 0)/2
        assert abs(v - 0.5) < 1e-15

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cos_loss(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(17)
        t = rng.uniform(0.1, 1.0, (8, 16))
        s = rng.uniform(0.1, 1.0, (8, 16))
        _, g, _ = cos_loss(t, s)
        h = 1e-6
        for idx in [(0, 0), (3, 7), (7, 15), (5, 2)]:
            sp, sm = s.copy(), s.copy()
            sp[idx] += h
            sm[idx] -= h
            num = (cos_loss(t, sp)[0] - cos_loss(t, sm)[0]) / (2 * h)
            assert abs(g[idx] - num) / max(1e-8, abs(g[idx]) + abs(num)) < 1e-6


class TestSpaceLoss:
    def test_identical_zero(self):
        rng = np.random.default_rng(5)
        f = rng.uniform(0.5, 1.5, (6, 4))
        v, _, nd = space_loss(f, f.copy())
        assert v < 1e-12 and nd == 0

    def test_orthogonal_dimension_rows(self):
        ft = np.array([[1.0, 0.0], [0.0, 1.0]])
        fs = np.array([[0.0, 1.0], [1.0, 0.0]])
        v, _, _ = space_loss(ft, fs)
        assert v == 1.0

    def test_column_scaling_preserved_directions(self):
        ft = np.array([[2.0, 0.0], [0.0, 1.0]])
        fs = np.array([[1.0, 0.0], [0.0, 3.0]])
        v, _, _ = space_loss(ft, fs)
        assert v < 1e-15

    def test_duality_bit_exact(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a = rng.standard_normal((5, 7))
            b = rng.standard_normal((5, 7))
            assert space_loss(a, b)[0] == cos_loss(a.T.copy(), b.T.copy())[0]

    def test_matches_oracle_random(self):
        rng = np.random.default_rng(23)
        t = rng.uniform(-1, 1, (8, 16))
        s = rng.uniform(-1, 1, (8, 16))
        v, _, _ = space_loss(t, s)
        assert abs(v - oracle_space_loss(t, s)) < 1e-12

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(29)
        t = rng.uniform(0.1, 1.0, (8, 16))
        s = rng.uniform(0.1, 1.0, (8, 16))
        _, g, _ = space_loss(t, s)
        h = 1e-6
        for idx in [(0, 0), (2, 11), (7, 15), (4, 4)]:
            sp, sm = s.copy(), s.copy()
            sp[idx] += h
            sm[idx] -= h
            num = (space_loss(t, sp)[0] - space_loss(t, sm)[0]) / (2 * h)
            assert abs(g[idx] - num) / max(1e-8, abs(g[idx]) + abs(num)) < 1e-6

    def test_zero_column_counted(self):
        ft = np.array([[1.0, 0.0], [2.0, 0.0]])
        fs = np.array([[1.0, 1.0], [2.0, 1.0]])
        _, g, nd = space_loss(ft, fs)
        assert nd == 1
        assert not g[:, 1].any()


class TestTotalLoss:
    def test_lambda_zero_equals_cos(self):
        rng = np.random.default_rng(2)
        t = rng.uniform(0.1, 1.0, (6, 8))
        s = rng.uniform(0.1, 1.0, (6, 8))
        lv, g, _ = total_loss(t, s, 0.0)
        cv, cg, _ = cos_loss(t, s)
        assert lv.total == cv
        assert np.array_equal(g, cg)
        # both components are still reported
        assert lv.space_component == space_loss(t, s)[0]

    def test_identical_any_lambda(self):
        f = np.random.default_rng(4).uniform(0.5, 1.0, (5, 5))
        lv, _, _ = total_loss(f, f.copy(), 3.7)
        assert lv.total < 1e-11

    def test_weighted_sum_of_derived_cases(self):
        ft = np.array([[1.0, 0.0], [0.0, 1.0]])
        fs = np.array([[1.0, 1.0], [1.0, 1.0]])
        lv, _, _ = total_loss(ft, fs, 1.0)
        cv, _, _ = cos_loss(ft, fs)
        sv, _, _ = space_loss(ft, fs)
        assert abs(lv.total - (cv + sv)) < 1e-15

    def test_composition_invariant(self):
        rng = np.random.default_rng(8)
        t = rng.standard_normal((7, 9))
        s = rng.standard_normal((7, 9))
        for lam in (0.0, 0.5, 1.0, 2.5):
            lv, _, _ = total_loss(t, s, lam)
            assert abs(lv.total - (lv.cos_component + lam * lv.space_component)) < 1e-12

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            total_loss(np.ones((2, 2)), np.ones((2, 2)), -0.1)

    def test_gradient_is_weighted_sum(self):
        rng = np.random.default_rng(12)
        t = rng.uniform(0.1, 1.0, (5, 6))
        s = rng.uniform(0.1, 1.0, (5, 6))
        _, g, _ = total_loss(t, s, 0.7)
        _, cg, _ = cos_loss(t, s)
        _, sg, _ = space_loss(t, s)
        assert np.allclose(g, cg + 0.7 * sg, atol=1e-15)


class TestInvariances:
    def test_non_invariance_witness(self):
        # column scaling changes cos_loss; row scaling changes space_loss
        t = np.array([[1.0, 1.0], [1.0, -1.0]])
        s = np.array([[1.0, 2.0], [2.0, 1.0]])
        base_cos = cos_loss(t, s)[0]
        s_col = s.copy()
        s_col[:, 0] *= 5.0
        assert abs(cos_loss(t, s_col)[0] - base_cos) > 1e-3
        base_space = space_loss(t, s)[0]
        s_row = s.copy()
        s_row[0] *= 5.0
        assert abs(space_loss(t, s_row)[0] - base_space) > 1e-3

    def test_value_symmetry(self):
        rng = np.random.default_rng(31)
        a = rng.uniform(-1, 1, (6, 9))
        b = rng.uniform(-1, 1, (6, 9))
        assert abs(cos_loss(a, b)[0] - cos_loss(b, a)[0]) < 1e-12
        assert abs(space_loss(a, b)[0] - space_loss(b, a)[0]) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_row_scale_invariance_cos(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.1, 1.0, (4, 6))
    s = rng.uniform(0.1, 1.0, (4, 6))
    base = cos_loss(t, s)[0]
    scales = rng.uniform(0.1, 10.0, 4)
    assert abs(cos_loss(t * scales[:, None], s)[0] - base) < 1e-12
    assert abs(cos_loss(t, s * scales[:, None])[0] - base) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_col_scale_invariance_space(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.1, 1.0, (4, 6))
    s = rng.uniform(0.1, 1.0, (4, 6))
    base = space_loss(t, s)[0]
    scales = rng.uniform(0.1, 10.0, 6)
    assert abs(space_loss(t * scales[None, :], s)[0] - base) < 1e-12
    assert abs(space_loss(t, s * scales[None, :])[0] - base) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_range_and_duality(seed):
    rng = np.random.default_rng(seed)
    B, d = int(rng.integers(1, 9)), int(rng.integers(1, 9))
    t = rng.standard_normal((B, d))
    s = rng.standard_normal((B, d))
    cv, _, _ = cos_loss(t, s)
    sv, _, _ = space_loss(t, s)
    assert 0.0 <= cv <= 2.0
    assert 0.0 <= sv <= 2.0
    assert sv == cos_loss(t.T.copy(), s.T.copy())[0]
