import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from patchpoly.field import PolygonField, forward, upsample_nearest
from patchpoly.geometry import regular_polygon_triangulation
from patchpoly.gradcheck import check_seed, finite_difference, random_instance, relative_errors
from patchpoly.loss import (
    BCE_EPS,
    bce_loss,
    bce_loss_grad,
    dice_loss,
    dice_loss_grad,
    field_loss,
    loss_gradients,
    total_loss,
)
from patchpoly.raster import SoftRasterConfig

unit = st.floats(0.0, 1.0)


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


class TestDice:
    def test_perfect(self):
        assert dice_loss(np.ones((3, 5)), np.ones((3, 5))) == 0.0

    def test_all_missed(self):
        assert dice_loss(np.ones(4), np.zeros(4)) == pytest.approx(0.8, abs=1e-12)

    def test_half(self):
        assert dice_loss([1, 0], [0.5, 0.5]) == pytest.approx(1 / 3, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dice_loss(np.ones(4), np.ones(5))

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 12, elements=st.sampled_from([0.0, 1.0])), arrays(float, 12, elements=unit))
    def test_range_and_formula(self, y, p):
        d = dice_loss(y, p)
        assert 0.0 <= d < 1.0
        tp, fp, fn = np.sum(y * p), np.sum((1 - y) * p), np.sum(y * (1 - p))
        assert d == pytest.approx(1 - (2 * tp + 1) / (2 * tp + fn + fp + 1), abs=1e-12)
        if d == 0.0:
            assert fp == 0.0 and fn == 0.0

    def test_gradient(self):
        rng = np.random.default_rng(0)
        y = (rng.uniform(size=(6, 6)) > 0.5).astype(float)
        p = rng.uniform(size=(6, 6))
        np.testing.assert_allclose(dice_loss_grad(y, p), numeric_grad(lambda q: dice_loss(y, q), p),
                                   rtol=1e-6, atol=1e-9)


class TestBCE:
    def test_half(self):
        assert bce_loss([1.0], [0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_wrong(self):
        assert bce_loss([0.0], [0.9]) == pytest.approx(-math.log(0.1), abs=1e-12)

    def test_clamped_perfect(self):
        y = np.array([0.0, 1.0, 1.0, 0.0])
        assert 0.0 <= bce_loss(y, y) <= -math.log(1 - BCE_EPS) + 1e-15

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            bce_loss(np.ones(4), np.ones((2, 3)))

    def test_is_mean(self):
        assert bce_loss(np.ones(10), np.full(10, 0.5)) == pytest.approx(math.log(2))

    def test_gradient(self):
        rng = np.random.default_rng(1)
        y = (rng.uniform(size=(5, 5)) > 0.5).astype(float)
        p = rng.uniform(0.05, 0.95, size=(5, 5))
        np.testing.assert_allclose(bce_loss_grad(y, p), numeric_grad(lambda q: bce_loss(y, q), p),
                                   rtol=1e-6, atol=1e-9)

    def test_gradient_zero_where_clamped(self):
        g = bce_loss_grad(np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]))
        assert np.all(g == 0.0)

    def test_monotone(self):
        rng = np.random.default_rng(2)
        for p in rng.uniform(0.01, 0.99, 100):
            up = bce_loss([1.0], [p + 1e-6]) - bce_loss([1.0], [p - 1e-6])
            down = bce_loss([0.0], [p + 1e-6]) - bce_loss([0.0], [p - 1e-6])
            assert up < 0 < down

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 8, elements=st.sampled_from([0.0, 1.0])), arrays(float, 8, elements=unit))
    def test_nonnegative(self, y, p):
        assert bce_loss(y, p) >= 0.0

    def test_upsampled_equals_low_resolution(self):
        # BCE is affine in the target, so the block mean of Y carries all of it
        rng = np.random.default_rng(3)
        m = rng.uniform(0.02, 0.98, (3, 4))
        y = (rng.uniform(size=(24, 32)) > 0.6).astype(float)
        y_low = y.reshape(3, 8, 4, 8).mean(axis=(1, 3))
        assert bce_loss(y, upsample_nearest(m, 8)) == pytest.approx(bce_loss(y_low, m), rel=1e-12)


class TestTotal:
    def test_perfect(self):
        y = (np.random.default_rng(4).uniform(size=(8, 8)) > 0.5).astype(float)
        assert total_loss(y, y, y).total <= 1e-6

    def test_half_gates(self):
        y = (np.random.default_rng(5).uniform(size=(8, 8)) > 0.5).astype(float)
        br = total_loss(np.full((8, 8), 0.5), y, y)
        assert br.total == pytest.approx(math.log(2), abs=1e-12)

    def test_composition(self):
        br = total_loss(np.ones(4), np.zeros(4), np.ones(4))
        assert br.dice == pytest.approx(0.8) and br.bce <= 1e-6
        assert br.total == br.bce + br.dice


class TestFieldGradients:
    def test_stationary_at_perfect_fit(self):
        # gates closed exactly (sigmoid(-40) == 0): M_o = up_m = y = 0
        rng = np.random.default_rng(6)
        f = PolygonField(2, 2, 4, 8, rng.normal(size=(2, 2, 4, 2)), np.full((2, 2), -40.0))
        tri = regular_polygon_triangulation(4)
        m_o, up_m, _ = forward(f, tri, SoftRasterConfig())
        y = np.zeros((16, 16))
        assert np.all(m_o == y) and np.all(up_m == y)
        br, g = loss_gradients(f, tri, SoftRasterConfig(), y)
        assert br.total <= 1e-6 and g.norm() <= 1e-6

    def test_target_shape_checked(self):
        field, y = random_instance(0)
        with pytest.raises(ValueError):
            loss_gradients(field, regular_polygon_triangulation(field.k), SoftRasterConfig(), y[:8])

    @pytest.mark.parametrize("seed", range(20))
    def test_finite_differences(self, seed):
        assert check_seed(seed).passed(1e-3)

    @pytest.mark.parametrize("seed", range(3))
    def test_finite_differences_k4(self, seed):
        field, y = random_instance(seed, k=4)
        tri = regular_polygon_triangulation(4)
        cfg = SoftRasterConfig()
        _, g = loss_gradients(field, tri, cfg, y)
        analytic = np.concatenate([g.vertex_params.ravel(), g.gate_logits.ravel()])
        assert np.nanmax(relative_errors(analytic, finite_difference(field, tri, cfg, y))) <= 1e-3

    def test_gate_pushed_up_inside_object(self):
        tri = regular_polygon_triangulation(4)
        edge = np.arctanh(1 - 1e-9)
        params = np.broadcast_to(np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) * edge,
                                 (2, 2, 4, 2)).copy()
        f = PolygonField(2, 2, 4, 8, params, np.zeros((2, 2)))
        y = np.zeros((16, 16))
        y[:8, :8] = 1.0
        cfg = SoftRasterConfig()
        _, g = loss_gradients(f, tri, cfg, y)
        fd = finite_difference(f, tri, cfg, y)[-4:].reshape(2, 2)
        assert g.gate_logits[0, 0] < 0 and fd[0, 0] < 0
        # patches with no object are pushed down
        assert np.all(g.gate_logits.ravel()[1:] > 0)

    def test_field_loss_matches_total(self):
        field, y = random_instance(7)
        tri = regular_polygon_triangulation(field.k)
        br, _ = loss_gradients(field, tri, SoftRasterConfig(), y)
        assert field_loss(field, tri, SoftRasterConfig(), y) == br
