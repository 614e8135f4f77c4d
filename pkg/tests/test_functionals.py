"""Tests for the quadrature functionals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from geokit.bodies import StarBody, make_ball, make_ellipsoid, random_smooth_body
from geokit.errors import ArityError, DegenerateBodyError, GridMismatchError, UnsupportedError
from geokit.functionals import (
    asp_i,
    asp_i_optimal_star,
    asp_i_variational,
    body_volume,
    classical_mixed_volume_2d,
    classical_mixed_volume_nd,
    curvature_image_residual,
    dual_mixed_volume,
    dual_mixed_volume_i,
    exponent,
    lp_curvature,
    mixed_p_affine,
    optimal_star,
    p_curvature_image,
    p_mixed_volume,
    p_mixed_volume_multi,
    p_surface_area,
    polar_volume,
    power_product,
    variational_value,
    volume_radial,
)
from geokit.models import FunctionalValue, PExponent


class TestExponent:
    def test_regimes(self):
        assert PExponent(p=1.0, n=2).regime == "positive"
        assert PExponent(p=0.0, n=2).regime == "zero"
        assert PExponent(p=-1.0, n=2).regime == "neg-high"
        assert PExponent(p=-3.0, n=2).regime == "neg-low"

    def test_minus_n_rejected(self):
        with pytest.raises(ValidationError):
            exponent(-2.0, 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ArityError):
            exponent(PExponent(p=1.0, n=3), 2)


class TestVolumes:
    def test_ball(self, circle_grid):
        ball = make_ball(circle_grid, 2.0)
        assert body_volume(ball).value == pytest.approx(4 * math.pi)
        assert polar_volume(ball).value == pytest.approx(math.pi / 4)

    def test_resolution_independent(self, circle_grid, fine_circle_grid):
        coarse = body_volume(random_smooth_body(circle_grid, seed=30))
        fine = body_volume(random_smooth_body(fine_circle_grid, seed=30))
        assert coarse.value == pytest.approx(fine.value, rel=1e-12)
        assert coarse.err < 1e-10

    def test_value_kind(self, circle_grid):
        fv = body_volume(make_ball(circle_grid))
        assert fv.kind == "quadrature"
        assert fv.meta["functional"] == "body_volume"
        assert fv.meta["resolution"] == 256

    def test_radial_volume(self, sphere_grid):
        star = StarBody(sphere_grid, np.full(sphere_grid.size, 2.0))
        assert volume_radial(star).value == pytest.approx(32 * math.pi / 3)

    def test_dual_mixed_volume_of_copies(self, circle_grid):
        star = StarBody(circle_grid, 1.0 + 0.2 * np.cos(circle_grid.angles) ** 2)
        assert dual_mixed_volume([star, star]).value == pytest.approx(volume_radial(star).value)

    def test_dual_mixed_volume_arity(self, circle_grid):
        star = StarBody(circle_grid, np.ones(circle_grid.size))
        with pytest.raises(ArityError):
            dual_mixed_volume([star])

    def test_dual_mixed_volume_i_endpoints(self, circle_grid):
        a = StarBody(circle_grid, np.ones(circle_grid.size))
        b = StarBody(circle_grid, np.full(circle_grid.size, 2.0))
        assert dual_mixed_volume_i(a, b, 0.0).value == pytest.approx(math.pi)
        assert dual_mixed_volume_i(a, b, 2.0).value == pytest.approx(4 * math.pi)

    def test_grid_mismatch(self, circle_grid, coarse_circle_grid):
        with pytest.raises(GridMismatchError):
            p_mixed_volume(make_ball(circle_grid), make_ball(coarse_circle_grid), 1.0)


class TestMixedVolumes:
    def test_p_mixed_volume_of_body_with_itself(self, circle_grid):
        body = random_smooth_body(circle_grid, seed=3)
        for p in (2.0, 0.5, -1.0, -5.0):
            assert p_mixed_volume(body, body, p).value == pytest.approx(
                body_volume(body).value, rel=1e-12)

    def test_surface_area_of_ball(self, circle_grid):
        assert p_surface_area(make_ball(circle_grid), 3.0).value == pytest.approx(2 * math.pi)

    def test_multi_with_equal_entries(self, circle_grid):
        K = random_smooth_body(circle_grid, seed=8)
        Q = make_ellipsoid(circle_grid, np.diag([1.2, 0.8]))
        multi = p_mixed_volume_multi([K, K], [Q, Q], 2.0)
        assert multi.value == pytest.approx(p_mixed_volume(K, Q, 2.0).value, rel=1e-12)

    def test_lp_curvature_of_ball(self, circle_grid):
        assert np.allclose(lp_curvature(make_ball(circle_grid, 2.0), 3.0), 2.0 ** (1 - 3 + 1))

    def test_classical_2d(self, circle_grid):
        a, b = make_ball(circle_grid, 1.0), make_ball(circle_grid, 3.0)
        assert classical_mixed_volume_2d(a, b).value == pytest.approx(3 * math.pi)

    def test_classical_2d_matches_fit(self, circle_grid):
        a = random_smooth_body(circle_grid, seed=1)
        b = random_smooth_body(circle_grid, seed=2)
        exact = classical_mixed_volume_2d(a, b).value
        assert classical_mixed_volume_nd([a, b]).value == pytest.approx(exact, rel=1e-8)

    def test_classical_3d_balls(self, sphere_grid):
        balls = [make_ball(sphere_grid, r) for r in (1.0, 2.0, 0.5)]
        value = classical_mixed_volume_nd(balls).value
        assert value == pytest.approx(4 * math.pi / 3, rel=1e-8)

    def test_classical_nd_dimension(self):
        from geokit.sphere import build_grid
        grid = build_grid(4, 64, seed=0)
        with pytest.raises(UnsupportedError):
            classical_mixed_volume_nd([make_ball(grid)] * 4)


class TestAffineSurfaceArea:
    def test_ball(self, circle_grid):
        ball = make_ball(circle_grid)
        assert mixed_p_affine([ball, ball], 1.0).value == pytest.approx(2 * math.pi)

    @pytest.mark.parametrize("p", [1.0, 2.0, 0.5, 0.0, -1.0, -4.0])
    def test_ellipse_closed_form(self, circle_grid, p):
        ellipse = make_ellipsoid(circle_grid, np.array([[2.0, 0.4], [0.0, 1.0]]))
        expected = 2 * math.pi * 2.0 ** ((2 - p) / (2 + p))
        assert mixed_p_affine([ellipse, ellipse], p).value == pytest.approx(expected, rel=1e-10)

    def test_asp_i_endpoints(self, circle_grid):
        K = random_smooth_body(circle_grid, seed=5)
        L = random_smooth_body(circle_grid, seed=6)
        assert asp_i(K, L, 2.0, 0.0).value == pytest.approx(mixed_p_affine([K, K], 2.0).value)
        assert asp_i(K, L, 2.0, 2.0).value == pytest.approx(mixed_p_affine([L, L], 2.0).value)

    @pytest.mark.parametrize("form", ["dual", "product", "shared"])
    def test_variational_value_at_optimal_star(self, circle_grid, form):
        K = random_smooth_body(circle_grid, seed=12)
        L0 = optimal_star([K, K], 1.5)
        value = variational_value([K, K], [L0, L0], 1.5, form)
        assert value.value == pytest.approx(mixed_p_affine([K, K], 1.5).value, rel=1e-10)

    def test_asp_i_variational_at_optimal_star(self, circle_grid):
        K = random_smooth_body(circle_grid, seed=12)
        L = random_smooth_body(circle_grid, seed=13)
        Q0 = asp_i_optimal_star(K, L, 2.0, 0.7)
        value = asp_i_variational(K, L, Q0, Q0, 2.0, 0.7)
        assert value.value == pytest.approx(asp_i(K, L, 2.0, 0.7).value, rel=1e-10)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(0.5, 2.0))
    def test_variational_value_bounded_below_for_positive_p(self, seed, scale):
        from geokit.sphere import build_grid
        grid = build_grid(2, 128)
        K = random_smooth_body(grid, seed=seed)
        rho = scale * (1.0 + 0.2 * np.cos(2 * grid.angles + seed))
        star = StarBody(grid, rho)
        value = variational_value([K, K], [star, star], 1.0, "dual").value
        assert value >= mixed_p_affine([K, K], 1.0).value * (1 - 1e-9)


class TestCurvatureImage:
    def test_ball_is_fixed(self, circle_grid):
        image = p_curvature_image(make_ball(circle_grid), 2.0)
        assert np.allclose(image.rho, 1.0)

    def test_residual(self, circle_grid):
        K = random_smooth_body(circle_grid, seed=21)
        image = p_curvature_image(K, -1.0)
        assert curvature_image_residual(K, -1.0, image) < 1e-10

    def test_p_zero(self, circle_grid):
        with pytest.raises(UnsupportedError):
            p_curvature_image(make_ball(circle_grid), 0.0)


class TestPowerProduct:
    def test_value_and_error(self):
        fv = power_product(2.0, [(FunctionalValue(value=4.0, kind="quadrature", err=0.04), 0.5)],
                           "demo")
        assert fv.value == pytest.approx(4.0)
        assert fv.err == pytest.approx(4.0 * 0.5 * 0.01)

    def test_nonpositive(self):
        with pytest.raises(DegenerateBodyError):
            power_product(1.0, [(FunctionalValue(value=0.0, kind="quadrature"), 1.0)], "demo")
