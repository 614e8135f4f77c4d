"""Tests for sphere grids and quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geokit.errors import GridMismatchError, UnsupportedError
from geokit.sphere import (
    ball_volume,
    build_grid,
    check_same_grid,
    differentiate_periodic,
    grid_for,
    integrate,
    integrate_with_error,
    resample_periodic,
    sphere_measure,
)


class TestConstants:
    def test_sphere_measure(self):
        assert sphere_measure(2) == pytest.approx(2 * math.pi)
        assert sphere_measure(3) == pytest.approx(4 * math.pi)

    def test_ball_volume(self):
        assert ball_volume(2) == pytest.approx(math.pi)
        assert ball_volume(3) == pytest.approx(4 * math.pi / 3)
        assert ball_volume(4) == pytest.approx(math.pi**2 / 2)


class TestBuildGrid:
    @pytest.mark.parametrize("dim,resolution", [(2, 64), (3, 12)])
    def test_weights_sum_to_sphere_measure(self, dim, resolution):
        grid = build_grid(dim, resolution)
        assert grid.total_measure == pytest.approx(sphere_measure(dim), rel=1e-12)

    def test_nodes_are_unit(self, sphere_grid):
        assert np.allclose(np.linalg.norm(sphere_grid.nodes, axis=1), 1.0)

    def test_cached(self):
        assert build_grid(2, 128) is build_grid(2, 128)

    def test_monte_carlo_needs_seed(self):
        with pytest.raises(UnsupportedError):
            build_grid(4, 256)

    def test_monte_carlo_seeded(self):
        a = build_grid(4, 256, seed=3)
        b = build_grid(4, 256, seed=3)
        assert np.array_equal(a.nodes, b.nodes)
        assert a.exactness is None

    def test_odd_planar_resolution_rejected(self):
        with pytest.raises(UnsupportedError):
            build_grid(2, 65)

    def test_grids_are_read_only(self, circle_grid):
        with pytest.raises(ValueError):
            circle_grid.weights[0] = 1.0

    def test_exactness(self):
        assert build_grid(2, 64).exactness == 63
        assert build_grid(3, 10).exactness == 19

    def test_grid_for(self):
        assert grid_for(2, 256).size == 256
        assert grid_for(3, 256).resolution == 32
        assert grid_for(4, 64, seed=1).size == 1024


class TestCheckSameGrid:
    def test_same(self, circle_grid):
        assert check_same_grid(circle_grid, build_grid(2, 256)) is circle_grid

    def test_mismatch(self, circle_grid, coarse_circle_grid):
        with pytest.raises(GridMismatchError):
            check_same_grid(circle_grid, coarse_circle_grid)


class TestIntegrate:
    def test_cos_squared(self, circle_grid):
        theta = circle_grid.angles
        assert integrate(circle_grid, np.cos(theta) ** 2) == pytest.approx(math.pi, rel=1e-12)

    def test_polynomial_on_s2(self, sphere_grid):
        z = sphere_grid.nodes[:, 2]
        assert integrate(sphere_grid, z**2) == pytest.approx(4 * math.pi / 3, rel=1e-12)
        assert integrate(sphere_grid, z**4) == pytest.approx(4 * math.pi / 5, rel=1e-12)

    def test_error_floor_is_positive(self, circle_grid):
        value, err = integrate_with_error(circle_grid, np.ones(circle_grid.size))
        assert value == pytest.approx(2 * math.pi)
        assert 0 < err < 1e-12

    def test_error_detects_underresolution(self):
        grid = build_grid(2, 16)
        theta = grid.angles
        _, err = integrate_with_error(grid, np.cos(8 * theta))
        assert err > 1.0

    def test_wrong_length(self, circle_grid):
        with pytest.raises(GridMismatchError):
            integrate_with_error(circle_grid, np.ones(10))

    def test_non_finite(self, circle_grid):
        samples = np.ones(circle_grid.size)
        samples[3] = np.nan
        with pytest.raises(GridMismatchError):
            integrate(circle_grid, samples)

    @pytest.mark.parametrize("dim,resolution,seed", [(2, 64, None), (3, 8, None), (5, 100, 2)])
    def test_half_rule_weights(self, dim, resolution, seed):
        grid = build_grid(dim, resolution, seed=seed)
        _, weights = grid.half_rule()
        assert weights.sum() == pytest.approx(grid.total_measure, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        c0=st.floats(0.5, 3.0),
        coeffs=st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=20),
    )
    def test_trig_polynomials_integrate_exactly(self, c0, coeffs):
        grid = build_grid(2, 64)
        theta = grid.angles
        samples = c0 + sum(a * np.cos((k + 1) * theta) for k, a in enumerate(coeffs))
        assert integrate(grid, samples) == pytest.approx(2 * math.pi * c0, abs=1e-11)


class TestPeriodic:
    def test_first_derivative(self, circle_grid):
        theta = circle_grid.angles
        d = differentiate_periodic(np.sin(3 * theta), 1)
        assert np.allclose(d, 3 * np.cos(3 * theta), atol=1e-11)

    def test_second_derivative(self, circle_grid):
        theta = circle_grid.angles
        d = differentiate_periodic(np.cos(2 * theta), 2)
        assert np.allclose(d, -4 * np.cos(2 * theta), atol=1e-11)

    def test_bad_order(self, circle_grid):
        with pytest.raises(ValueError):
            differentiate_periodic(np.ones(circle_grid.size), 3)

    def test_resample(self, circle_grid):
        theta = circle_grid.angles
        samples = 1.0 + 0.3 * np.cos(3 * theta) - 0.2 * np.sin(5 * theta)
        t = np.array([0.1, 1.7, 4.2])
        expected = 1.0 + 0.3 * np.cos(3 * t) - 0.2 * np.sin(5 * t)
        assert np.allclose(resample_periodic(samples, t), expected, atol=1e-12)
