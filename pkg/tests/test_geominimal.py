"""Tests for the geominimal surface area estimators."""

import math

import numpy as np
import pytest

from geokit.bodies import LinearMap, apply_linear, make_ball, make_ellipsoid, random_smooth_body
from geokit.errors import ArityError, UnsupportedError
from geokit.functionals import asp_i, mixed_p_affine
from geokit.geominimal import (
    bracket_G,
    bracket_G_i,
    closed_form_G,
    closed_form_G_i,
    estimate_asp1,
    estimate_G,
    estimate_G_family,
    estimate_G_i,
    estimate_G_path,
    estimate_G_tilde,
    objective,
    order_chain,
    vpn_test,
)
from geokit.models import SearchConfig


@pytest.fixture
def ellipse(circle_grid):
    return make_ellipsoid(circle_grid, np.array([[1.4, 0.2], [0.0, 0.8]]))


@pytest.fixture
def blob(circle_grid):
    return random_smooth_body(circle_grid, seed=17)


class TestOrderChain:
    def test_regimes(self):
        assert order_chain(1.0, 2) == (3, 2, 1)
        assert order_chain(0.0, 2) == (3, 2, 1)
        assert order_chain(-1.0, 2) == (1, 2, 3)
        assert order_chain(-3.0, 2) == (1, 3, 2)


class TestObjective:
    def test_alpha_one_matches_diagonal_alpha_two(self, circle_grid, blob, ellipse):
        Ks = [blob, blob]
        one = objective(1, Ks, [ellipse], 2.0)
        two = objective(2, Ks, [ellipse, ellipse], 2.0)
        assert one == two

    def test_bad_alpha(self, blob):
        with pytest.raises(ArityError):
            objective(4, [blob, blob], [blob], 1.0)

    def test_competitor_count(self, blob):
        with pytest.raises(ArityError):
            objective(1, [blob, blob], [blob, blob], 1.0)

    def test_bounded_by_affine_area(self, blob, ellipse):
        asp = mixed_p_affine([blob, blob], 1.0).value
        for alpha, comps in ((1, [ellipse]), (2, [ellipse, blob]), (3, [blob, ellipse])):
            assert objective(alpha, [blob, blob], comps, 1.0) >= asp * (1 - 1e-12)


class TestEstimateG:
    @pytest.mark.parametrize("p,alpha", [
        (1.0, 1), (2.0, 2), (0.5, 3), (-0.5, 1), (-1.0, 2), (-3.0, 3),
    ])
    def test_ball_anchor(self, circle_grid, small_search, p, alpha):
        ball = make_ball(circle_grid)
        est = estimate_G(alpha, [ball, ball], p, small_search)
        assert est.value.kind == ("optimizer-upper-bound" if p > 0 else "optimizer-lower-bound")
        assert est.value.value == pytest.approx(2 * math.pi, rel=0.005)
        assert est.witness

    def test_ellipse_negative_p(self, ellipse, small_search):
        est = estimate_G(2, [ellipse, ellipse], -1.0, small_search)
        asp = mixed_p_affine([ellipse, ellipse], -1.0).value
        assert est.value.kind == "optimizer-lower-bound"
        assert est.value.value <= asp * (1 + 1e-9)
        assert est.value.value == pytest.approx(asp, rel=1e-6)

    def test_p_zero_is_closed_form(self, blob):
        est = estimate_G(3, [blob, blob], 0.0)
        assert est.value.meta["closed_form"] is True
        assert est.trace == [{"label": "closed-form"}]
        assert est.value.value == pytest.approx(mixed_p_affine([blob, blob], 0.0).value)

    def test_positive_p_upper_bound(self, blob, small_search):
        est = estimate_G_tilde(blob, 2.0, small_search)
        assert est.value.value >= mixed_p_affine([blob, blob], 2.0).value * (1 - 1e-12)
        assert len(est.trace) >= small_search.starts

    def test_trace_and_record(self, blob, small_search):
        est = estimate_G(1, [blob, blob], 1.0, small_search)
        record = est.to_record()
        assert record["alpha"] == 1
        assert record["witness"][0]["dim"] == 2
        assert all("label" in entry for entry in record["trace"])

    def test_ellipsoid_family_3d(self, sphere_grid, small_search):
        body = make_ellipsoid(sphere_grid, np.diag([1.0, 1.5, 0.7]))
        est = estimate_G(1, [body] * 3, 1.0, small_search)
        asp = mixed_p_affine([body] * 3, 1.0).value
        assert est.value.meta["family"] == "ellipsoid"
        assert est.value.value == pytest.approx(asp, rel=1e-6)

    def test_radial_grid_rejected(self, blob):
        with pytest.raises(UnsupportedError):
            estimate_G(1, [blob, blob], 1.0, SearchConfig(family="radial-grid"))


def _unimodular(angle: float, stretch: float, turn: float) -> LinearMap:
    def rotation(t):
        return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return LinearMap(rotation(angle) @ np.diag([stretch, 1.0 / stretch]) @ rotation(turn))


class TestSearchStarts:
    def test_ellipse_fit_start(self, blob, small_search):
        est = estimate_G(1, [blob, blob], 1.0, small_search)
        labels = [entry["label"] for entry in est.trace]
        assert "ellipse-fit" in labels
        assert "candidate-fit" in labels

    def test_restarts_from_best_start(self, blob, small_search):
        polished = estimate_G(1, [blob, blob], 1.0, small_search.model_copy(update={"restarts": 1}))
        plain = estimate_G(1, [blob, blob], 1.0, small_search.model_copy(update={"restarts": 0}))
        assert "restart-0" in [entry["label"] for entry in polished.trace]
        assert not any(entry["label"].startswith("restart") for entry in plain.trace)
        assert polished.value.value <= plain.value.value * (1 + 1e-12)

    def test_anisotropic_inputs_use_isotropic_frame(self, circle_grid, small_search):
        K = make_ellipsoid(circle_grid, np.diag([2.0, 0.5]))
        est = estimate_G(1, [K, K], 1.0, small_search)
        assert est.value.meta["normalized"] is True
        assert est.value.value == pytest.approx(mixed_p_affine([K, K], 1.0).value, rel=1e-6)

    def test_round_inputs_stay_in_place(self, circle_grid, small_search):
        ball = make_ball(circle_grid)
        est = estimate_G(1, [ball, ball], 1.0, small_search)
        assert est.value.meta["normalized"] is False


class TestUnimodularInvariance:
    """One body under several det-1 maps; the estimates agree to 2%."""

    MAPS = [(0.3, 1.5, -0.8), (1.1, 1.3, 0.4), (-0.7, 1.6, 2.0), (2.4, 1.2, -1.9)]

    @pytest.mark.parametrize("p", [1.0, -1.0])
    def test_estimates_agree(self, circle_grid, p):
        K = random_smooth_body(circle_grid, seed=31)
        cfg = SearchConfig()
        base = estimate_G(1, [K, K], p, cfg).value.value
        for params in self.MAPS:
            phi = _unimodular(*params)
            assert phi.det_abs == pytest.approx(1.0, rel=1e-12)
            image = apply_linear(K, phi)
            value = estimate_G(1, [image, image], p, cfg).value.value
            assert value == pytest.approx(base, rel=0.02), params


class TestPath:
    def test_keys_and_directions(self, blob, small_search):
        out = estimate_G_path(2, [blob, blob], [1.0, 0.0, -1.0], small_search)
        assert set(out) == {1.0, 0.0, -1.0}
        assert out[0.0].value.meta["closed_form"] is True
        assert out[1.0].value.kind == "optimizer-upper-bound"
        assert out[-1.0].value.kind == "optimizer-lower-bound"

    @pytest.mark.parametrize("p", [2.0, -1.0])
    def test_never_worse_than_a_lone_search(self, blob, small_search, p):
        lone = estimate_G(1, [blob, blob], p, small_search).value.value
        shared = estimate_G_path(1, [blob, blob], [p, 1.0, -0.5], small_search)[p].value.value
        if p > 0:
            assert shared <= lone * (1 + 1e-12)
        else:
            assert shared >= lone * (1 - 1e-12)


class TestEstimateFamily:
    @pytest.mark.parametrize("p", [2.0, -1.0, -3.0])
    def test_shared_pool_order(self, blob, small_search, p):
        out = estimate_G_family([blob, blob], p, small_search)
        chain = order_chain(p, 2)
        values = [out[alpha].value.value for alpha in chain]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))

    def test_without_pool(self, blob):
        cfg = SearchConfig(starts=2, max_iters=50, share_pool=False)
        out = estimate_G_family([blob, blob], 1.0, cfg, check_order=False)
        assert set(out) == {1, 2, 3}


class TestIth:
    def test_p_zero(self, blob, ellipse):
        est = estimate_G_i(1, blob, ellipse, 0.0, 0.5)
        assert est.value.value == pytest.approx(asp_i(blob, ellipse, 0.0, 0.5).value)

    def test_search(self, blob, ellipse, small_search):
        est = estimate_G_i(3, blob, ellipse, 1.0, 1.0, small_search)
        assert est.value.kind == "optimizer-upper-bound"
        assert est.value.meta["i"] == 1.0

    def test_closed_form_equal_bodies(self, ellipse):
        fv = closed_form_G_i(1, ellipse, ellipse, 2.0, 0.5)
        assert fv.value == pytest.approx(mixed_p_affine([ellipse, ellipse], 2.0).value)
        assert closed_form_G_i(2, ellipse, ellipse, 2.0, 0.5) is None


class TestClosedForms:
    def test_vpn_candidate_of_ball(self, circle_grid):
        ball = make_ball(circle_grid)
        candidate = vpn_test([ball, ball], 1.0)
        assert candidate is not None
        assert np.allclose(candidate.h, 1.0)

    def test_vpn_needs_nonzero_p(self, ellipse):
        with pytest.raises(UnsupportedError):
            vpn_test([ellipse, ellipse], 0.0)

    def test_closed_form_ellipse(self, ellipse):
        fv = closed_form_G(2, [ellipse, ellipse], 1.0)
        assert fv.meta["closed_form"] is True
        assert fv.value == pytest.approx(mixed_p_affine([ellipse, ellipse], 1.0).value)

    def test_alpha_two_unlicensed_below_minus_n(self, ellipse):
        assert closed_form_G(2, [ellipse, ellipse], -3.0) is None
        assert closed_form_G(1, [ellipse, ellipse], -3.0) is not None


class TestBrackets:
    def test_positive_p(self, blob, small_search):
        est = estimate_G(1, [blob, blob], 1.0, small_search)
        lower, upper = bracket_G(1, [blob, blob], 1.0, est)
        assert upper is est.value
        assert lower.value == pytest.approx(mixed_p_affine([blob, blob], 1.0).value)

    def test_alpha_two_below_minus_n_is_open(self, blob, small_search):
        est = estimate_G(2, [blob, blob], -3.0, small_search)
        lower, upper = bracket_G(2, [blob, blob], -3.0, est)
        assert lower is est.value
        assert upper is None

    def test_ith_licensing(self, blob, ellipse, small_search):
        est = estimate_G_i(2, blob, ellipse, 1.0, 3.0, small_search)
        lower, upper = bracket_G_i(2, blob, ellipse, 1.0, 3.0, est)
        assert lower is None
        assert upper is est.value


class TestAsp1:
    def test_not_below_affine_area(self, ellipse):
        cfg = SearchConfig(family="radial-grid", max_iters=50)
        est = estimate_asp1([ellipse, ellipse], -3.0, cfg)
        assert est.value.kind == "optimizer-lower-bound"
        assert est.value.value >= mixed_p_affine([ellipse, ellipse], -3.0).value * (1 - 1e-12)
        assert len(est.witness) == 2

    def test_regime(self, ellipse):
        with pytest.raises(UnsupportedError):
            estimate_asp1([ellipse, ellipse], -1.0)

    def test_family(self, ellipse):
        with pytest.raises(UnsupportedError):
            estimate_asp1([ellipse, ellipse], -3.0, SearchConfig(family="ellipsoid"))
