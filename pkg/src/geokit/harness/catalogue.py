"""The rule catalogue: every inequality the harness knows how to check.

Rules are grouped by the weakest verifiability among their decided parts:
two-sided rules are pure quadrature, one-sided rules put an estimator on at
least one side, ORDER is structural.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence

import numpy as np

from geokit.bodies import (
    LinearMap,
    SmoothBody,
    StarBody,
    apply_linear,
    make_ball,
    make_ellipsoid,
    polar_body,
    polar_radial,
    radial_function,
    random_smooth_body,
    random_star_body,
    recenter,
)
from geokit.errors import DegenerateBodyError, SkippedCaseError, UnknownRuleError
from geokit.functionals import (
    asp_i,
    asp_i_optimal_star,
    asp_i_variational,
    body_volume,
    classical_mixed_volume_2d,
    classical_mixed_volume_nd,
    dual_mixed_volume,
    dual_mixed_volume_i,
    mixed_p_affine,
    optimal_star,
    p_curvature_image,
    p_mixed_volume_multi,
    p_surface_area,
    polar_volume,
    variational_value,
    volume_radial,
)
from geokit.geominimal import (
    GeoEstimate,
    bracket_G,
    bracket_G_i,
    closed_form_G,
    estimate_asp1,
    estimate_G,
    estimate_G_family,
    estimate_G_i,
    estimate_G_path,
    order_chain,
    vpn_test,
    vpn_test_i,
)
from geokit.harness.rules import (
    CaseContext,
    CaseInputs,
    CaseKey,
    Evaluation,
    Part,
    Rule,
)
from geokit.harness.verdict import Bound, minimum, product
from geokit.models import FunctionalValue, SearchConfig
from geokit.sphere import ball_volume

logger = logging.getLogger(__name__)

# Relative margin applied to containment radii.
CONTAINMENT_RTOL = 1e-9
FORMS = ("dual", "product", "shared")
# Agreement demanded of two independent searches on SL(n)-related inputs.
ESTIMATOR_RTOL = 0.02


# --- shared helpers ------------------------------------------------------------


def _nw(n: int) -> float:
    return n * ball_volume(n)


def _q(fv: FunctionalValue) -> Bound:
    return Bound.measured(fv)


def _geo(
    alpha: int,
    Ks: Sequence[SmoothBody],
    p: float,
    cfg: SearchConfig,
    extra=(),
) -> tuple[GeoEstimate, Bound]:
    est = estimate_G(alpha, Ks, p, cfg, extra)
    lower, upper = bracket_G(alpha, Ks, p, est)
    return est, Bound.bracket(lower, upper, est.value)


def _geo_path(
    alpha: int,
    Ks: Sequence[SmoothBody],
    ps: Sequence[float],
    cfg: SearchConfig,
) -> list[tuple[GeoEstimate, Bound]]:
    """_geo at each p, in the order given, with witnesses shared across p."""
    estimates = estimate_G_path(alpha, Ks, ps, cfg)
    out = []
    for p in ps:
        est = estimates[float(p)]
        lower, upper = bracket_G(alpha, Ks, p, est)
        out.append((est, Bound.bracket(lower, upper, est.value)))
    return out


def _geo_i(
    alpha: int,
    K: SmoothBody,
    L: SmoothBody,
    p: float,
    i: float,
    cfg: SearchConfig,
) -> tuple[GeoEstimate, Bound]:
    est = estimate_G_i(alpha, K, L, p, i, cfg)
    lower, upper = bracket_G_i(alpha, K, L, p, i, est)
    return est, Bound.bracket(lower, upper, est.value)


def _mixed_volume(Ks: Sequence[SmoothBody]) -> FunctionalValue:
    if Ks[0].dim == 2:
        return classical_mixed_volume_2d(Ks[0], Ks[1])
    return classical_mixed_volume_nd(Ks)


def _support_range(body: SmoothBody) -> tuple[float, float]:
    """(min, max) of h_K over the whole sphere, from the exact description when present."""
    support = body.support
    if len(support.ellipsoid_sum) == 1:
        sv = np.linalg.svd(support.ellipsoid_sum[0], compute_uv=False)
        return float(sv.min()), float(sv.max())
    if support.fourier is not None:
        m = 16 * support.grid.size
        h = support.fourier(2.0 * np.pi * np.arange(m) / m)
        return float(h.min()), float(h.max())
    return float(support.h.min()), float(support.h.max())


def _tilde_ball(n: int, p: float, r: float) -> Bound:
    """G̃_p(rB) = nω_n r^{n(n-p)/(n+p)}."""
    return Bound.exact(_nw(n) * r ** (n * (n - p) / (n + p)))


def _estimate_details(**estimates: GeoEstimate) -> dict[str, float]:
    out = {}
    for name, est in estimates.items():
        out[name] = est.value.value
        if est.budget_exhausted:
            out[f"{name}_budget_exhausted"] = 1.0
    return out


# --- regime filters --------------------------------------------------------------


def _p_pos(key: CaseKey, n: int) -> bool:
    return key.p > 0


def _p_nonneg(key: CaseKey, n: int) -> bool:
    return key.p >= 0


def _p_nonzero(key: CaseKey, n: int) -> bool:
    return key.p != 0


def _p_neg(key: CaseKey, n: int) -> bool:
    return key.p < 0


def _p_above_minus_n(key: CaseKey, n: int) -> bool:
    return key.p > -n and key.p != 0


def _p_neg_high(key: CaseKey, n: int) -> bool:
    return -n < key.p < 0


def _p_neg_low(key: CaseKey, n: int) -> bool:
    return key.p < -n


def _licensed(key: CaseKey, n: int) -> bool:
    """Closed forms exist for every α above -n and for α ∈ {1,3} below."""
    return key.p != 0 and not (key.p < -n and key.alpha == 2)


# --- generators ------------------------------------------------------------------


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _spd(rng: np.random.Generator, n: int, spread: float = 0.35) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * np.exp(spread * rng.standard_normal(n))) @ q.T


def _linear_map(rng: np.random.Generator, n: int, unimodular: bool) -> LinearMap:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    m = q @ _spd(rng, n)
    if unimodular:
        m = m / abs(np.linalg.det(m)) ** (1.0 / n)
    else:
        m = m * rng.uniform(0.6, 1.5)
    return LinearMap(m)


def _centered(body: SmoothBody) -> SmoothBody:
    if len(body.support.ellipsoid_sum) == 1:
        return body
    try:
        return recenter(body)
    except DegenerateBodyError as e:
        raise SkippedCaseError(f"recentering failed: {e}") from e


def _convex_bodies(
    ctx: CaseContext,
    rng: np.random.Generator,
    count: int,
    centered: bool = False,
) -> tuple[SmoothBody, ...]:
    """Random smooth bodies, or dilates of one ellipsoid on equality cases."""
    grid = ctx.grid()
    if ctx.equality_case:
        A = _spd(rng, ctx.dim)
        return tuple(make_ellipsoid(grid, s * A) for s in rng.uniform(0.7, 1.3, count))
    if ctx.dim == 2:
        bodies = [random_smooth_body(grid, _seed(rng)) for _ in range(count)]
    else:
        bodies = [make_ellipsoid(grid, _spd(rng, ctx.dim)) for _ in range(count)]
    if centered:
        bodies = [_centered(b) for b in bodies]
    return tuple(bodies)


def _stars(ctx: CaseContext, rng: np.random.Generator, count: int) -> tuple[StarBody, ...]:
    grid = ctx.grid()
    if ctx.equality_case:
        base = random_star_body(grid, _seed(rng))
        return tuple(StarBody(grid, s * base.rho) for s in rng.uniform(0.7, 1.3, count))
    return tuple(random_star_body(grid, _seed(rng)) for _ in range(count))


def _ellipsoids(ctx: CaseContext, rng: np.random.Generator, count: int) -> tuple[SmoothBody, ...]:
    grid = ctx.grid()
    if ctx.equality_case:
        return tuple(make_ball(grid, r) for r in rng.uniform(0.7, 1.3, count))
    return tuple(make_ellipsoid(grid, _spd(rng, ctx.dim)) for _ in range(count))


def _bodies_generator(count=None, centered: bool = False):
    def generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
        rng = ctx.rng()
        bodies = _convex_bodies(ctx, rng, count or ctx.dim, centered=centered)
        return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index)
    return generate


# --- AFFINE ----------------------------------------------------------------------


def _affine_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    n = ctx.dim
    if key.part == "closed-form":
        bodies = _ellipsoids(ctx, rng, n)
        if key.p != 0 and vpn_test(bodies, key.p) is None:
            bodies = (bodies[0],) * n
        phi = _linear_map(rng, n, unimodular=False)
    else:
        bodies = _convex_bodies(ctx, rng, n)
        phi = _linear_map(rng, n, unimodular=True)
    return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index,
                      extra={"phi": [float(x) for x in phi.matrix.ravel()]})


def _phi(inputs: CaseInputs) -> LinearMap:
    n = inputs.dim
    return LinearMap(np.reshape(inputs.extra["phi"], (n, n)))


def _affine_closed(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    n, p, alpha = inputs.dim, inputs.p, inputs.alpha
    phi = _phi(inputs)
    Ks = list(inputs.bodies)
    image = closed_form_G(alpha, [apply_linear(K, phi) for K in Ks], p)
    base = closed_form_G(alpha, Ks, p)
    if image is None or base is None:
        raise SkippedCaseError("inputs left the closed-form class")
    factor = phi.det_abs ** ((n - p) / (n + p))
    return Evaluation(_q(image), factor * _q(base), "G(phiK)", "|det phi|^e G(K)",
                      {"det": phi.det_abs})


def _affine_estimator(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    phi = _phi(inputs)
    Ks = list(inputs.bodies)
    image = estimate_G(inputs.alpha, [apply_linear(K, phi) for K in Ks], inputs.p, cfg)
    base = estimate_G(inputs.alpha, Ks, inputs.p, cfg)
    gap = abs(image.value.value - base.value.value) / base.value.value
    return Evaluation(_q(image.value), _q(base.value), "G(phiK)", "G(K)",
                      {"relative_gap": gap, **_estimate_details(image=image, base=base)})


# --- ORDER -----------------------------------------------------------------------


def _order(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    n, p = inputs.dim, inputs.p
    family = estimate_G_family(list(inputs.bodies), p, cfg.model_copy(update={"share_pool": True}),
                               check_order=False)
    chain = order_chain(p, n)
    values = {alpha: family[alpha].value.value for alpha in chain}
    links = list(zip(chain, chain[1:]))
    lo, hi = min(links, key=lambda link: (values[link[1]] - values[link[0]]) / values[link[1]])
    details = {f"G{alpha}": values[alpha] for alpha in chain}
    details["link_low_alpha"] = float(lo)
    return Evaluation(Bound.exact(values[lo]), Bound.exact(values[hi]),
                      f"G^({lo})", f"G^({hi})", details)


# --- ASREL -----------------------------------------------------------------------


def _asrel_lower(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    est = estimate_G(inputs.alpha, Ks, inputs.p, cfg)
    return Evaluation(_q(mixed_p_affine(Ks, inputs.p)), _q(est.value), "as_p", "G(witness)",
                      _estimate_details(G=est))


def _asrel_upper(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    est = estimate_G(inputs.alpha, Ks, inputs.p, cfg)
    return Evaluation(_q(est.value), _q(mixed_p_affine(Ks, inputs.p)), "G(witness)", "as_p",
                      _estimate_details(G=est))


def _asrel_asp1(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    est = estimate_G(inputs.alpha, Ks, inputs.p, cfg)
    asp1 = estimate_asp1(Ks, inputs.p, cfg.model_copy(update={"family": "radial-grid"}))
    details = _estimate_details(G=est)
    details["asp1"] = asp1.value.value
    return Evaluation(_q(est.value), Bound.of(asp1.value), "G(witness)", "as_p^(1)", details)


# --- PROP31 ----------------------------------------------------------------------


def _prop31_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    bodies = _convex_bodies(ctx, rng, ctx.dim) + _stars(ctx, rng, ctx.dim)
    return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index)


def _split_stars(inputs: CaseInputs) -> tuple[list[SmoothBody], list[StarBody]]:
    n = inputs.dim
    return list(inputs.bodies[:n]), list(inputs.bodies[n:])


def _form(key: CaseKey) -> str:
    return FORMS[int(key.get("form"))]


def _prop31_closed(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks, _ = _split_stars(inputs)
    L0 = optimal_star(Ks, inputs.p)
    value = variational_value(Ks, [L0] * inputs.dim, inputs.p, _form(inputs.key))
    return Evaluation(_q(value), _q(mixed_p_affine(Ks, inputs.p)), "form(L0)", "as_p")


def _prop31_inf(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks, Ls = _split_stars(inputs)
    value = variational_value(Ks, Ls, inputs.p, _form(inputs.key))
    return Evaluation(_q(mixed_p_affine(Ks, inputs.p)), _q(value), "as_p", "form(L)")


def _prop31_sup(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks, Ls = _split_stars(inputs)
    value = variational_value(Ks, Ls, inputs.p, _form(inputs.key))
    return Evaluation(_q(value), _q(mixed_p_affine(Ks, inputs.p)), "form(L)", "as_p")


def _form_extras(n: int, ps, is_) -> list[dict[str, float]]:
    return [{"form": float(k)} for k in range(len(FORMS))]


def _sup_form_admitted(key: CaseKey, n: int) -> bool:
    # the product form is a different functional below -n
    return key.p < 0 and not (key.p < -n and _form(key) == "product")


# --- THM41 / THM42 -----------------------------------------------------------------


def _decoupled_pool(Ks: Sequence[SmoothBody], p: float) -> tuple:
    """Per-body V_p candidates as one competitor tuple, when all are convex."""
    n = Ks[0].dim
    bodies = tuple(vpn_test([K] * n, p) for K in Ks)
    if any(b is None for b in bodies):
        return ()
    return (("decoupled-candidates", bodies),)


def _ellipsoid_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    return CaseInputs(ctx.rule_id, key, _ellipsoids(ctx, rng, ctx.dim), ctx.case_index)


def _thm41(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    """Objective at the best competitor against as_p; the V_p candidate is always pooled."""
    Ks = list(inputs.bodies)
    est = estimate_G(3, Ks, inputs.p, cfg, extra=_decoupled_pool(Ks, inputs.p))
    return Evaluation(_q(est.value), _q(mixed_p_affine(Ks, inputs.p)), "G^(3)", "as_p",
                      _estimate_details(G=est))


def _thm42_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    bodies = _ellipsoids(ctx, rng, ctx.dim)
    if key.i is None:
        if vpn_test(bodies, key.p) is None:
            bodies = (bodies[0],) * ctx.dim
    elif vpn_test_i(bodies[0], bodies[1], key.p, key.i) is None:
        bodies = (bodies[0],) * ctx.dim
    return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index)


def _thm42(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    est = estimate_G(inputs.alpha, Ks, inputs.p, cfg)
    return Evaluation(Bound.of(est.value), _q(mixed_p_affine(Ks, inputs.p)), "G", "as_p",
                      _estimate_details(G=est))


def _thm42_i(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    est = estimate_G_i(inputs.alpha, K, L, inputs.p, inputs.i, cfg)
    return Evaluation(Bound.of(est.value), _q(asp_i(K, L, inputs.p, inputs.i)), "G_i",
                      "as_{p,i}", _estimate_details(G_i=est))


def _licensed_i(key: CaseKey, n: int) -> bool:
    return key.p != 0 and key.alpha in (1, 3)


# --- PROP32 ----------------------------------------------------------------------


def _prop32(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    images = [p_curvature_image(K, p) for K in Ks]
    rhs = Bound.exact(n * ball_volume(n) ** (n / (n + p)))
    rhs = rhs * product([_q(volume_radial(s)) ** (-1.0 / (n + p)) for s in images])
    rhs = rhs * _q(dual_mixed_volume(images))
    return Evaluation(_q(mixed_p_affine(Ks, p)), rhs, "as_p", "curvature-image form")


# --- AF1 / AF2 -----------------------------------------------------------------------


def _m_extras(n: int, ps, is_) -> list[dict[str, float]]:
    return [{"m": float(m)} for m in range(2, n + 1)]


def _af1(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p, alpha = inputs.dim, inputs.p, inputs.alpha
    m = int(inputs.key.get("m"))
    est, lhs = _geo(alpha, Ks, p, cfg)
    factors = []
    for i in range(m):
        tuple_i = Ks[: n - m] + [Ks[n - 1 - i]] * m
        factors.append(_geo(alpha, tuple_i, p, cfg)[1])
    return Evaluation(lhs**m, product(factors), "G^m", "prod G(repeated)",
                      _estimate_details(G=est))


def _tilde_estimates(Ks: Sequence[SmoothBody], p: float, cfg: SearchConfig):
    n = Ks[0].dim
    out = []
    for K in Ks:
        est, bound = _geo(1, [K] * n, p, cfg)
        out.append((est, bound))
    return out


def _witness_pool(tildes) -> tuple:
    if any(not est.witness for est, _ in tildes):
        return ()
    return (("tilde-witnesses", tuple(est.witness[0] for est, _ in tildes)),)


def _af2(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    tildes = _tilde_estimates(Ks, p, cfg)
    est, G = _geo(inputs.alpha, Ks, p, cfg, extra=_witness_pool(tildes))
    rhs = product([bound for _, bound in tildes])
    details = _estimate_details(G=est)
    details["estimate_gap"] = math.prod(t.value.value for t, _ in tildes) - est.value.value**n
    return Evaluation(G**n, rhs, "G^n", "prod G~(K_i)", details)


# --- ISO / SANTALO / COR51 / COR52 -------------------------------------------------------


def _volume_ratios(Ks: Sequence[SmoothBody], which: str) -> Bound:
    omega = ball_volume(Ks[0].dim)
    volume = body_volume if which == "body" else polar_volume
    return product([_q(volume(K)) / omega for K in Ks])


def _iso_i(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    est, G = _geo(inputs.alpha, Ks, p, cfg)
    e = (n - p) / (n + p)
    rhs = minimum(_volume_ratios(Ks, "body") ** e, _volume_ratios(Ks, "polar") ** -e)
    return Evaluation((G / _nw(n)) ** n, rhs, "(G/nw)^n", "volume bound",
                      _estimate_details(G=est))


def _polar_stars(Ks: Sequence[SmoothBody]) -> list[StarBody]:
    return [polar_radial(K.support) for K in Ks]


def _iso_ii(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    omega = ball_volume(n)
    est, G = _geo(inputs.alpha, Ks, p, cfg)
    e = (n - p) / (n + p)
    rhs = minimum((_q(_mixed_volume(Ks)) / omega) ** e,
                  (_q(dual_mixed_volume(_polar_stars(Ks))) / omega) ** -e)
    return Evaluation(G / _nw(n), rhs, "G/nw", "mixed volume bound", _estimate_details(G=est))


def _iso_iii(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    omega = ball_volume(n)
    est, G = _geo(inputs.alpha, Ks, p, cfg)
    e = (n - p) / (n + p)
    radial = [radial_function(K.support) for K in Ks]
    polars = [polar_body(K) for K in Ks]
    rhs = minimum((_q(dual_mixed_volume(radial)) / omega) ** e,
                  (_q(_mixed_volume(polars)) / omega) ** -e)
    return Evaluation(G / _nw(n), rhs, "G/nw", "mixed volume bound", _estimate_details(G=est))


def _iso_iv(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    omega = ball_volume(n)
    est, G = _geo(2, Ks, p, cfg)
    rhs = Bound.exact(n * omega ** (2 * n / (n + p)))
    rhs = rhs * _q(dual_mixed_volume(_polar_stars(Ks))) ** ((p - n) / (n + p))
    return Evaluation(G, rhs, "G^(2)", "dual volume bound", _estimate_details(G=est))


def _santalo(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    polars = [polar_body(K) for K in Ks]
    est, G = _geo(inputs.alpha, Ks, p, cfg)
    est_polar, G_polar = _geo(inputs.alpha, polars, p, cfg)
    details = _estimate_details(G=est, G_polar=est_polar)
    details["ratio"] = est.value.value * est_polar.value.value / _nw(n) ** 2
    return Evaluation(G * G_polar, Bound.exact(_nw(n) ** 2), "G(K)G(K°)", "(nw)^2", details)


def _containing_radius(Ks: Sequence[SmoothBody]) -> float:
    return max(_support_range(K)[1] for K in Ks) * (1.0 + CONTAINMENT_RTOL)


def _contained_radius(Ks: Sequence[SmoothBody]) -> float:
    return min(_support_range(K)[0] for K in Ks) * (1.0 - CONTAINMENT_RTOL)


def _cor51(radius):
    def evaluate(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
        Ks = list(inputs.bodies)
        n, p = inputs.dim, inputs.p
        r = radius(Ks)
        est, G = _geo(inputs.alpha, Ks, p, cfg)
        details = _estimate_details(G=est)
        details["radius"] = r
        return Evaluation(G, _tilde_ball(n, p, r), "G", "G~(rB)", details)
    return evaluate


def _cor52(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, p = inputs.dim, inputs.p
    est, G = _geo(inputs.alpha, Ks, p, cfg)
    rhs = product([(_q(p_surface_area(K, p)) / _nw(n)) ** (1.0 / (n + p)) for K in Ks])
    return Evaluation(G / _nw(n), rhs, "G/nw", "p-surface-area bound", _estimate_details(G=est))


# --- CYCLIC / MONO ---------------------------------------------------------------------


def _cyclic_le(t: float, r: float, s: float, n: int) -> bool:
    return ((-n < t <= 0 <= r < s) or (-n < s <= 0 <= r < t)
            or (-n < t < r < s <= 0) or (-n < s < r < t <= 0))


def _cyclic_ge(t: float, r: float, s: float, n: int) -> bool:
    return (t < r < -n < s <= 0) or (s < r < -n < t <= 0)


def _cyclic_extras(test):
    def extras(n: int, ps: Sequence[float], is_) -> list[dict[str, float]]:
        pool = sorted(set(ps) | {0.0})
        return [{"t": t, "r": r, "s": s}
                for t, r, s in itertools.permutations(pool, 3) if test(t, r, s, n)]
    return extras


def _cyclic(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, alpha = inputs.dim, inputs.alpha
    t, r, s = (inputs.key.get(name) for name in ("t", "r", "s"))
    a = (t - r) * (n + s) / ((t - s) * (n + r))
    b = (r - s) * (n + t) / ((t - s) * (n + r))
    (est_r, G_r), (est_s, G_s), (est_t, G_t) = _geo_path(alpha, Ks, (r, s, t), cfg)
    details = _estimate_details(G_r=est_r, G_s=est_s, G_t=est_t)
    return Evaluation(G_r, G_s**a * G_t**b, "G_r", "G_s^A G_t^B", details)


def _mono_extras(n: int, ps: Sequence[float], is_) -> list[dict[str, float]]:
    pool = sorted(x for x in set(ps) if x != 0)
    out = []
    for q, p in itertools.combinations(pool, 2):
        if (0 < q) or (-n < q < 0 < p) or (-n < q and p < 0) or (p < -n):
            out.append({"q": q, "p_hi": p})
    return out


def _mono(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    Ks = list(inputs.bodies)
    n, alpha = inputs.dim, inputs.alpha
    q, p = inputs.key.get("q"), inputs.key.get("p_hi")
    zero = _q(mixed_p_affine(Ks, 0.0))
    (est_q, G_q), (est_p, G_p) = _geo_path(alpha, Ks, (q, p), cfg)
    lhs = (G_q / zero) ** ((n + q) / q)
    rhs = (G_p / zero) ** ((n + p) / p)
    return Evaluation(lhs, rhs, "(G_q/G_0)^((n+q)/q)", "(G_p/G_0)^((n+p)/p)",
                      _estimate_details(G_q=est_q, G_p=est_p))


# --- DUALH / VPH -----------------------------------------------------------------------


def _dualh_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    return CaseInputs(ctx.rule_id, key, _stars(ctx, ctx.rng(), ctx.dim), ctx.case_index)


def _dualh_mixed(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    stars = list(inputs.bodies)
    n = inputs.dim
    lhs = _q(dual_mixed_volume(stars)) ** n
    rhs = product([_q(volume_radial(s)) for s in stars])
    return Evaluation(lhs, rhs, "V~(L)^n", "prod |L_i|")


def _dualh_ith(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    q1, q2 = inputs.bodies[0], inputs.bodies[1]
    n, i = inputs.dim, inputs.i
    lhs = _q(dual_mixed_volume_i(q1, q2, i)) ** n
    rhs = _q(volume_radial(q1)) ** (n - i) * _q(volume_radial(q2)) ** i
    return Evaluation(lhs, rhs, "V~_i(Q1,Q2)^n", "|Q1|^(n-i)|Q2|^i")


def _vph_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    n = ctx.dim
    if ctx.equality_case:
        K, L = _convex_bodies(ctx, rng, 2)
        bodies = (K,) * n + (L,) * n
    else:
        bodies = _convex_bodies(ctx, rng, n) + _convex_bodies(ctx, rng, n)
    return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index)


def _vph(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    n, p = inputs.dim, inputs.p
    m = int(inputs.key.get("m"))
    Ks, Ls = list(inputs.bodies[:n]), list(inputs.bodies[n:])
    lhs = _q(p_mixed_volume_multi(Ks, Ls, p)) ** m
    factors = []
    for i in range(m):
        k = Ks[: n - m] + [Ks[n - 1 - i]] * m
        l = Ls[: n - m] + [Ls[n - 1 - i]] * m
        factors.append(_q(p_mixed_volume_multi(k, l, p)))
    return Evaluation(lhs, product(factors), "V_p(K;L)^m", "prod V_p(repeated)")


# --- PROP61 / ITHCYC / ITHISO ------------------------------------------------------------


def _prop61_generate(ctx: CaseContext, key: CaseKey) -> CaseInputs:
    rng = ctx.rng()
    bodies = _convex_bodies(ctx, rng, 2) + _stars(ctx, rng, 2)
    return CaseInputs(ctx.rule_id, key, bodies, ctx.case_index)


def _prop61_closed(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    p, i = inputs.p, inputs.i
    Q0 = asp_i_optimal_star(K, L, p, i)
    value = asp_i_variational(K, L, Q0, Q0, p, i)
    return Evaluation(_q(value), _q(asp_i(K, L, p, i)), "form(Q0,Q0)", "as_{p,i}")


def _prop61_competitor(inputs: CaseInputs) -> FunctionalValue:
    K, L, Q1, Q2 = inputs.bodies
    if inputs.key.get("shared"):
        Q2 = Q1
    return asp_i_variational(K, L, Q1, Q2, inputs.p, inputs.i)


def _prop61_inf(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    return Evaluation(_q(asp_i(K, L, inputs.p, inputs.i)), _q(_prop61_competitor(inputs)),
                      "as_{p,i}", "form(Q1,Q2)")


def _prop61_sup(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    return Evaluation(_q(_prop61_competitor(inputs)), _q(asp_i(K, L, inputs.p, inputs.i)),
                      "form(Q1,Q2)", "as_{p,i}")


def _shared_extras(n: int, ps, is_) -> list[dict[str, float]]:
    return [{"shared": 0.0}, {"shared": 1.0}]


def _ith_triples(n: int, ps, is_: Sequence[float]) -> list[dict[str, float]]:
    pool = sorted(set(is_))
    return [{"i_lo": a, "i_mid": b, "i_hi": c} for a, b, c in itertools.combinations(pool, 3)]


def _ithcyc(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    p, alpha = inputs.p, inputs.alpha
    i, j, k = (inputs.key.get(name) for name in ("i_lo", "i_mid", "i_hi"))
    est_i, G_i = _geo_i(alpha, K, L, p, i, cfg)
    est_j, G_j = _geo_i(alpha, K, L, p, j, cfg)
    est_k, G_k = _geo_i(alpha, K, L, p, k, cfg)
    details = _estimate_details(G_i=est_i, G_j=est_j, G_k=est_k)
    return Evaluation(G_j ** (k - i), G_i ** (k - j) * G_k ** (j - i),
                      "G_j^(k-i)", "G_i^(k-j) G_k^(j-i)", details)


def _ithiso_exponent(n: int, p: float, weight: float) -> float:
    return (n - p) * weight / (n * (n + p))


def _ithiso_i(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    n, p, i = inputs.dim, inputs.p, inputs.i
    omega = ball_volume(n)
    est, G = _geo_i(inputs.alpha, K, L, p, i, cfg)
    a, b = _ithiso_exponent(n, p, n - i), _ithiso_exponent(n, p, i)
    rhs = minimum((_q(body_volume(K)) / omega) ** a, (_q(polar_volume(K)) / omega) ** -a)
    rhs = rhs * minimum((_q(body_volume(L)) / omega) ** b, (_q(polar_volume(L)) / omega) ** -b)
    return Evaluation(G / _nw(n), rhs, "G_i/nw", "volume bound", _estimate_details(G_i=est))


def _ithiso_santalo(with_ball: bool):
    def evaluate(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
        K, L = inputs.bodies[0], inputs.bodies[1]
        n, p, i = inputs.dim, inputs.p, inputs.i
        if with_ball:
            L = make_ball(K.grid)
        est, G = _geo_i(inputs.alpha, K, L, p, i, cfg)
        est_polar, G_polar = _geo_i(inputs.alpha, polar_body(K), polar_body(L), p, i, cfg)
        details = _estimate_details(G_i=est, G_i_polar=est_polar)
        details["ratio"] = est.value.value * est_polar.value.value / _nw(n) ** 2
        return Evaluation(G * G_polar, Bound.exact(_nw(n) ** 2), "G_i(K,L)G_i(K°,L°)",
                          "(nw)^2", details)
    return evaluate


def _ithiso_ii(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K = inputs.bodies[0]
    n, p, i = inputs.dim, inputs.p, inputs.i
    est, G = _geo_i(inputs.alpha, K, make_ball(K.grid), p, i, cfg)
    rhs = (_q(body_volume(K)) / ball_volume(n)) ** _ithiso_exponent(n, p, n - i)
    return Evaluation(G / _nw(n), rhs, "G_i(K,B)/nw", "volume bound", _estimate_details(G_i=est))


def _ithiso_iii(inputs: CaseInputs, cfg: SearchConfig) -> Evaluation:
    K, L = inputs.bodies[0], inputs.bodies[1]
    n, p, i = inputs.dim, inputs.p, inputs.i
    omega = ball_volume(n)
    est, G = _geo_i(2, K, L, p, i, cfg)
    a, b = _ithiso_exponent(n, p, n - i), _ithiso_exponent(n, p, i)
    rhs = (_q(polar_volume(K)) / omega) ** -a * (_q(polar_volume(L)) / omega) ** -b
    return Evaluation(G / _nw(n), rhs, "G_i/nw", "polar volume bound", _estimate_details(G_i=est))


def _i_inside(key: CaseKey, n: int) -> bool:
    return 0 <= key.i <= n


def _both(*filters):
    def combined(key: CaseKey, n: int) -> bool:
        return all(f(key, n) for f in filters)
    return combined


# --- the catalogue ------------------------------------------------------------------------


def _build() -> dict[str, Rule]:
    rules = [
        Rule("AFFINE", "Affine covariance under GL(n)", (
            Part("closed-form", "=", "two-sided", _affine_closed,
                 when=lambda k, n: k.p == 0 or _licensed(k, n), alphas=(1, 2, 3)),
            Part("estimator", "=", "two-sided", _affine_estimator,
                 when=_p_above_minus_n, alphas=(1, 2, 3), rtol=ESTIMATOR_RTOL),
            Part("estimator-low", "=", "report-only", _affine_estimator,
                 when=_p_neg_low, alphas=(1, 2, 3)),
        ), _affine_generate),
        Rule("ORDER", "Ordering of the three geominimal areas", (
            Part("chain", "<=", "structural", _order, when=_p_nonzero),
        ), _bodies_generator()),
        Rule("ASREL", "Geominimal areas against the mixed p-affine surface area", (
            Part("positive", "<=", "two-sided", _asrel_lower,
                 when=_p_pos, alphas=(1, 2, 3)),
            Part("negative", "<=", "two-sided", _asrel_upper,
                 when=lambda k, n: k.p < 0 and _licensed(k, n), alphas=(1, 2, 3)),
            Part("asp1", "<=", "one-sided", _asrel_asp1,
                 when=_p_neg_low, alphas=(1, 2, 3)),
        ), _bodies_generator()),
        Rule("PROP31", "Variational forms of the mixed p-affine surface area", (
            Part("closed-form", "=", "two-sided", _prop31_closed, extras=_form_extras),
            Part("competitor-inf", "<=", "two-sided", _prop31_inf,
                 when=_p_nonneg, extras=_form_extras),
            Part("competitor-sup", "<=", "two-sided", _prop31_sup,
                 when=_sup_form_admitted, extras=_form_extras),
        ), _prop31_generate, arity=lambda n: 2 * n),
        Rule("THM41", "Dual-mixed-volume geominimal area on V_p inputs", (
            Part("identity", "=", "two-sided", _thm41, when=_p_nonzero),
        ), _ellipsoid_generate),
        Rule("THM42", "Geominimal areas on V_{p,n} inputs", (
            Part("upper", "<=", "one-sided", _thm42,
                 when=_both(_p_pos, _licensed), alphas=(1, 2, 3)),
            Part("lower", ">=", "one-sided", _thm42,
                 when=_both(_p_neg, _licensed), alphas=(1, 2, 3)),
            Part("ith-upper", "<=", "one-sided", _thm42_i, uses_i=True,
                 when=_both(_p_pos, _licensed_i), alphas=(1, 3)),
            Part("ith-lower", ">=", "one-sided", _thm42_i, uses_i=True,
                 when=_both(_p_neg, _licensed_i), alphas=(1, 3)),
        ), _thm42_generate),
        Rule("PROP32", "Mixed p-affine surface area through curvature images", (
            Part("identity", "=", "two-sided", _prop32, when=_p_nonzero),
        ), _bodies_generator()),
        Rule("AF1", "Aleksandrov-Fenchel type inequality", (
            Part("product", "<=", "one-sided", _af1,
                 when=_p_neg_high, alphas=(1, 2), extras=_m_extras),
        ), _bodies_generator()),
        Rule("AF2", "Geominimal areas against single-body geominimal areas", (
            Part("upper", "<=", "one-sided", _af2, when=_p_nonneg, alphas=(2, 3)),
            Part("lower", ">=", "one-sided", _af2, when=_p_neg_low, alphas=(2,)),
        ), _bodies_generator()),
        Rule("ISO", "Affine isoperimetric inequalities", (
            Part("volumes", "<=", "one-sided", _iso_i, when=_p_nonneg, alphas=(2, 3)),
            Part("mixed-volumes-low", "<=", "one-sided", _iso_ii,
                 when=lambda k, n: 0 <= k.p <= n, alphas=(2, 3)),
            Part("mixed-volumes-high", "<=", "one-sided", _iso_iii,
                 when=lambda k, n: k.p > n, alphas=(2, 3)),
            Part("dual-volume", ">=", "one-sided", _iso_iv, when=_p_neg_low, alphas=(2,)),
        ), _bodies_generator(centered=True)),
        Rule("SANTALO", "Santalo type inequality", (
            Part("upper", "<=", "one-sided", _santalo, when=_p_nonneg, alphas=(2, 3)),
            Part("inverse", ">=", "report-only", _santalo, when=_p_neg_low, alphas=(2,)),
        ), _bodies_generator(centered=True)),
        Rule("COR51", "Bounds for bodies inside or around a ball", (
            Part("inside", "<=", "one-sided", _cor51(_containing_radius),
                 when=lambda k, n: 0 <= k.p < n, alphas=(2, 3)),
            Part("around", "<=", "one-sided", _cor51(_contained_radius),
                 when=lambda k, n: k.p > n, alphas=(2, 3)),
            Part("inside-negative", ">=", "one-sided", _cor51(_containing_radius),
                 when=_p_neg_low, alphas=(2,)),
        ), _bodies_generator(centered=True)),
        Rule("COR52", "Bounds through p-surface areas", (
            Part("upper", "<=", "one-sided", _cor52, when=_p_nonneg, alphas=(1, 2, 3)),
            Part("lower", ">=", "one-sided", _cor52, when=_p_neg_low, alphas=(1, 2, 3)),
        ), _bodies_generator()),
        Rule("CYCLIC", "Cyclic inequality in p", (
            Part("upper", "<=", "one-sided", _cyclic, uses_p=False, alphas=(1, 2, 3),
                 extras=_cyclic_extras(_cyclic_le)),
            Part("lower", ">=", "one-sided", _cyclic, uses_p=False, alphas=(1, 2, 3),
                 extras=_cyclic_extras(_cyclic_ge)),
        ), _bodies_generator()),
        Rule("MONO", "Monotonicity of normalized geominimal areas in p", (
            Part("pair", "<=", "one-sided", _mono, uses_p=False, alphas=(1, 2, 3),
                 extras=_mono_extras),
        ), _bodies_generator()),
        Rule("DUALH", "Dual mixed volume inequalities", (
            Part("mixed", "<=", "two-sided", _dualh_mixed, uses_p=False),
            Part("ith-inner", "<=", "two-sided", _dualh_ith, uses_p=False, uses_i=True,
                 when=lambda k, n: 0 < k.i < n),
            Part("ith-outer", ">=", "two-sided", _dualh_ith, uses_p=False, uses_i=True,
                 when=lambda k, n: k.i < 0 or k.i > n),
            Part("ith-edge", "=", "two-sided", _dualh_ith, uses_p=False, uses_i=True,
                 when=lambda k, n: k.i in (0, n)),
        ), _dualh_generate),
        Rule("VPH", "Hoelder chain for multi-body p-mixed volumes", (
            Part("chain", "<=", "two-sided", _vph, extras=_m_extras),
        ), _vph_generate, arity=lambda n: 2 * n),
        Rule("PROP61", "Variational forms of the i-th mixed p-affine surface area", (
            Part("closed-form", "=", "two-sided", _prop61_closed, uses_i=True),
            Part("competitor-inf", "<=", "two-sided", _prop61_inf, uses_i=True,
                 when=_p_nonneg, extras=_shared_extras),
            Part("competitor-sup", "<=", "two-sided", _prop61_sup, uses_i=True,
                 when=_p_neg, extras=_shared_extras),
        ), _prop61_generate, arity=lambda n: 4),
        Rule("ITHCYC", "Cyclic inequality in i", (
            Part("triple", "<=", "one-sided", _ithcyc,
                 when=lambda k, n: -n < k.p <= 0, alphas=(1, 2), extras=_ith_triples),
        ), _bodies_generator(count=2), arity=lambda n: 2),
        Rule("ITHISO", "Isoperimetric inequalities for i-th geominimal areas", (
            Part("volumes", "<=", "one-sided", _ithiso_i, uses_i=True,
                 when=_both(_p_nonneg, _i_inside), alphas=(2, 3)),
            Part("santalo", "<=", "one-sided", _ithiso_santalo(False), uses_i=True,
                 when=_both(_p_nonneg, _i_inside), alphas=(2, 3)),
            Part("ball", ">=", "one-sided", _ithiso_ii, uses_i=True,
                 when=lambda k, n: -n < k.p < 0 and k.i <= 0, alphas=(1, 2)),
            Part("ball-santalo", ">=", "report-only", _ithiso_santalo(True), uses_i=True,
                 when=lambda k, n: -n < k.p < 0 and k.i <= 0, alphas=(1, 2)),
            Part("polar-volumes", ">=", "one-sided", _ithiso_iii, uses_i=True,
                 when=_both(_p_neg_low, _i_inside), alphas=(2,)),
            Part("polar-santalo", ">=", "report-only", _ithiso_santalo(False), uses_i=True,
                 when=_both(_p_neg_low, _i_inside), alphas=(2,)),
        ), _bodies_generator(count=2, centered=True), arity=lambda n: 2),
    ]
    return {rule.id: rule for rule in rules}


CATALOGUE: dict[str, Rule] = _build()


def rule_group(rule: Rule) -> str:
    """two-sided, one-sided or structural, from the decided parts."""
    decided = rule.verifiabilities - {"report-only"}
    if decided == {"structural"}:
        return "structural"
    if decided == {"two-sided"}:
        return "two-sided"
    return "one-sided"


GROUPS = ("all", "two-sided", "one-sided", "structural")


def get_rule(rule_id: str) -> Rule:
    try:
        return CATALOGUE[rule_id.upper()]
    except KeyError:
        raise UnknownRuleError(f"unknown rule {rule_id!r}; known: {', '.join(CATALOGUE)}") from None


def expand_rule_ids(rule_ids: Iterable[str]) -> list[str]:
    """Resolve group names and validate ids; order is preserved, duplicates dropped."""
    out: list[str] = []
    for rule_id in rule_ids:
        name = rule_id.lower()
        if name == "all":
            ids = list(CATALOGUE)
        elif name in GROUPS:
            ids = [rid for rid, rule in CATALOGUE.items() if rule_group(rule) == name]
        else:
            ids = [get_rule(rule_id).id]
        out.extend(rid for rid in ids if rid not in out)
    return out
