"""Quadrature evaluation of the integral functionals.

Every value is returned as a FunctionalValue of kind "quadrature" whose err
is the half-resolution Richardson estimate of the underlying integral.
Fractional powers are taken through logarithms of strictly positive samples;
a nonpositive sample raises DegenerateBodyError instead of producing NaN.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from typing import Literal

import numpy as np

from geokit.bodies import (
    ConvexSupportBody,
    SmoothBody,
    StarBody,
    minkowski_combination,
    polar_radial,
    radial_function,
    support_from_radial,
)
from geokit.errors import ArityError, DegenerateBodyError, UnsupportedError
from geokit.models import FunctionalValue, PExponent
from geokit.sphere import SphereGrid, ball_volume, check_same_grid, integrate_with_error

logger = logging.getLogger(__name__)

VariationalForm = Literal["dual", "product", "shared"]


def exponent(p: float | PExponent, n: int) -> PExponent:
    """Coerce p to a PExponent for dimension n."""
    if isinstance(p, PExponent):
        if p.n != n:
            raise ArityError(f"exponent built for n={p.n} used with n={n}")
        return p
    return PExponent(p=float(p), n=n)


def _log(name: str, samples: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(samples)) or np.any(samples <= 0):
        raise DegenerateBodyError(f"{name} has nonpositive or non-finite samples")
    return np.log(samples)


def _support(body: ConvexSupportBody | SmoothBody) -> ConvexSupportBody:
    return body.support if isinstance(body, SmoothBody) else body


def quadrature(grid: SphereGrid, samples: np.ndarray, functional: str, **meta) -> FunctionalValue:
    value, err = integrate_with_error(grid, samples)
    return FunctionalValue(
        value=value, kind="quadrature", err=err,
        meta={"functional": functional, "resolution": grid.resolution, **meta},
    )


def power_product(
    factor: float,
    terms: Sequence[tuple[FunctionalValue, float]],
    functional: str,
    **meta,
) -> FunctionalValue:
    """factor · ∏ v_k^{e_k} with first-order relative error propagation."""
    log_value = math.log(factor)
    rel = 0.0
    for fv, e in terms:
        if fv.value <= 0:
            raise DegenerateBodyError(f"{functional}: nonpositive factor {fv.value}")
        log_value += e * math.log(fv.value)
        rel += abs(e) * fv.err / fv.value
    value = math.exp(log_value)
    return FunctionalValue(value=value, kind="quadrature", err=value * rel,
                           meta={"functional": functional, **meta})


def _need(count: int, seq: Sequence, what: str) -> None:
    if len(seq) != count:
        raise ArityError(f"{what}: expected {count} bodies, got {len(seq)}")


# --- volumes ---------------------------------------------------------------


def volume_radial(star: StarBody) -> FunctionalValue:
    """|L| = (1/n) ∫ ρ^n dσ."""
    n = star.dim
    return quadrature(star.grid, star.rho**n / n, "volume_radial")


def body_volume(body: SmoothBody) -> FunctionalValue:
    """|K| = (1/n) ∫ h f dσ."""
    return quadrature(body.grid, body.h * body.f / body.dim, "body_volume")


def polar_volume(body: ConvexSupportBody | SmoothBody) -> FunctionalValue:
    """|K°| = (1/n) ∫ h^{-n} dσ."""
    support = _support(body)
    n = support.dim
    return quadrature(support.grid, support.h ** (-n) / n, "polar_volume")


def dual_mixed_volume(stars: Sequence[StarBody]) -> FunctionalValue:
    """Ṽ(L_1,…,L_n) = (1/n) ∫ ∏ ρ_{L_i} dσ."""
    grid = check_same_grid(*(s.grid for s in stars))
    n = grid.dim
    _need(n, stars, "dual_mixed_volume")
    logs = sum(_log("rho", s.rho) for s in stars)
    return quadrature(grid, np.exp(logs) / n, "dual_mixed_volume")


def dual_mixed_volume_i(q1: StarBody, q2: StarBody, i: float) -> FunctionalValue:
    """Ṽ_i(Q_1,Q_2) = (1/n) ∫ ρ_1^{n-i} ρ_2^i dσ."""
    grid = check_same_grid(q1.grid, q2.grid)
    n = grid.dim
    integrand = np.exp((n - i) * _log("rho", q1.rho) + i * _log("rho", q2.rho))
    return quadrature(grid, integrand / n, "dual_mixed_volume_i", i=i)


# --- L_p curvature and p-mixed volumes -------------------------------------


def lp_curvature(body: SmoothBody, p: float | PExponent) -> np.ndarray:
    """f_p(K,u) = h_K^{1-p} f_K."""
    pe = exponent(p, body.dim)
    return np.exp((1.0 - pe.p) * _log("h", body.h) + _log("f", body.f))


def log_lp_curvature(body: SmoothBody, p: float) -> np.ndarray:
    """log f_p(K,u) for a raw float p."""
    return (1.0 - p) * _log("h", body.h) + _log("f", body.f)


def p_mixed_volume(K: SmoothBody, Q: ConvexSupportBody | SmoothBody, p) -> FunctionalValue:
    """V_p(K,Q) = (1/n) ∫ h_Q^p f_p(K) dσ."""
    q = _support(Q)
    grid = check_same_grid(K.grid, q.grid)
    pe = exponent(p, grid.dim)
    integrand = np.exp(pe.p * _log("h_Q", q.h) + log_lp_curvature(K, pe.p))
    return quadrature(grid, integrand / grid.dim, "p_mixed_volume", p=pe.p)


def p_mixed_volume_multi(
    Ks: Sequence[SmoothBody],
    Qs: Sequence[ConvexSupportBody | SmoothBody],
    p,
) -> FunctionalValue:
    """V_p(K;Q) = (1/n) ∫ ∏ [h_{Q_i}^p f_p(K_i)]^{1/n} dσ."""
    qs = [_support(q) for q in Qs]
    grid = check_same_grid(*(k.grid for k in Ks), *(q.grid for q in qs))
    n = grid.dim
    _need(n, Ks, "p_mixed_volume_multi")
    _need(n, qs, "p_mixed_volume_multi")
    pe = exponent(p, n)
    logs = sum(pe.p * _log("h_Q", q.h) + log_lp_curvature(k, pe.p) for k, q in zip(Ks, qs))
    return quadrature(grid, np.exp(logs / n) / n, "p_mixed_volume_multi", p=pe.p)


def p_mixed_volume_multi_polar(
    Ks: Sequence[SmoothBody],
    Ls: Sequence[StarBody],
    p,
) -> FunctionalValue:
    """V_p(K;L°) = (1/n) ∫ ∏ [ρ_{L_i}^{-p} f_p(K_i)]^{1/n} dσ."""
    grid = check_same_grid(*(k.grid for k in Ks), *(s.grid for s in Ls))
    n = grid.dim
    _need(n, Ks, "p_mixed_volume_multi_polar")
    _need(n, Ls, "p_mixed_volume_multi_polar")
    pe = exponent(p, n)
    logs = sum(-pe.p * _log("rho", s.rho) + log_lp_curvature(k, pe.p) for k, s in zip(Ks, Ls))
    return quadrature(grid, np.exp(logs / n) / n, "p_mixed_volume_multi_polar", p=pe.p)


def _log_competitor(q: ConvexSupportBody | SmoothBody | StarBody, p: float) -> np.ndarray:
    """log of h_Q^p, or of ρ_Q^{-p} for a star competitor standing in for Q°."""
    if isinstance(q, StarBody):
        return -p * _log("rho", q.rho)
    return p * _log("h_Q", _support(q).h)


def vpi_mixed(
    K: SmoothBody,
    L: SmoothBody,
    Q1: ConvexSupportBody | SmoothBody | StarBody,
    Q2: ConvexSupportBody | SmoothBody | StarBody,
    p,
    i: float,
) -> FunctionalValue:
    """nV_{p,i}(K,L;Q_1,Q_2) = ∫ [h_{Q_1}^p f_p(K)]^{(n-i)/n} [h_{Q_2}^p f_p(L)]^{i/n} dσ.

    Star competitors enter through ρ^{-p}, i.e. as the polars of Q_1, Q_2.
    """
    grid = check_same_grid(K.grid, L.grid, Q1.grid, Q2.grid)
    n = grid.dim
    pe = exponent(p, n)
    logs = ((n - i) / n) * (_log_competitor(Q1, pe.p) + log_lp_curvature(K, pe.p)) \
        + (i / n) * (_log_competitor(Q2, pe.p) + log_lp_curvature(L, pe.p))
    return quadrature(grid, np.exp(logs) / n, "vpi_mixed", p=pe.p, i=i)


def p_surface_area(K: SmoothBody, p) -> FunctionalValue:
    """S_p(K) = n V_p(K, B) = ∫ f_p(K) dσ."""
    pe = exponent(p, K.dim)
    return quadrature(K.grid, np.exp(log_lp_curvature(K, pe.p)), "p_surface_area", p=pe.p)


# --- affine surface areas ----------------------------------------------------


def mixed_p_affine(Ks: Sequence[SmoothBody], p) -> FunctionalValue:
    """as_p(K_1,…,K_n) = ∫ ∏ f_p(K_i)^{1/(n+p)} dσ; p = 0 uses ∏ (f h)^{1/n}."""
    grid = check_same_grid(*(k.grid for k in Ks))
    n = grid.dim
    _need(n, Ks, "mixed_p_affine")
    pe = exponent(p, n)
    logs = sum(log_lp_curvature(k, pe.p) for k in Ks)
    return quadrature(grid, np.exp(logs / (n + pe.p)), "mixed_p_affine", p=pe.p)


def asp_i(K: SmoothBody, L: SmoothBody, p, i: float) -> FunctionalValue:
    """as_{p,i}(K,L) = ∫ f_p(K)^{(n-i)/(n+p)} f_p(L)^{i/(n+p)} dσ."""
    grid = check_same_grid(K.grid, L.grid)
    n = grid.dim
    pe = exponent(p, n)
    logs = (n - i) * log_lp_curvature(K, pe.p) + i * log_lp_curvature(L, pe.p)
    return quadrature(grid, np.exp(logs / (n + pe.p)), "asp_i", p=pe.p, i=i)


def optimal_star(Ks: Sequence[SmoothBody], p) -> StarBody:
    """L_0 with ρ^n = (∏ f_p(K_i))^{1/(n+p)}, the optimizer of the variational forms."""
    grid = check_same_grid(*(k.grid for k in Ks))
    n = grid.dim
    _need(n, Ks, "optimal_star")
    pe = exponent(p, n)
    logs = sum(log_lp_curvature(k, pe.p) for k in Ks)
    return StarBody(grid, np.exp(logs / (n * (n + pe.p))))


def asp_i_optimal_star(K: SmoothBody, L: SmoothBody, p, i: float) -> StarBody:
    """Q_0 with ρ = [f_p(K)^{(n-i)/n} f_p(L)^{i/n}]^{1/(n+p)}."""
    grid = check_same_grid(K.grid, L.grid)
    n = grid.dim
    pe = exponent(p, n)
    logs = ((n - i) * log_lp_curvature(K, pe.p) + i * log_lp_curvature(L, pe.p)) / n
    return StarBody(grid, np.exp(logs / (n + pe.p)))


def variational_value(
    Ks: Sequence[SmoothBody],
    Ls: Sequence[StarBody],
    p,
    form: VariationalForm = "dual",
) -> FunctionalValue:
    """Star-competitor objective whose extremum is as_p.

    dual:    n V_p(K;L°)^{n/(n+p)} Ṽ(L)^{p/(n+p)}
    product: n V_p(K;L°)^{n/(n+p)} ∏ |L_i|^{p/((n+p)n)}
    shared:  n V_p(K;L_1°,…,L_1°)^{n/(n+p)} |L_1|^{p/(n+p)}
    """
    n = Ks[0].dim
    pe = exponent(p, n)
    stars = [Ls[0]] * n if form == "shared" else list(Ls)
    v = p_mixed_volume_multi_polar(Ks, stars, pe)
    a = n / (n + pe.p)
    b = pe.p / (n + pe.p)
    if form == "dual":
        terms = [(v, a), (dual_mixed_volume(stars), b)]
    elif form == "product":
        terms = [(v, a)] + [(volume_radial(s), b / n) for s in stars]
    else:
        terms = [(v, a), (volume_radial(stars[0]), b)]
    return power_product(float(n), terms, "variational_value", p=pe.p, form=form)


def asp_i_variational(
    K: SmoothBody,
    L: SmoothBody,
    Q1: StarBody,
    Q2: StarBody,
    p,
    i: float,
) -> FunctionalValue:
    """n V_{p,i}(K,L;Q_1°,Q_2°)^{n/(n+p)} Ṽ_i(Q_1,Q_2)^{p/(n+p)}."""
    n = K.dim
    pe = exponent(p, n)
    v = vpi_mixed(K, L, Q1, Q2, pe, i)
    w = dual_mixed_volume_i(Q1, Q2, i)
    return power_product(float(n), [(v, n / (n + pe.p)), (w, pe.p / (n + pe.p))],
                         "asp_i_variational", p=pe.p, i=i)


# --- curvature images ------------------------------------------------------


def p_curvature_image(K: SmoothBody, p) -> StarBody:
    """Λ_pK: the star body with f_p(K) = (ω_n/|Λ_pK|) ρ^{n+p}."""
    n = K.dim
    pe = exponent(p, n)
    if pe.p == 0:
        raise UnsupportedError("the p-curvature image is undefined for p = 0")
    omega = ball_volume(n)
    log_fp = log_lp_curvature(K, pe.p)
    g = np.exp(log_fp * n / (n + pe.p))
    scale = float(K.grid.weights @ g) / n * omega ** (-n / (n + pe.p))
    log_volume = math.log(scale) * (n + pe.p) / pe.p
    return StarBody(K.grid, np.exp((log_volume + log_fp - math.log(omega)) / (n + pe.p)))


def curvature_image_residual(K: SmoothBody, p, image: StarBody) -> float:
    """max_j |f_p − (ω_n/|Λ_pK|) ρ^{n+p}| / f_p."""
    n = K.dim
    pe = exponent(p, n)
    fp = lp_curvature(K, pe)
    volume = volume_radial(image).value
    model = ball_volume(n) / volume * image.rho ** (n + pe.p)
    return float(np.max(np.abs(fp - model) / fp))


# --- classical mixed volumes ---------------------------------------------------


def classical_mixed_volume_2d(K1: SmoothBody, K2: SmoothBody) -> FunctionalValue:
    """V(K_1,K_2) = (1/2) ∫ h_{K_1} f_{K_2} dθ."""
    grid = check_same_grid(K1.grid, K2.grid)
    if grid.dim != 2:
        raise ArityError("classical_mixed_volume_2d needs planar bodies")
    return quadrature(grid, 0.5 * K1.h * K2.f, "classical_mixed_volume_2d")


def _ellipsoid_sum_volume(body: ConvexSupportBody) -> FunctionalValue:
    """(1/n) ∫ h · e_{n-1}(D²h) dσ for h = Σ ‖A_kᵗu‖, exact up to quadrature."""
    grid = body.grid
    u = grid.nodes
    hess = np.zeros((grid.size, grid.dim, grid.dim))
    for A in body.ellipsoid_sum:
        M = A @ A.T
        g = np.linalg.norm(u @ A, axis=1)
        Mu = u @ M
        hess += M[None] / g[:, None, None] - np.einsum("ni,nj->nij", Mu, Mu) / g[:, None, None] ** 3
    # D²h annihilates u, so e_{n-1} of its spectrum is the product of the
    # principal radii of curvature.
    curvature = _elementary_symmetric(np.linalg.eigvalsh(hess), grid.dim - 1)
    return quadrature(grid, body.h * curvature / grid.dim, "combination_volume")


def _elementary_symmetric(eigs: np.ndarray, order: int) -> np.ndarray:
    """e_order of each row of eigenvalues."""
    coeffs = np.ones((eigs.shape[0], 1))
    for col in eigs.T:
        shifted = np.zeros((eigs.shape[0], coeffs.shape[1] + 1))
        shifted[:, :-1] += coeffs
        shifted[:, 1:] += coeffs * col[:, None]
        coeffs = shifted
    return coeffs[:, order]


def _combination_volume(body: ConvexSupportBody) -> FunctionalValue:
    n = body.dim
    if n == 2:
        return volume_radial(radial_function(body))
    if body.ellipsoid_sum:
        return _ellipsoid_sum_volume(body)
    logger.warning("Volume of a supplied n=%d combination via the hull polarity chain", n)
    return volume_radial(StarBody(body.grid, 1.0 / support_from_radial(polar_radial(body)).h))


def classical_mixed_volume_nd(Ks: Sequence[SmoothBody]) -> FunctionalValue:
    """V(K_1,…,K_n) from a polynomial fit of |λ_1K_1+⋯+λ_nK_n| over λ ∈ {1..n+1}^n/(n+1)."""
    grid = check_same_grid(*(k.grid for k in Ks))
    n = grid.dim
    if n not in (2, 3):
        raise UnsupportedError("classical mixed volumes are implemented for n ∈ {2, 3}")
    _need(n, Ks, "classical_mixed_volume_nd")

    monomials = list(itertools.combinations_with_replacement(range(n), n))
    powers = np.array([[m.count(j) for j in range(n)] for m in monomials])
    supports = [k.support for k in Ks]
    rows, volumes, errs = [], [], []
    for lam in itertools.product(range(1, n + 2), repeat=n):
        lam = np.asarray(lam, dtype=float) / (n + 1)
        fv = _combination_volume(minkowski_combination(supports, lam))
        rows.append(np.prod(lam[None, :] ** powers, axis=1))
        volumes.append(fv.value)
        errs.append(fv.err)
    design = np.asarray(rows)
    y = np.asarray(volumes)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.max(np.abs(design @ coef - y)))
    mixed = monomials.index(tuple(range(n)))
    sensitivity = float(np.abs(np.linalg.pinv(design)[mixed]).sum())
    cond = float(np.linalg.cond(design))
    value = coef[mixed] / math.factorial(n)
    err = sensitivity * max(residual, max(errs)) / math.factorial(n)
    logger.debug("Mixed-volume fit: cond=%.3g residual=%.3g", cond, residual)
    return FunctionalValue(
        value=float(value), kind="quadrature", err=err,
        meta={"functional": "classical_mixed_volume_nd", "resolution": grid.resolution,
              "condition": cond, "residual": residual},
    )
