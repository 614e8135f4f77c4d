"""Variational estimators for the mixed L_p geominimal surface areas.

The infimum (p ≥ 0) or supremum (p < 0) over convex competitors is searched
over a finite family (ellipsoids, or planar Fourier supports) with
multi-start Nelder-Mead. Every evaluated competitor is a genuine member of
K_0, so the best value found is a one-sided bound on the true quantity:

- p > 0:  Ĝ ≥ G (optimizer-upper-bound)
- p < 0:  Ĝ ≤ G (optimizer-lower-bound)
- p = 0:  closed form, no search.

Competitors that leave the family's feasible set score +inf. Planar
Fourier searches run on a unimodular image of the inputs whose covariance is
isotropic; every competitor found there is mapped back and re-evaluated on
the original inputs.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize

from geokit.bodies import (
    ConvexSupportBody,
    FourierSeries,
    LinearMap,
    SmoothBody,
    StarBody,
    apply_linear,
    covariance,
    make_ball,
    planar_curvature,
    spec_from_body,
)
from geokit.config import thread_count
from geokit.errors import ArityError, ConvexityError, GeokitError, InvalidBodyError, UnsupportedError
from geokit.functionals import asp_i, exponent, log_lp_curvature, mixed_p_affine
from geokit.models import Family, FunctionalValue, PExponent, SearchConfig
from geokit.sphere import SphereGrid, check_same_grid

logger = logging.getLogger(__name__)

ORDER_RTOL = 1e-12
ELLIPSOID_FIT_RTOL = 1e-8
NORMALIZE_RATIO = 1.01

Competitor = ConvexSupportBody | SmoothBody
Pool = Sequence[tuple[str, tuple[ConvexSupportBody, ...]]]


@dataclass
class GeoEstimate:
    """Best value found, the competitor(s) achieving it, and the per-start log."""

    value: FunctionalValue
    alpha: int
    witness: tuple[ConvexSupportBody | StarBody, ...] = ()
    trace: list[dict[str, Any]] = field(default_factory=list)

    @property
    def budget_exhausted(self) -> bool:
        return bool(self.value.meta.get("budget_exhausted", False))

    def to_record(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "value": self.value.model_dump(),
            "witness": [witness_record(b) for b in self.witness],
            "trace": self.trace,
        }


def witness_record(body: SmoothBody | ConvexSupportBody | StarBody) -> dict[str, Any]:
    if isinstance(body, StarBody):
        return {"kind": "radial", "dim": body.dim,
                "params": {"rho": [float(x) for x in body.rho]}}
    return spec_from_body(body).model_dump()


def _support_h(body: Competitor) -> np.ndarray:
    return body.support.h if isinstance(body, SmoothBody) else body.h


def _check_alpha(alpha: int) -> None:
    if alpha not in (1, 2, 3):
        raise ArityError(f"alpha must be 1, 2 or 3, got {alpha}")


def order_chain(p: float | PExponent, n: int) -> tuple[int, int, int]:
    """α values in ascending order of G_p^{(α)} for the regime of p."""
    pe = exponent(p, n)
    if pe.p >= 0:
        return (3, 2, 1)
    if pe.p > -n:
        return (1, 2, 3)
    return (1, 3, 2)


# --- objective ---------------------------------------------------------------


class _Objective:
    """n V^{n/(n+p)} × polar factor over weighted competitor slots.

    Slot j carries the curvature log f_p(K_j) and weight c_j (Σ c_j = 1):

        V      = (1/n) ∫ exp(Σ_j c_j (p log h_j + log f_p(K_j))) dσ
        α∈{1,2}: ∏_j |Q_j°|^{c_j p/(n+p)}
        α=3:     [(1/n) ∫ ∏_j h_j^{-n c_j} dσ]^{p/(n+p)}

    α=1 receives one competitor copied into every slot, so the diagonal of
    α=2 reproduces α=1 bit for bit.
    """

    def __init__(
        self,
        alpha: int,
        grid: SphereGrid,
        slot_bodies: Sequence[SmoothBody],
        coeffs: Sequence[float],
        p: float,
    ) -> None:
        _check_alpha(alpha)
        self.alpha = alpha
        self.grid = grid
        self.n = grid.dim
        self.p = p
        self.slot_bodies = tuple(slot_bodies)
        self.slot_logs = [log_lp_curvature(k, p) for k in self.slot_bodies]
        self.coeffs = [float(c) for c in coeffs]
        self.base = sum(c * s for c, s in zip(self.coeffs, self.slot_logs))

    @property
    def slots(self) -> int:
        return len(self.coeffs)

    @property
    def competitors(self) -> int:
        return 1 if self.alpha == 1 else self.slots

    @classmethod
    def multi(cls, alpha: int, Ks: Sequence[SmoothBody], p: float) -> _Objective:
        grid = check_same_grid(*(k.grid for k in Ks))
        n = grid.dim
        if len(Ks) != n:
            raise ArityError(f"expected {n} bodies, got {len(Ks)}")
        return cls(alpha, grid, Ks, [1.0 / n] * n, p)

    @classmethod
    def ith(cls, alpha: int, K: SmoothBody, L: SmoothBody, p: float, i: float) -> _Objective:
        grid = check_same_grid(K.grid, L.grid)
        n = grid.dim
        return cls(alpha, grid, [K, L], [(n - i) / n, i / n], p)

    def mapped(self, phi: LinearMap) -> _Objective:
        """The same objective on the images φK_j."""
        bodies = [apply_linear(k, phi) for k in self.slot_bodies]
        return _Objective(self.alpha, self.grid, bodies, self.coeffs, self.p)

    def expand(self, comps: Sequence[np.ndarray]) -> list[np.ndarray]:
        if len(comps) != self.competitors:
            raise ArityError(
                f"alpha={self.alpha} takes {self.competitors} competitor(s), got {len(comps)}"
            )
        return list(comps) * self.slots if self.alpha == 1 else list(comps)

    def _evaluate(self, log_h: list[np.ndarray], w: np.ndarray, base: np.ndarray) -> float:
        n, p = self.n, self.p
        mixed = sum(c * lh for c, lh in zip(self.coeffs, log_h))
        v = float(w @ np.exp(base + p * mixed)) / n
        if self.alpha == 3:
            log_factor = math.log(float(w @ np.exp(-n * mixed)) / n)
        else:
            log_factor = sum(c * math.log(float(w @ np.exp(-n * lh)) / n)
                             for c, lh in zip(self.coeffs, log_h))
        return n * math.exp((n / (n + p)) * math.log(v) + (p / (n + p)) * log_factor)

    def value(self, comps: Sequence[np.ndarray]) -> float:
        hs = self.expand(comps)
        if any(np.any(h <= 0) for h in hs):
            return math.inf
        return self._evaluate([np.log(h) for h in hs], self.grid.weights, self.base)

    def value_with_error(self, comps: Sequence[np.ndarray]) -> tuple[float, float]:
        hs = self.expand(comps)
        log_h = [np.log(h) for h in hs]
        full = self._evaluate(log_h, self.grid.weights, self.base)
        idx, half_w = self.grid.half_rule()
        half = self._evaluate([lh[idx] for lh in log_h], half_w, self.base[idx])
        return full, max(abs(full - half), 64.0 * np.finfo(float).eps * abs(full))

    def candidate(self, slot: int | None = None) -> np.ndarray:
        """h_Q with h_Q^{-(n+p)} = exp(slot log f_p), or the combined product."""
        log = self.base if slot is None else self.slot_logs[slot]
        return np.exp(-log / (self.n + self.p))


def objective(alpha: int, Ks: Sequence[SmoothBody], Ls: Sequence[Competitor], p) -> float:
    """The α-th variational objective at the given competitors.

    α=1 takes one competitor L; α ∈ {2,3} take n. For p = 0 the competitors
    drop out and the value is ∫ ∏ (f_{K_i} h_{K_i})^{1/n} dσ.
    """
    _check_alpha(alpha)
    n = Ks[0].dim
    pe = exponent(p, n)
    obj = _Objective.multi(alpha, Ks, pe.p)
    check_same_grid(obj.grid, *(L.grid for L in Ls))
    return obj.value([_support_h(L) for L in Ls])


def objective_i(
    alpha: int,
    K: SmoothBody,
    L: SmoothBody,
    Qs: Sequence[Competitor],
    p,
    i: float,
) -> float:
    """The i-th objective: nV_{p,i}(K,L;Q_1,Q_2)^{n/(n+p)} times the α-th polar factor."""
    _check_alpha(alpha)
    pe = exponent(p, K.dim)
    obj = _Objective.ith(alpha, K, L, pe.p, i)
    check_same_grid(obj.grid, *(Q.grid for Q in Qs))
    return obj.value([_support_h(Q) for Q in Qs])


# --- competitor families -------------------------------------------------------


def _fit_quadratic_form(grid: SphereGrid, h: np.ndarray) -> np.ndarray | None:
    """Weighted least-squares M with uᵗMu ≈ h², or None if M is not positive definite."""
    u = grid.nodes
    rows, cols = np.triu_indices(grid.dim)
    design = u[:, rows] * u[:, cols] * np.where(rows == cols, 1.0, 2.0)
    sw = np.sqrt(grid.weights)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], h**2 * sw, rcond=None)
    M = np.zeros((grid.dim, grid.dim))
    M[rows, cols] = coef
    M[cols, rows] = coef
    if np.linalg.eigvalsh(M).min() <= 0:
        return None
    return M


class _EllipsoidFamily:
    """h(u) = ‖Lᵗu‖ for lower-triangular L with log-parametrized diagonal."""

    name: Family = "ellipsoid"

    def __init__(self, grid: SphereGrid) -> None:
        self.grid = grid
        self.rows, self.cols = np.tril_indices(grid.dim)
        self.diag = self.rows == self.cols
        self.size = self.rows.size

    def matrix(self, x: np.ndarray) -> np.ndarray:
        L = np.zeros((self.grid.dim, self.grid.dim))
        L[self.rows, self.cols] = np.where(self.diag, np.exp(x), x)
        return L

    def build(self, x: np.ndarray) -> ConvexSupportBody | None:
        if not np.all(np.isfinite(x)) or np.any(np.abs(x[self.diag]) > 50):
            return None
        L = self.matrix(x)
        h = np.linalg.norm(self.grid.nodes @ L, axis=1)
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            return None
        return ConvexSupportBody(self.grid, h, ellipsoid_sum=(L,), convex_by_construction=True)

    def encode_form(self, M: np.ndarray) -> np.ndarray:
        L = np.linalg.cholesky(M)
        x = L[self.rows, self.cols].copy()
        x[self.diag] = np.log(x[self.diag])
        return x

    def encode(self, h: np.ndarray, body: ConvexSupportBody | None = None) -> np.ndarray | None:
        if body is not None and len(body.ellipsoid_sum) == 1:
            A = body.ellipsoid_sum[0]
            return self.encode_form(A @ A.T)
        M = _fit_quadratic_form(self.grid, h)
        return None if M is None else self.encode_form(M)

    def scales(self, x: np.ndarray) -> np.ndarray:
        size = float(np.exp(x[self.diag]).mean())
        return np.where(self.diag, 1.0, size)


class _FourierFamily:
    """Planar h(θ) = c0 + Σ_{k≤k_max} a_k cos kθ + b_k sin kθ."""

    name: Family = "fourier-support"

    def __init__(self, grid: SphereGrid, k_max: int) -> None:
        if grid.dim != 2:
            raise UnsupportedError("the fourier-support family is planar")
        if 2 * k_max >= grid.size:
            raise UnsupportedError(f"k_max={k_max} too large for {grid.size} nodes")
        self.grid = grid
        self.k_max = k_max
        self.size = 2 * k_max + 1
        self.theta = grid.angles

    def series(self, x: np.ndarray) -> FourierSeries:
        k = self.k_max
        return FourierSeries(float(x[0]), tuple(x[1:k + 1]), tuple(x[k + 1:]))

    def build(self, x: np.ndarray) -> ConvexSupportBody | None:
        if not np.all(np.isfinite(x)):
            return None
        series = self.series(x)
        h = series(self.theta)
        if np.any(h <= 0):
            return None
        try:
            return ConvexSupportBody(self.grid, h, fourier=series)
        except ConvexityError:
            return None

    def encode(self, h: np.ndarray, body: ConvexSupportBody | None = None) -> np.ndarray | None:
        k = self.k_max
        if body is not None and body.fourier is not None:
            a = np.zeros(k)
            b = np.zeros(k)
            kk = min(k, body.fourier.k_max)
            a[:kk] = body.fourier.a[:kk]
            b[:kk] = body.fourier.b[:kk]
            x = np.concatenate([[body.fourier.c0], a, b])
        else:
            coeffs = np.fft.rfft(h) / h.size
            x = np.concatenate([[coeffs[0].real], 2.0 * coeffs[1:k + 1].real,
                                -2.0 * coeffs[1:k + 1].imag])
        # pull a non-convex truncation toward its mean circle
        for _ in range(12):
            if self.build(x) is not None:
                return x
            x = np.concatenate([x[:1], 0.5 * x[1:]])
        return None

    def scales(self, x: np.ndarray) -> np.ndarray:
        ks = np.arange(1, self.k_max + 1, dtype=float)
        return abs(float(x[0])) * np.concatenate([[1.0], 1.0 / ks**2, 1.0 / ks**2])


_FamilyImpl = _EllipsoidFamily | _FourierFamily


def _family(grid: SphereGrid, cfg: SearchConfig) -> _FamilyImpl:
    name = cfg.family or ("fourier-support" if grid.dim == 2 else "ellipsoid")
    if name == "radial-grid":
        raise UnsupportedError("radial-grid competitors are star bodies; G_p ranges over K_0")
    if name == "fourier-support":
        return _FourierFamily(grid, cfg.k_max)
    return _EllipsoidFamily(grid)


# --- multi-start search ----------------------------------------------------------


@dataclass
class _Best:
    value: float
    bodies: tuple[ConvexSupportBody, ...]


class _Recorder:
    """Tracks the best feasible evaluation of one start."""

    def __init__(self, sign: float) -> None:
        self.sign = sign
        self.best: _Best | None = None

    def offer(self, value: float, bodies: tuple[ConvexSupportBody, ...]) -> None:
        if self.best is None or self.sign * value < self.sign * self.best.value:
            self.best = _Best(value, bodies)


@dataclass
class _StartResult:
    index: int
    label: str
    best: _Best | None
    info: dict[str, Any]


def _split(family: _FamilyImpl, x: np.ndarray, count: int) -> list[np.ndarray]:
    return [x[j * family.size:(j + 1) * family.size] for j in range(count)]


def _builder(family: _FamilyImpl, count: int) -> Callable[[np.ndarray], tuple | None]:
    def build(x: np.ndarray) -> tuple[ConvexSupportBody, ...] | None:
        bodies = []
        for block in _split(family, x, count):
            body = family.build(block)
            if body is None:
                return None
            bodies.append(body)
        return tuple(bodies)
    return build


def _run_start(
    index: int,
    label: str,
    x0: np.ndarray,
    obj: _Objective,
    family: _FamilyImpl,
    cfg: SearchConfig,
    sign: float,
) -> _StartResult:
    count = obj.competitors
    build = _builder(family, count)
    recorder = _Recorder(sign)

    def fun(x: np.ndarray) -> float:
        bodies = build(x)
        if bodies is None:
            return math.inf
        value = obj.value([b.h for b in bodies])
        if not math.isfinite(value):
            return math.inf
        recorder.offer(value, bodies)
        return sign * value

    f0 = fun(x0)
    if not math.isfinite(f0):
        return _StartResult(index, label, None, {"label": label, "feasible": False})

    scales = np.concatenate([family.scales(b) for b in _split(family, x0, count)])
    simplex = np.vstack([x0, x0 + cfg.perturbation * np.diag(scales)])
    max_fev = 4 * cfg.max_iters * (x0.size + 1)
    res = minimize(
        fun, x0, method="Nelder-Mead",
        options=dict(maxiter=cfg.max_iters, maxfev=max_fev, initial_simplex=simplex,
                     xatol=1e-10, fatol=cfg.tol * abs(f0), adaptive=x0.size > 5),
    )
    exhausted = not res.success
    info = {
        "label": label,
        "feasible": True,
        "start_value": sign * f0,
        "best": recorder.best.value,
        "nit": int(res.nit),
        "nfev": int(res.nfev),
        "success": bool(res.success),
        "message": str(res.message),
        "budget_exhausted": exhausted,
    }
    logger.debug("start %d (%s): %.10g -> %.10g in %d iterations",
                 index, label, sign * f0, recorder.best.value, res.nit)
    return _StartResult(index, label, recorder.best, info)


def _structured_starts(
    obj: _Objective,
    family: _FamilyImpl,
    grid: SphereGrid,
) -> list[tuple[str, np.ndarray]]:
    count = obj.competitors
    ball = make_ball(grid).support
    starts = [("ball", np.tile(family.encode(ball.h, ball), count))]
    fitted = family.encode(obj.candidate())
    if fitted is not None:
        starts.append(("candidate-fit", np.tile(fitted, count)))
    if family.name == "fourier-support":
        M = _fit_quadratic_form(grid, obj.candidate())
        if M is not None:
            ellipse = family.encode(np.sqrt(np.einsum("ij,jk,ik->i", grid.nodes, M, grid.nodes)))
            if ellipse is not None:
                starts.append(("ellipse-fit", np.tile(ellipse, count)))
    if count > 1:
        blocks = [family.encode(obj.candidate(j)) for j in range(count)]
        if all(b is not None for b in blocks):
            starts.append(("decoupled-fit", np.concatenate(blocks)))
    return starts


def _random_starts(
    structured: list[tuple[str, np.ndarray]],
    family: _FamilyImpl,
    count: int,
    cfg: SearchConfig,
) -> list[tuple[str, np.ndarray]]:
    rng = np.random.default_rng(cfg.seed)
    build = _builder(family, count)
    wanted = max(cfg.starts - len(structured), 1)
    out = []
    for k in range(wanted):
        label, base = structured[k % len(structured)]
        scales = np.concatenate([family.scales(b) for b in _split(family, base, count)])
        step = 4.0 * cfg.perturbation * scales * rng.standard_normal(base.size)
        for _ in range(8):
            if build(base + step) is not None:
                break
            step *= 0.5
        out.append((f"perturbed-{label}-{k}", base + step))
    return out


def _vpn_candidate(obj: _Objective) -> ConvexSupportBody | None:
    h = obj.candidate()
    return _candidate_body(obj.grid, h)


def _candidate_body(grid: SphereGrid, h: np.ndarray) -> ConvexSupportBody | None:
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        return None
    ellipsoid: tuple[np.ndarray, ...] = ()
    M = _fit_quadratic_form(grid, h)
    if M is not None:
        fit = np.sqrt(np.einsum("ij,jk,ik->i", grid.nodes, M, grid.nodes))
        if float(np.max(np.abs(fit - h) / h)) < ELLIPSOID_FIT_RTOL:
            ellipsoid = (np.linalg.cholesky(M),)
    if grid.dim == 2:
        if float(planar_curvature(h).min()) < -1e-10 * float(h.max()):
            return None
    elif not ellipsoid:
        return None
    return ConvexSupportBody(grid, h, ellipsoid_sum=ellipsoid, convex_by_construction=True)


def _value_kind(pe: PExponent) -> str:
    return "optimizer-upper-bound" if pe.p > 0 else "optimizer-lower-bound"


def _normalizing_map(obj: _Objective, family: _FamilyImpl) -> LinearMap | None:
    """Unimodular T making the mean covariance of the inputs isotropic; None if nearly so."""
    if family.name != "fourier-support":
        return None
    bodies = obj.slot_bodies
    cov = sum(covariance(k) for k in bodies) / len(bodies)
    eig, vec = np.linalg.eigh(cov)
    if eig.min() <= 0 or eig.max() <= NORMALIZE_RATIO * eig.min():
        return None
    scale = float(np.prod(eig)) ** (1.0 / (2 * obj.n))
    return LinearMap(scale * (vec / np.sqrt(eig)) @ vec.T)


def _polish(
    best: _StartResult,
    obj: _Objective,
    family: _FamilyImpl,
    cfg: SearchConfig,
    sign: float,
    first_index: int,
) -> list[_StartResult]:
    """Restart Nelder-Mead from the best point until a restart stops improving."""
    out: list[_StartResult] = []
    current = best
    for k in range(cfg.restarts):
        blocks = [family.encode(b.h, b) for b in current.best.bodies]
        if any(x is None for x in blocks):
            break
        result = _run_start(first_index + k, f"restart-{k}", np.concatenate(blocks),
                            obj, family, cfg, sign)
        if result.best is None:
            break
        out.append(result)
        gain = sign * (current.best.value - result.best.value)
        if gain <= cfg.tol * abs(current.best.value):
            break
        current = result
    return out


def _mapped_back(result: _StartResult, back: LinearMap, obj: _Objective) -> _StartResult:
    if result.best is None:
        return result
    bodies = tuple(apply_linear(b, back) for b in result.best.bodies)
    value = obj.value([b.h for b in bodies])
    best = _Best(value, bodies) if math.isfinite(value) else None
    info = dict(result.info, best=value, frame_best=result.best.value)
    return _StartResult(result.index, result.label, best, info)


def _search(
    obj: _Objective,
    pe: PExponent,
    cfg: SearchConfig,
    extra: Pool,
    functional: str,
    **meta: Any,
) -> GeoEstimate:
    grid = obj.grid
    family = _family(grid, cfg)
    sign = 1.0 if pe.is_infimum else -1.0
    count = obj.competitors

    T = _normalizing_map(obj, family)
    frame = obj if T is None else obj.mapped(T)
    if T is not None:
        logger.debug("%s alpha=%d p=%g: searching in a frame with det-1 map %s",
                     functional, obj.alpha, pe.p, np.round(T.matrix, 6).tolist())

    structured = _structured_starts(frame, family, grid)
    starts = structured + _random_starts(structured, family, count, cfg)

    pooled: list[tuple[str, tuple[ConvexSupportBody, ...]]] = []
    candidate = _vpn_candidate(obj)
    if candidate is not None:
        pooled.append(("vpn-candidate", (candidate,) * count))
    for label, bodies in extra:
        if len(bodies) != count:
            raise ArityError(f"pooled candidate {label!r} has {len(bodies)} bodies, need {count}")
        pooled.append((label, tuple(bodies)))

    workers = min(thread_count(), len(starts))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(
            lambda item: _run_start(item[0], item[1][0], item[1][1], frame, family, cfg, sign),
            enumerate(starts),
        ))

    restarts: list[_StartResult] = []
    searched = [r for r in results if r.best is not None]
    if searched:
        leader = min(searched, key=lambda r: sign * r.best.value)
        restarts = _polish(leader, frame, family, cfg, sign, len(results))
        results.extend(restarts)
    if T is not None:
        back = T.inverse()
        results = [_mapped_back(r, back, obj) for r in results]
        restarts = results[len(starts):]

    for label, bodies in pooled:
        value = obj.value([b.h for b in bodies])
        best = _Best(value, bodies) if math.isfinite(value) else None
        results.append(_StartResult(len(results), label, best,
                                    {"label": label, "feasible": best is not None,
                                     "best": value, "pooled": True}))

    feasible = [r for r in results if r.best is not None]
    if not feasible:
        raise GeokitError(f"{functional}: no feasible competitor among {len(results)} starts")
    winner = min(feasible, key=lambda r: sign * r.best.value)

    value, err = obj.value_with_error([b.h for b in winner.best.bodies])
    exhausted = bool(winner.info.get("budget_exhausted", False))
    if exhausted and restarts and restarts[-1].info["success"]:
        settled = restarts[-1].info["best"]
        exhausted = abs(settled - winner.best.value) > cfg.tol * abs(winner.best.value)
    if exhausted:
        logger.info("%s alpha=%d p=%g: best start %r hit its iteration budget",
                    functional, obj.alpha, pe.p, winner.label)
    logger.info("%s alpha=%d p=%g: %.10g from %r (%d starts, %d restarts, %d pooled)",
                functional, obj.alpha, pe.p, value, winner.label, len(starts),
                len(restarts), len(pooled))
    fv = FunctionalValue(
        value=value, kind=_value_kind(pe), err=err,
        meta={"functional": functional, "alpha": obj.alpha, "p": pe.p,
              "family": family.name, "resolution": grid.resolution,
              "winner": winner.label, "budget_exhausted": exhausted,
              "normalized": T is not None, **meta},
    )
    trace = [dict(r.info, start=r.index) for r in results]
    return GeoEstimate(value=fv, alpha=obj.alpha, witness=winner.best.bodies, trace=trace)


def _closed_zero(alpha: int, fv: FunctionalValue, functional: str, **meta: Any) -> GeoEstimate:
    value = fv.model_copy(update={"meta": {**fv.meta, "functional": functional,
                                           "alpha": alpha, "closed_form": True, **meta}})
    return GeoEstimate(value=value, alpha=alpha, trace=[{"label": "closed-form"}])


# --- public estimators -----------------------------------------------------------


def estimate_G(
    alpha: int,
    Ks: Sequence[SmoothBody],
    p,
    cfg: SearchConfig | None = None,
    extra: Pool = (),
) -> GeoEstimate:
    """Ĝ_p^{(α)}(K_1,…,K_n) with its bound direction.

    `extra` supplies additional exact competitor tuples (for example the
    witnesses of another α) that enter the reduce step when feasible.
    """
    _check_alpha(alpha)
    cfg = cfg or SearchConfig()
    n = Ks[0].dim
    pe = exponent(p, n)
    if pe.p == 0:
        return _closed_zero(alpha, mixed_p_affine(Ks, pe), "G")
    obj = _Objective.multi(alpha, Ks, pe.p)
    return _search(obj, pe, cfg, extra, "G")


def _adopt(est: GeoEstimate, obj: _Objective, pe: PExponent, pool: Pool) -> GeoEstimate:
    """Replace the estimate by the best pooled competitor that beats it."""
    sign = 1.0 if pe.is_infimum else -1.0
    best_value, best = est.value.value, None
    for label, bodies in pool:
        value = obj.value([b.h for b in bodies])
        if math.isfinite(value) and sign * value < sign * best_value:
            best_value, best = value, (label, tuple(bodies))
    if best is None:
        return est
    label, bodies = best
    value, err = obj.value_with_error([b.h for b in bodies])
    logger.debug("G alpha=%d p=%g: adopted %r, %.10g -> %.10g",
                 obj.alpha, pe.p, label, est.value.value, value)
    fv = est.value.model_copy(update={"value": value, "err": err,
                                      "meta": {**est.value.meta, "winner": label}})
    trace = est.trace + [{"label": label, "pooled": True, "adopted": True, "best": value}]
    return GeoEstimate(value=fv, alpha=est.alpha, witness=bodies, trace=trace)


def estimate_G_path(
    alpha: int,
    Ks: Sequence[SmoothBody],
    ps: Sequence[float],
    cfg: SearchConfig | None = None,
) -> dict[float, GeoEstimate]:
    """Ĝ_p^{(α)} at several p with witnesses shared along the path.

    Exponents run in increasing order and each search pools the witnesses
    found so far; a final sweep lets every estimate adopt a later witness.
    Every witness is a member of K_0, so the bound directions are kept.
    """
    _check_alpha(alpha)
    cfg = cfg or SearchConfig()
    n = Ks[0].dim
    out: dict[float, GeoEstimate] = {}
    for p in sorted(set(float(x) for x in ps)):
        pool = [(f"p={q:g}-witness", est.witness) for q, est in out.items() if est.witness]
        out[p] = estimate_G(alpha, Ks, p, cfg, extra=pool)
    witnesses = [(f"p={q:g}-witness", est.witness) for q, est in out.items() if est.witness]
    for p, est in out.items():
        pe = exponent(p, n)
        if pe.p == 0:
            continue
        obj = _Objective.multi(alpha, Ks, pe.p)
        out[p] = _adopt(est, obj, pe, [w for w in witnesses if w[0] != f"p={p:g}-witness"])
    return out


def estimate_G_tilde(K: SmoothBody, p, cfg: SearchConfig | None = None) -> GeoEstimate:
    """G̃_p(K): α=1 on n copies of K."""
    return estimate_G(1, [K] * K.dim, p, cfg)


def estimate_G_i(
    alpha: int,
    K: SmoothBody,
    L: SmoothBody,
    p,
    i: float,
    cfg: SearchConfig | None = None,
    extra: Pool = (),
) -> GeoEstimate:
    """Ĝ_{p,i}^{(α)}(K,L); two competitor slots weighted (n-i)/n and i/n."""
    _check_alpha(alpha)
    cfg = cfg or SearchConfig()
    pe = exponent(p, K.dim)
    if pe.p == 0:
        return _closed_zero(alpha, asp_i(K, L, pe, i), "G_i", i=i)
    obj = _Objective.ith(alpha, K, L, pe.p, i)
    return _search(obj, pe, cfg, extra, "G_i", i=i)


def estimate_G_family(
    Ks: Sequence[SmoothBody],
    p,
    cfg: SearchConfig | None = None,
    check_order: bool = True,
) -> dict[int, GeoEstimate]:
    """All three α with shared candidate pools.

    Runs α in the order 1,2,3 (p > -n) or 1,3,2 (p < -n); each later run
    sees the earlier witnesses, so the regime ordering holds exactly. With
    `check_order` a broken chain raises GeokitError.
    """
    cfg = cfg or SearchConfig()
    n = Ks[0].dim
    pe = exponent(p, n)
    if pe.p == 0 or not cfg.share_pool:
        return {alpha: estimate_G(alpha, Ks, pe, cfg) for alpha in (1, 2, 3)}

    order = (1, 2, 3) if pe.p > -n else (1, 3, 2)
    out: dict[int, GeoEstimate] = {}
    for alpha in order:
        pool = []
        for prev, est in out.items():
            bodies = est.witness * n if prev == 1 else est.witness
            pool.append((f"alpha{prev}-witness", bodies))
        out[alpha] = estimate_G(alpha, Ks, pe, cfg, extra=pool)
        out[alpha].trace.append({"label": "shared-pool", "order": list(order)})
    if not check_order:
        return out

    chain = order_chain(pe, n)
    for lo, hi in zip(chain, chain[1:]):
        a, b = out[lo].value.value, out[hi].value.value
        if a > b * (1.0 + ORDER_RTOL):
            raise GeokitError(
                f"shared-pool ordering broken at p={pe.p}: G^({lo})={a!r} > G^({hi})={b!r}"
            )
    return out


# --- as_p^{(1)} over star competitors -----------------------------------------------


def _asp1_log_value(
    w: np.ndarray,
    logs: Sequence[np.ndarray],
    X: Sequence[np.ndarray],
    p: float,
    n: int,
) -> tuple[float, np.ndarray, float, list[float]]:
    g = np.exp(sum(-p * x + lf for x, lf in zip(X, logs)) / n)
    v = float(w @ g) / n
    vols = [float(w @ np.exp(n * x)) / n for x in X]
    log_value = (math.log(n) + (n / (n + p)) * math.log(v)
                 + (p / ((n + p) * n)) * sum(math.log(vol) for vol in vols))
    return log_value, g, v, vols


def _coordinate_ascent(
    index: int,
    label: str,
    X0: list[np.ndarray],
    grid: SphereGrid,
    logs: Sequence[np.ndarray],
    p: float,
    cfg: SearchConfig,
) -> tuple[int, float, list[np.ndarray], dict[str, Any]]:
    n = grid.dim
    w = grid.weights
    X = [x.copy() for x in X0]
    log_value, g, v, vols = _asp1_log_value(w, logs, X, p, n)
    start = log_value
    steps = [1.0] * n
    sweeps = 0
    converged = False
    while sweeps < cfg.max_iters:
        sweeps += 1
        before = log_value
        for j in range(n):
            # preconditioned gradient of log F in x_j
            d = (p / (n * (n + p))) * (np.exp(n * X[j]) / vols[j] - g / v)
            slope = float(w @ (d * d))
            if slope == 0.0:
                continue
            t = steps[j]
            for _ in range(40):
                trial = [x if k != j else x + t * d for k, x in enumerate(X)]
                trial_value, tg, tv, tvols = _asp1_log_value(w, logs, trial, p, n)
                if trial_value >= log_value + 1e-4 * t * slope:
                    X, log_value, g, v, vols = trial, trial_value, tg, tv, tvols
                    steps[j] = 2.0 * t
                    break
                t *= 0.5
            else:
                steps[j] = t
        if log_value - before < cfg.tol:
            converged = True
            break
    info = {"label": label, "start_value": math.exp(start), "best": math.exp(log_value),
            "sweeps": sweeps, "success": converged, "budget_exhausted": not converged}
    return index, log_value, X, info


def estimate_asp1(
    Ks: Sequence[SmoothBody],
    p,
    cfg: SearchConfig | None = None,
    extra_stars: Sequence[tuple[str, tuple[StarBody, ...]]] = (),
) -> GeoEstimate:
    """Lower bound for as_p^{(1)} (p < -n) by block coordinate ascent over log ρ_{L_i}.

    Starts at the decoupled optimum ρ_{L_i} = f_p(K_i)^{1/(n+p)} and at the
    unit ball; `extra_stars` adds further star tuples.
    """
    cfg = cfg or SearchConfig(family="radial-grid")
    if cfg.family not in (None, "radial-grid"):
        raise UnsupportedError("as_p^(1) is searched over radial-grid star competitors")
    grid = check_same_grid(*(k.grid for k in Ks))
    n = grid.dim
    if len(Ks) != n:
        raise ArityError(f"expected {n} bodies, got {len(Ks)}")
    pe = exponent(p, n)
    if pe.p >= -n:
        raise UnsupportedError(f"as_p^(1) is estimated for p < -n only, got p={pe.p}")
    logs = [log_lp_curvature(k, pe.p) for k in Ks]

    starts: list[tuple[str, list[np.ndarray]]] = [
        ("decoupled", [lf / (n + pe.p) for lf in logs]),
        ("ball", [np.zeros(grid.size) for _ in range(n)]),
    ]
    for label, stars in extra_stars:
        if len(stars) != n:
            raise ArityError(f"star start {label!r} has {len(stars)} bodies, need {n}")
        starts.append((label, [np.log(s.rho) for s in stars]))

    workers = min(thread_count(), len(starts))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(
            lambda item: _coordinate_ascent(item[0], item[1][0], item[1][1],
                                            grid, logs, pe.p, cfg),
            enumerate(starts),
        ))
    winner = max(results, key=lambda r: (r[1], -r[0]))
    _, log_value, X, info = winner

    value = math.exp(log_value)
    idx, half_w = grid.half_rule()
    half = math.exp(_asp1_log_value(half_w, [lf[idx] for lf in logs],
                                    [x[idx] for x in X], pe.p, n)[0])
    err = max(abs(value - half), 64.0 * np.finfo(float).eps * value)
    logger.info("as_p^(1) p=%g: %.10g from %r", pe.p, value, info["label"])
    try:
        witness = tuple(StarBody(grid, np.exp(x)) for x in X)
    except InvalidBodyError as e:
        raise GeokitError(f"as_p^(1) ascent left the star class: {e}") from e
    fv = FunctionalValue(
        value=value, kind="optimizer-lower-bound", err=err,
        meta={"functional": "asp1", "p": pe.p, "family": "radial-grid",
              "resolution": grid.resolution, "winner": info["label"],
              "budget_exhausted": info["budget_exhausted"]},
    )
    trace = [dict(r[3], start=r[0]) for r in results]
    return GeoEstimate(value=fv, alpha=1, witness=witness, trace=trace)


# --- closed forms and sound brackets ----------------------------------------------


def vpn_test(Ks: Sequence[SmoothBody], p) -> ConvexSupportBody | None:
    """The body Q with ∏ f_p(K_i)^{1/n} = h_Q^{-(n+p)}, when it is convex.

    Planar candidates pass when h''+h ≥ 0 at every node; for n ≥ 3 the
    candidate must be an ellipsoid support to within 1e-8.
    """
    n = Ks[0].dim
    pe = exponent(p, n)
    if pe.p == 0:
        raise UnsupportedError("the V_{p,n} test needs p ≠ 0")
    return _vpn_candidate(_Objective.multi(2, Ks, pe.p))


def vpn_test_i(K: SmoothBody, L: SmoothBody, p, i: float) -> ConvexSupportBody | None:
    """The i-th analogue: f_p(K)^{(n-i)/n} f_p(L)^{i/n} = h_Q^{-(n+p)}."""
    pe = exponent(p, K.dim)
    if pe.p == 0:
        raise UnsupportedError("the V_{p,n} test needs p ≠ 0")
    return _vpn_candidate(_Objective.ith(2, K, L, pe.p, i))


def _tagged(fv: FunctionalValue, functional: str, alpha: int, **meta: Any) -> FunctionalValue:
    return fv.model_copy(update={"meta": {**fv.meta, "functional": functional,
                                          "alpha": alpha, "closed_form": True, **meta}})


def closed_form_G(alpha: int, Ks: Sequence[SmoothBody], p) -> FunctionalValue | None:
    """G_p^{(α)} = as_p on inputs whose V_{p,n} candidate is convex.

    Licensed for every α when p > -n and for α ∈ {1,3} when p < -n.
    """
    _check_alpha(alpha)
    n = Ks[0].dim
    pe = exponent(p, n)
    if pe.p != 0:
        if pe.p < -n and alpha == 2:
            return None
        if vpn_test(Ks, pe) is None:
            return None
    return _tagged(mixed_p_affine(Ks, pe), "G", alpha)


def closed_form_G_i(alpha: int, K: SmoothBody, L: SmoothBody, p, i: float) -> FunctionalValue | None:
    """G_{p,i}^{(α)} = as_{p,i} for α ∈ {1,3} when the i-th candidate is convex."""
    _check_alpha(alpha)
    pe = exponent(p, K.dim)
    if pe.p != 0:
        if alpha == 2 or vpn_test_i(K, L, pe, i) is None:
            return None
    return _tagged(asp_i(K, L, pe, i), "G_i", alpha, i=i)


Bracket = tuple[FunctionalValue | None, FunctionalValue | None]


def _estimate_value(estimate: GeoEstimate | FunctionalValue) -> FunctionalValue:
    return estimate.value if isinstance(estimate, GeoEstimate) else estimate


def bracket_G(alpha: int, Ks: Sequence[SmoothBody], p, estimate: GeoEstimate | FunctionalValue) -> Bracket:
    """(lower, upper) bounds on G_p^{(α)} from the estimate and as_p; None is unbounded."""
    _check_alpha(alpha)
    n = Ks[0].dim
    pe = exponent(p, n)
    est = _estimate_value(estimate)
    if pe.p == 0:
        return est, est
    asp = mixed_p_affine(Ks, pe)
    if pe.p > 0:
        return asp, est
    if pe.p > -n or alpha in (1, 3):
        return est, asp
    return est, None


def bracket_G_i(
    alpha: int,
    K: SmoothBody,
    L: SmoothBody,
    p,
    i: float,
    estimate: GeoEstimate | FunctionalValue,
) -> Bracket:
    """(lower, upper) bounds on G_{p,i}^{(α)}; as_{p,i} enters where it is licensed."""
    _check_alpha(alpha)
    n = K.dim
    pe = exponent(p, n)
    est = _estimate_value(estimate)
    if pe.p == 0:
        return est, est
    aspi = asp_i(K, L, pe, i)
    if pe.p > 0:
        licensed = alpha in (1, 3) or 0 <= i <= n
        return (aspi if licensed else None), est
    if alpha in (1, 3):
        licensed = True
    elif pe.p > -n:
        licensed = 0 < i < n
    else:
        licensed = i < 0 or i > n
    return est, (aspi if licensed else None)
