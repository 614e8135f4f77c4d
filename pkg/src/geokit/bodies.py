"""Body representations on a sphere grid.

A body is stored as samples over the nodes of one SphereGrid:

- StarBody: radial function ρ_L(u_j) > 0.
- ConvexSupportBody: support function h_K(u_j) > 0 (origin interior), with
  optional exact descriptions (planar Fourier series, sum of ellipsoid
  supports) used for off-grid evaluation.
- SmoothBody: support body plus curvature function f_K(u_j) > 0.

Dimension policy: arbitrary smooth bodies only in the plane; n=3 allows
balls, ellipsoids and supplied (h, f) pairs; n≥4 balls and ellipsoids.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import null_space
from scipy.spatial import cKDTree

from geokit import CENTROID_TOL, EPS_CONV, RECENTER_MAX_ITERS
from geokit.errors import (
    ArityError,
    ConvexityError,
    DegenerateBodyError,
    GridMismatchError,
    InvalidBodyError,
    UnsupportedError,
)
from geokit.models import BodySpec
from geokit.sphere import (
    SphereGrid,
    check_same_grid,
    differentiate_periodic,
    resample_periodic,
)

logger = logging.getLogger(__name__)

Provenance = Literal["from-support", "closed-form", "supplied"]

# Oversampling factor of the planar boundary parametrisation.
BOUNDARY_OVERSAMPLE = 16
# Fixed evaluation set for the random-body rescaling; every power-of-two
# planar grid up to this size is a subset of it.
RESCALE_POINTS = 32768


def _frozen_samples(values, grid: SphereGrid, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (grid.size,):
        raise GridMismatchError(f"{name}: expected {grid.size} samples, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidBodyError(f"{name} contains non-finite samples")
    if np.any(arr <= 0):
        raise InvalidBodyError(f"{name} must be strictly positive (min {arr.min():.3g})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FourierSeries:
    """h(θ) = c0 + Σ_k a_k cos kθ + b_k sin kθ, with a[k-1], b[k-1] for k ≥ 1."""

    c0: float
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.a) != len(self.b):
            raise InvalidBodyError("Fourier a and b must have equal length")

    @property
    def k_max(self) -> int:
        return len(self.a)

    def _terms(self, theta, weight):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, float(self.c0))
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            out = out + weight(k) * (ak * np.cos(k * theta) + bk * np.sin(k * theta))
        return out

    def __call__(self, theta) -> np.ndarray:
        return self._terms(theta, lambda k: 1.0)

    def curvature(self, theta) -> np.ndarray:
        """h'' + h evaluated analytically."""
        return self._terms(theta, lambda k: 1.0 - k * k)

    def translated(self, c: np.ndarray) -> FourierSeries:
        """Series of h - ⟨c, u⟩."""
        a = list(self.a) or [0.0]
        b = list(self.b) or [0.0]
        a[0] -= float(c[0])
        b[0] -= float(c[1])
        return FourierSeries(self.c0, tuple(a), tuple(b))

    def to_params(self) -> dict:
        return {"c0": float(self.c0), "a": [float(x) for x in self.a],
                "b": [float(x) for x in self.b]}


@dataclass(frozen=True)
class LinearMap:
    """φ ∈ GL(n)."""

    matrix: np.ndarray
    det_abs: float = field(init=False)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArityError(f"linear map must be square, got shape {m.shape}")
        det = abs(float(np.linalg.det(m)))
        if not np.isfinite(det) or det <= 1e-12 * max(np.abs(m).max(), 1.0) ** m.shape[0]:
            raise InvalidBodyError("linear map is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "det_abs", det)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def inverse(self) -> LinearMap:
        return LinearMap(np.linalg.inv(self.matrix))

    def compose(self, other: LinearMap) -> LinearMap:
        """self ∘ other."""
        return LinearMap(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class StarBody:
    grid: SphereGrid
    rho: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", _frozen_samples(self.rho, self.grid, "rho"))

    @property
    def dim(self) -> int:
        return self.grid.dim


@dataclass(frozen=True, eq=False)
class ConvexSupportBody:
    grid: SphereGrid
    h: np.ndarray = field(repr=False)
    fourier: FourierSeries | None = None
    ellipsoid_sum: tuple[np.ndarray, ...] = field(default=(), repr=False)
    convex_by_construction: bool = False

    def __post_init__(self) -> None:
        h = _frozen_samples(self.h, self.grid, "h")
        object.__setattr__(self, "h", h)
        if self.grid.dim == 2 and not self.convex_by_construction:
            margin = float(np.min(planar_curvature(h)))
            if margin < EPS_CONV * float(h.max()):
                raise ConvexityError(
                    f"min(h''+h) = {margin:.3g} below margin {EPS_CONV * h.max():.3g}"
                )

    @property
    def dim(self) -> int:
        return self.grid.dim

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Support function at arbitrary unit vectors."""
        if self.ellipsoid_sum:
            return sum(np.linalg.norm(points @ A, axis=1) for A in self.ellipsoid_sum)
        if self.fourier is not None:
            return self.fourier(np.arctan2(points[:, 1], points[:, 0]))
        return interpolate_on_sphere(self.grid, self.h, points)


@dataclass(frozen=True, eq=False)
class SmoothBody:
    """A body in F_0^+: support samples with positive curvature samples."""

    support: ConvexSupportBody
    f: np.ndarray = field(repr=False)
    provenance: Provenance = "supplied"

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", _frozen_samples(self.f, self.support.grid, "f"))

    @property
    def grid(self) -> SphereGrid:
        return self.support.grid

    @property
    def h(self) -> np.ndarray:
        return self.support.h

    @property
    def dim(self) -> int:
        return self.support.grid.dim


def planar_curvature(h) -> np.ndarray:
    """h'' + h by spectral differentiation."""
    h = np.asarray(h, dtype=float)
    return differentiate_periodic(h, 2) + h


def interpolate_on_sphere(grid: SphereGrid, samples, points: np.ndarray) -> np.ndarray:
    """Evaluate grid samples at unit vectors.

    Trigonometric interpolation on the circle; on S^2 a local quadratic
    least-squares fit in tangent coordinates over the nearest nodes.
    """
    samples = np.asarray(samples, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.dim:
        raise ArityError(f"points of dim {points.shape[1]} on a dim-{grid.dim} grid")
    if grid.dim == 2:
        return resample_periodic(samples, np.arctan2(points[:, 1], points[:, 0]))
    if grid.dim != 3:
        raise UnsupportedError("interpolation of sampled bodies is limited to n ≤ 3")

    k = 12
    tree = cKDTree(grid.nodes)
    _, idx = tree.query(points, k=k)
    out = np.empty(points.shape[0])
    for row, (x, nbrs) in enumerate(zip(points, idx)):
        basis = null_space(x[None, :])
        y = (grid.nodes[nbrs] - x) @ basis
        design = np.column_stack([
            np.ones(k), y[:, 0], y[:, 1], y[:, 0] ** 2, y[:, 0] * y[:, 1], y[:, 1] ** 2,
        ])
        coef, *_ = np.linalg.lstsq(design, samples[nbrs], rcond=None)
        out[row] = coef[0]
    if not np.all(np.isfinite(out)):
        raise DegenerateBodyError("interpolation produced non-finite values")
    return out


# --- constructors ---------------------------------------------------------


def make_ball(grid: SphereGrid, r: float = 1.0) -> SmoothBody:
    if r <= 0:
        raise InvalidBodyError(f"ball radius must be positive, got {r}")
    n = grid.dim
    support = ConvexSupportBody(
        grid,
        np.full(grid.size, float(r)),
        fourier=FourierSeries(float(r)) if n == 2 else None,
        ellipsoid_sum=(float(r) * np.eye(n),),
        convex_by_construction=True,
    )
    return SmoothBody(support, np.full(grid.size, float(r) ** (n - 1)), "closed-form")


def make_ellipsoid(grid: SphereGrid, A) -> SmoothBody:
    """E = A·B: h_E(u) = ‖Aᵗu‖, f_E(u) = (det A)² ‖Aᵗu‖^{-(n+1)}."""
    n = grid.dim
    A = np.array(A, dtype=float)
    if A.shape != (n, n):
        raise ArityError(f"ellipsoid matrix must be {n}x{n}, got {A.shape}")
    det = LinearMap(A).det_abs
    A.setflags(write=False)
    g = np.linalg.norm(grid.nodes @ A, axis=1)
    support = ConvexSupportBody(grid, g, ellipsoid_sum=(A,), convex_by_construction=True)
    return SmoothBody(support, det**2 * g ** (-(n + 1)), "closed-form")


def curvature_from_support(body: ConvexSupportBody) -> SmoothBody:
    """Planar curvature function f = h'' + h."""
    if body.dim != 2:
        raise UnsupportedError("curvature from support is planar only; supply f for n ≥ 3")
    f = planar_curvature(body.h)
    if f.min() < EPS_CONV * body.h.max():
        raise ConvexityError(f"curvature margin violated: min(h''+h) = {f.min():.3g}")
    return SmoothBody(body, f, "from-support")


def fourier_support_body(grid: SphereGrid, series: FourierSeries) -> SmoothBody:
    if grid.dim != 2:
        raise UnsupportedError("Fourier support bodies are planar")
    support = ConvexSupportBody(grid, series(grid.angles), fourier=series)
    return curvature_from_support(support)


def random_smooth_body(
    grid: SphereGrid,
    seed: int,
    k_max: int = 6,
    margin: float = 0.2,
) -> SmoothBody:
    """Random planar body h = 1 + Σ_{k=2}^{k_max} (a_k cos kθ + b_k sin kθ).

    Coefficients are rescaled so that h and h'' + h stay above `margin`.
    """
    if grid.dim != 2:
        raise UnsupportedError("random smooth bodies are planar")
    if k_max < 2:
        raise InvalidBodyError(f"k_max must be at least 2, got {k_max}")
    if not 0 < margin < 1:
        raise InvalidBodyError(f"margin must lie in (0, 1), got {margin}")

    rng = np.random.default_rng(seed)
    ks = np.arange(2, k_max + 1)
    a = rng.standard_normal(ks.size) / ks**2
    b = rng.standard_normal(ks.size) / ks**2
    amplitude = rng.uniform(0.25, 1.0)

    raw = FourierSeries(0.0, (0.0, *a), (0.0, *b))
    theta = 2.0 * np.pi * np.arange(RESCALE_POINTS) / RESCALE_POINTS
    lowest = min(raw(theta).min(), raw.curvature(theta).min())
    t = amplitude * (1.0 - margin) / -lowest if lowest < 0 else 1.0
    series = FourierSeries(1.0, (0.0, *(t * a)), (0.0, *(t * b)))
    return fourier_support_body(grid, series)


def random_star_body(
    grid: SphereGrid,
    seed: int,
    k_max: int = 4,
    amplitude: float = 0.3,
) -> StarBody:
    """Random star body with log ρ a smooth perturbation of a constant."""
    rng = np.random.default_rng(seed)
    base = rng.normal(0.0, 0.2)
    if grid.dim == 2:
        theta = grid.angles
        g = np.zeros(grid.size)
        for k in range(1, k_max + 1):
            g += (rng.standard_normal() * np.cos(k * theta)
                  + rng.standard_normal() * np.sin(k * theta)) / k
    else:
        S = rng.standard_normal((grid.dim, grid.dim))
        g = np.einsum("ij,jk,ik->i", grid.nodes, S + S.T, grid.nodes)
    spread = float(np.abs(g).max()) or 1.0
    return StarBody(grid, np.exp(base + amplitude * g / spread))


def minkowski_combination(
    bodies: Sequence[ConvexSupportBody],
    weights: Sequence[float],
) -> ConvexSupportBody:
    """Support of Σ λ_i K_i, λ_i ≥ 0."""
    if len(bodies) != len(weights) or not bodies:
        raise ArityError("need one weight per body")
    if any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise InvalidBodyError("weights must be nonnegative and not all zero")
    grid = check_same_grid(*(b.grid for b in bodies))
    h = sum(w * b.h for w, b in zip(weights, bodies))
    fourier = None
    if all(b.fourier is not None for b in bodies):
        k = max(b.fourier.k_max for b in bodies)

        def padded(coeffs: tuple[float, ...]) -> np.ndarray:
            return np.pad(np.asarray(coeffs, dtype=float), (0, k - len(coeffs)))

        fourier = FourierSeries(
            sum(w * b.fourier.c0 for w, b in zip(weights, bodies)),
            tuple(sum(w * padded(b.fourier.a) for w, b in zip(weights, bodies))),
            tuple(sum(w * padded(b.fourier.b) for w, b in zip(weights, bodies))),
        )
    ellipsoids: tuple[np.ndarray, ...] = ()
    if all(b.ellipsoid_sum for b in bodies):
        ellipsoids = tuple(w * A for w, b in zip(weights, bodies) if w > 0
                           for A in b.ellipsoid_sum)
    return ConvexSupportBody(grid, h, fourier=fourier, ellipsoid_sum=ellipsoids,
                             convex_by_construction=True)


# --- polarity and conversions ---------------------------------------------


def polar_radial(body: ConvexSupportBody) -> StarBody:
    """ρ_{K°} = 1 / h_K."""
    return StarBody(body.grid, 1.0 / body.h)


def support_from_radial(star: StarBody) -> ConvexSupportBody:
    """Support of the convex hull of the sampled boundary points."""
    grid = star.grid
    points = star.rho[:, None] * grid.nodes
    h = np.empty(grid.size)
    step = 1024
    for start in range(0, grid.size, step):
        h[start:start + step] = (grid.nodes[start:start + step] @ points.T).max(axis=1)
    if np.any(h <= 0):
        raise DegenerateBodyError("hull support is not positive at every node")
    return ConvexSupportBody(grid, h, convex_by_construction=True)


def _planar_radial(h: np.ndarray) -> np.ndarray | None:
    """ρ_K at the grid angles from the boundary x(θ) = h u + h' u'.

    Returns None when the boundary angle is not monotone.
    """
    m = h.size
    t = 2.0 * np.pi * np.arange(BOUNDARY_OVERSAMPLE * m) / (BOUNDARY_OVERSAMPLE * m)
    ht = resample_periodic(h, t)
    dht = resample_periodic(differentiate_periodic(h, 1), t)
    x = ht * np.cos(t) - dht * np.sin(t)
    y = ht * np.sin(t) + dht * np.cos(t)
    psi = np.unwrap(np.arctan2(y, x))
    if not np.all(np.diff(psi) > 0):
        return None
    r = np.hypot(x, y)
    spline = CubicSpline(np.append(psi, psi[0] + 2.0 * np.pi), np.append(r, r[0]),
                         bc_type="periodic")
    theta = 2.0 * np.pi * np.arange(m) / m
    return spline(psi[0] + np.mod(theta - psi[0], 2.0 * np.pi))


def radial_function(body: ConvexSupportBody) -> StarBody:
    """ρ_K = 1 / h_{K°} on the grid."""
    grid = body.grid
    if len(body.ellipsoid_sum) == 1:
        inv = np.linalg.inv(body.ellipsoid_sum[0])
        return StarBody(grid, 1.0 / np.linalg.norm(grid.nodes @ inv.T, axis=1))
    if grid.dim == 2:
        rho = _planar_radial(body.h)
        if rho is not None:
            return StarBody(grid, rho)
        logger.warning("Boundary parametrisation not monotone; using hull polarity chain")
    return StarBody(grid, 1.0 / support_from_radial(polar_radial(body)).h)


def polar_body(body: SmoothBody) -> SmoothBody:
    """K° as a smooth body."""
    grid = body.grid
    if len(body.support.ellipsoid_sum) == 1:
        return make_ellipsoid(grid, np.linalg.inv(body.support.ellipsoid_sum[0]).T)
    if grid.dim != 2:
        raise UnsupportedError("polar bodies of supplied bodies need n = 2")
    rho = radial_function(body.support).rho
    return curvature_from_support(ConvexSupportBody(grid, 1.0 / rho))


# --- linear images ---------------------------------------------------------


def apply_linear(
    body: SmoothBody | ConvexSupportBody | StarBody,
    phi: LinearMap,
) -> SmoothBody | ConvexSupportBody | StarBody:
    """Image φK sampled on the same grid."""
    grid = body.grid
    if phi.dim != grid.dim:
        raise ArityError(f"map of dim {phi.dim} applied to a dim-{grid.dim} body")
    n = grid.dim

    if isinstance(body, StarBody):
        w = grid.nodes @ np.linalg.inv(phi.matrix).T
        s = np.linalg.norm(w, axis=1)
        return StarBody(grid, interpolate_on_sphere(grid, body.rho, w / s[:, None]) / s)

    if isinstance(body, ConvexSupportBody):
        return _linear_support(body, phi)

    sums = body.support.ellipsoid_sum
    if len(sums) == 1:
        return make_ellipsoid(grid, phi.matrix @ sums[0])

    # f_{φK}(v) = |det φ|² ‖φᵗv‖^{-(n+1)} f_K(u), u = φᵗv/‖φᵗv‖
    w = grid.nodes @ phi.matrix
    s = np.linalg.norm(w, axis=1)
    f_new = phi.det_abs**2 * s ** (-(n + 1)) * interpolate_on_sphere(grid, body.f, w / s[:, None])
    return SmoothBody(_linear_support(body.support, phi), f_new, "supplied")


def _linear_support(body: ConvexSupportBody, phi: LinearMap) -> ConvexSupportBody:
    """h_{φK}(v) = ‖φᵗv‖ h_K(φᵗv/‖φᵗv‖)."""
    grid = body.grid
    w = grid.nodes @ phi.matrix
    s = np.linalg.norm(w, axis=1)
    return ConvexSupportBody(
        grid, s * body.evaluate(w / s[:, None]),
        ellipsoid_sum=tuple(phi.matrix @ A for A in body.ellipsoid_sum),
        convex_by_construction=True,
    )


# --- centroid --------------------------------------------------------------


def centroid(body: SmoothBody) -> np.ndarray:
    """(1/((n+1)|K|)) ∫ ρ_K^{n+1} u dσ."""
    grid = body.grid
    n = grid.dim
    rho = radial_function(body.support).rho
    volume = float(grid.weights @ rho**n) / n
    moment = (grid.weights * rho ** (n + 1)) @ grid.nodes / (n + 1)
    return moment / volume


def covariance(body: SmoothBody | ConvexSupportBody) -> np.ndarray:
    """Covariance of the uniform distribution on K; the image φK has φCφᵗ."""
    support = body.support if isinstance(body, SmoothBody) else body
    grid = support.grid
    n = grid.dim
    rho = radial_function(support).rho
    volume = float(grid.weights @ rho**n) / n
    mean = (grid.weights * rho ** (n + 1)) @ grid.nodes / ((n + 1) * volume)
    second = (grid.nodes.T * (grid.weights * rho ** (n + 2))) @ grid.nodes / ((n + 2) * volume)
    return second - np.outer(mean, mean)


def _translated(body: SmoothBody, c: np.ndarray) -> SmoothBody:
    grid = body.grid
    h = body.h - grid.nodes @ c
    if np.any(h <= 0):
        raise DegenerateBodyError("translation moves the origin outside the body")
    if grid.dim == 2:
        fourier = body.support.fourier.translated(c) if body.support.fourier else None
        return curvature_from_support(ConvexSupportBody(grid, h, fourier=fourier))
    return SmoothBody(ConvexSupportBody(grid, h, convex_by_construction=True), body.f,
                      "supplied")


def recenter(body: SmoothBody) -> SmoothBody:
    """Translate until the centroid sits at the origin."""
    current = body
    for it in range(RECENTER_MAX_ITERS):
        c = centroid(current)
        if np.linalg.norm(c) < CENTROID_TOL:
            if it:
                logger.debug("Recentered after %d translations", it)
            return current
        current = _translated(current, c)
    raise DegenerateBodyError(
        f"centroid did not reach the origin within {RECENTER_MAX_ITERS} iterations"
    )


# --- serialization ---------------------------------------------------------


def body_from_spec(spec: BodySpec, grid: SphereGrid) -> SmoothBody | ConvexSupportBody:
    """Build a body from its JSON record on the given grid."""
    if spec.dim != grid.dim:
        raise ArityError(f"body of dim {spec.dim} on a dim-{grid.dim} grid")
    params = spec.params
    if spec.kind == "ball":
        return make_ball(grid, float(params["r"]))
    if spec.kind == "ellipsoid":
        return make_ellipsoid(grid, np.reshape(params["A"], (spec.dim, spec.dim)))
    if spec.kind == "fourier_support":
        series = FourierSeries(float(params.get("c0", 1.0)),
                               tuple(params.get("a", ())), tuple(params.get("b", ())))
        return fourier_support_body(grid, series)

    h = np.asarray(params["h"], dtype=float)
    f = params.get("f")
    f = np.asarray(f, dtype=float) if f is not None else None
    if grid.dim == 2 and h.size != grid.size:
        h = resample_periodic(h, grid.angles)
        if f is not None:
            f = resample_periodic(f, grid.angles)
    support = ConvexSupportBody(grid, h)
    return SmoothBody(support, f, "supplied") if f is not None else support


def spec_from_body(body: SmoothBody | ConvexSupportBody) -> BodySpec:
    """JSON record for a body; exact descriptions are preferred over samples."""
    support = body.support if isinstance(body, SmoothBody) else body
    n = support.dim
    if len(support.ellipsoid_sum) == 1:
        A = support.ellipsoid_sum[0]
        r = float(A[0, 0])
        if r > 0 and np.allclose(A, r * np.eye(n), rtol=0.0, atol=1e-15 * r):
            return BodySpec(kind="ball", dim=n, params={"r": r})
        return BodySpec(kind="ellipsoid", dim=n,
                        params={"A": [float(x) for x in A.ravel()]})
    if support.fourier is not None:
        return BodySpec(kind="fourier_support", dim=n, params=support.fourier.to_params())
    params = {"h": [float(x) for x in support.h]}
    if isinstance(body, SmoothBody):
        params["f"] = [float(x) for x in body.f]
    return BodySpec(kind="sampled", dim=n, params=params)
