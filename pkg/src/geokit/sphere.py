"""Quadrature grids on the unit sphere S^{n-1}.

Conventions:
- uniform-circle (n=2): m equispaced angles θ_j = 2πj/m, weights 2π/m, m even.
  Spectrally exact for trigonometric polynomials of degree < m.
- product-gauss (n=3): N Gauss-Legendre nodes in cos(polar angle) times 2N
  uniform azimuths. Exact for polynomials of degree ≤ 2N-1.
- monte-carlo (n≥4): N normalised Gaussian samples, weights σ(S^{n-1})/N.

Grids are immutable and shared freely between bodies and threads.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import gamma

from geokit.errors import GridMismatchError, UnsupportedError

logger = logging.getLogger(__name__)

Scheme = Literal["uniform-circle", "product-gauss", "monte-carlo"]

DEFAULT_SCHEMES: dict[int, Scheme] = {2: "uniform-circle", 3: "product-gauss"}


def sphere_measure(n: int) -> float:
    """σ(S^{n-1}) = 2π^{n/2} / Γ(n/2)."""
    return float(2.0 * math.pi ** (n / 2) / gamma(n / 2))


def ball_volume(n: int) -> float:
    """ω_n = |B_2^n| = π^{n/2} / Γ(n/2 + 1)."""
    return float(math.pi ** (n / 2) / gamma(n / 2 + 1))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Nodes u_j ∈ S^{n-1} with positive weights summing to σ(S^{n-1})."""

    dim: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    scheme: Scheme
    resolution: int
    seed: int | None = None
    exactness: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", _freeze(self.nodes))
        object.__setattr__(self, "weights", _freeze(self.weights))

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def key(self) -> tuple:
        return (self.dim, self.scheme, self.resolution, self.seed)

    @property
    def angles(self) -> np.ndarray:
        """Polar angles of planar nodes."""
        if self.scheme != "uniform-circle":
            raise UnsupportedError("angles are defined for planar grids only")
        return 2.0 * np.pi * np.arange(self.size) / self.size

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    def half_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Index set and weights of the nested half-resolution rule."""
        if self.scheme == "uniform-circle":
            idx = np.arange(0, self.size, 2)
        elif self.scheme == "product-gauss":
            n_az = 2 * self.resolution
            az = np.arange(self.size) % n_az
            idx = np.flatnonzero(az % 2 == 0)
        else:
            idx = np.arange(self.size // 2)
        return idx, 2.0 * self.weights[idx]

    def same_as(self, other: SphereGrid) -> bool:
        return self is other or self.key == other.key


def check_same_grid(*grids: SphereGrid) -> SphereGrid:
    """Return the common grid or raise GridMismatchError."""
    first = grids[0]
    for g in grids[1:]:
        if not first.same_as(g):
            raise GridMismatchError(f"grid mismatch: {first.key} vs {g.key}")
    return first


def build_grid(
    dim: int,
    resolution: int,
    scheme: Scheme | None = None,
    seed: int | None = None,
) -> SphereGrid:
    """Build a quadrature grid on S^{dim-1}.

    The seed is only used by monte-carlo grids, where it is required.
    """
    if dim < 2:
        raise UnsupportedError(f"dimension must be at least 2, got {dim}")
    if resolution < 8:
        raise UnsupportedError(f"resolution must be at least 8, got {resolution}")
    scheme = scheme or DEFAULT_SCHEMES.get(dim, "monte-carlo")
    if scheme == "monte-carlo":
        if seed is None:
            raise UnsupportedError("monte-carlo grids require a seed")
        return _build_cached(dim, resolution, scheme, int(seed))
    return _build_cached(dim, resolution, scheme, None)


def grid_for(dim: int, resolution: int, seed: int = 0) -> SphereGrid:
    """The default grid for a dimension at a planar-equivalent resolution.

    n=2 takes `resolution` nodes, n=3 a product-gauss rule of max(8, resolution//8)
    latitudes, n≥4 a seeded monte-carlo set of 16·resolution points.
    """
    if dim == 2:
        return build_grid(2, resolution)
    if dim == 3:
        return build_grid(3, max(8, resolution // 8))
    return build_grid(dim, 16 * resolution, seed=seed)


@functools.lru_cache(maxsize=64)
def _build_cached(dim: int, resolution: int, scheme: str, seed: int | None) -> SphereGrid:
    if scheme == "uniform-circle":
        if dim != 2:
            raise UnsupportedError(f"uniform-circle needs dim 2, got {dim}")
        if resolution % 2:
            raise UnsupportedError("uniform-circle grids need an even node count")
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(resolution, 2.0 * np.pi / resolution)
        exactness = resolution - 1
    elif scheme == "product-gauss":
        if dim != 3:
            raise UnsupportedError(f"product-gauss needs dim 3, got {dim}")
        x, w = np.polynomial.legendre.leggauss(resolution)
        n_az = 2 * resolution
        phi = 2.0 * np.pi * np.arange(n_az) / n_az
        sin_t = np.sqrt(1.0 - x**2)
        nodes = np.column_stack([
            np.repeat(sin_t, n_az) * np.tile(np.cos(phi), resolution),
            np.repeat(sin_t, n_az) * np.tile(np.sin(phi), resolution),
            np.repeat(x, n_az),
        ])
        weights = np.repeat(w, n_az) * (2.0 * np.pi / n_az)
        exactness = 2 * resolution - 1
    elif scheme == "monte-carlo":
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((resolution, dim))
        nodes = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        weights = np.full(resolution, sphere_measure(dim) / resolution)
        exactness = None
    else:
        raise UnsupportedError(f"unknown scheme {scheme!r}")

    nodes = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    logger.debug("Built %s grid dim=%d resolution=%d (%d nodes)",
                 scheme, dim, resolution, len(weights))
    return SphereGrid(dim=dim, nodes=nodes, weights=weights, scheme=scheme,
                      resolution=resolution, seed=seed, exactness=exactness)


def _as_samples(grid: SphereGrid, samples) -> np.ndarray:
    values = np.asarray(samples, dtype=float)
    if values.shape != (grid.size,):
        raise GridMismatchError(
            f"expected {grid.size} samples, got shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise GridMismatchError("samples contain non-finite values")
    return values


def integrate(grid: SphereGrid, samples) -> float:
    """Σ_j w_j · samples_j."""
    return float(grid.weights @ _as_samples(grid, samples))


def integrate_with_error(grid: SphereGrid, samples) -> tuple[float, float]:
    """Quadrature value plus a half-resolution Richardson error estimate."""
    values = _as_samples(grid, samples)
    full = float(grid.weights @ values)
    idx, half_weights = grid.half_rule()
    half = float(half_weights @ values[idx])
    err = abs(full - half)
    if grid.scheme == "monte-carlo":
        std_err = grid.total_measure * float(np.std(values)) / math.sqrt(grid.size)
        err = max(err, std_err)
    floor = 64.0 * np.finfo(float).eps * float(grid.weights @ np.abs(values))
    return full, max(err, floor)


def _check_periodic(samples) -> np.ndarray:
    values = np.asarray(samples, dtype=float)
    if values.ndim != 1 or values.size < 8:
        raise GridMismatchError("periodic samples must be a 1-d sequence of length ≥ 8")
    if values.size % 2:
        raise GridMismatchError("periodic samples need an even length")
    return values


def differentiate_periodic(samples, order: int) -> np.ndarray:
    """Spectral derivative of uniformly sampled 2π-periodic data.

    The Nyquist coefficient is dropped for odd orders.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    values = _check_periodic(samples)
    m = values.size
    k = np.arange(m // 2 + 1, dtype=float)
    coeffs = np.fft.rfft(values)
    if order == 1:
        coeffs = coeffs * (1j * k)
        coeffs[-1] = 0.0
    else:
        coeffs = coeffs * -(k**2)
    return np.fft.irfft(coeffs, n=m)


def resample_periodic(samples, angles) -> np.ndarray:
    """Trigonometric interpolant of uniform samples evaluated at arbitrary angles."""
    values = _check_periodic(samples)
    m = values.size
    coeffs = np.fft.rfft(values) / m
    scale = np.full(coeffs.size, 2.0)
    scale[0] = 1.0
    scale[-1] = 1.0
    k = np.arange(coeffs.size)
    angles = np.asarray(angles, dtype=float)
    out = np.empty(angles.shape, dtype=float)
    flat = angles.ravel()
    # chunked to bound the phase matrix
    step = max(1, 2_000_000 // coeffs.size)
    res = out.ravel()
    for start in range(0, flat.size, step):
        phase = np.exp(1j * np.outer(flat[start:start + step], k))
        res[start:start + step] = (phase @ (coeffs * scale)).real
    return res.reshape(angles.shape)
