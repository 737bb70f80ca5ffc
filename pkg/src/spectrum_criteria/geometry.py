"""Domains, lattice coverings and quadrature grids."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gamma, roots_legendre


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


def unit_sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (omega_d)."""
    return d * unit_ball_volume(d)


def _as_center(center) -> np.ndarray:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.ndim != 1 or c.size == 0:
        raise ValueError("center must be a non-empty vector")
    return c


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def measure(self) -> float:
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    @property
    def extent(self) -> float:
        return self.radius

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum((x - self.center) ** 2, axis=-1) < self.radius ** 2


@dataclass(frozen=True)
class SphericalLayer:
    """Open layer s < |x - center| < t."""

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))
        if not 0 < self.inner < self.outer:
            raise ValueError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def measure(self) -> float:
        return unit_ball_volume(self.dim) * (self.outer ** self.dim - self.inner ** self.dim)

    @property
    def radius(self) -> float:
        return self.outer

    @property
    def extent(self) -> float:
        return self.outer - self.inner

    def contains(self, x: np.ndarray) -> np.ndarray:
        r2 = np.sum((np.asarray(x, dtype=float) - self.center) ** 2, axis=-1)
        return (r2 > self.inner ** 2) & (r2 < self.outer ** 2)


@dataclass(frozen=True)
class Cube:
    """Axis-aligned open cube with the given center and half side."""

    center: np.ndarray
    half_side: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_center(self.center))
        if not self.half_side > 0:
            raise ValueError("cube half side must be positive")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def measure(self) -> float:
        return (2 * self.half_side) ** self.dim

    @property
    def radius(self) -> float:
        return self.half_side

    @property
    def extent(self) -> float:
        return self.half_side

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.all(np.abs(np.asarray(x, dtype=float) - self.center) < self.half_side, axis=-1)


Domain = Union[Ball, SphericalLayer, Cube]


@dataclass(frozen=True)
class LatticeCovering:
    dim: int
    spacing: float
    r0: float
    index_bound: int
    axis_only: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not (self.spacing > 0 and self.r0 > 0):
            raise ValueError("spacing and r0 must be positive")
        if self.index_bound < 0:
            raise ValueError("index_bound must be nonnegative")


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    h: float
    domain: Optional[Domain] = None
    tolerance: float = 0.03
    # integer lattice indices of the nodes for cube-cell grids (None otherwise)
    index: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def translated(self, shift) -> "QuadratureGrid":
        shift = np.asarray(shift, dtype=float)
        dom = self.domain
        if dom is not None:
            dom = _shift_domain(dom, shift)
        return QuadratureGrid(self.nodes + shift, self.weights, self.h, dom, self.tolerance, self.index)


def _shift_domain(dom: Domain, shift: np.ndarray) -> Domain:
    if isinstance(dom, Ball):
        return Ball(dom.center + shift, dom.radius)
    if isinstance(dom, SphericalLayer):
        return SphericalLayer(dom.center + shift, dom.inner, dom.outer)
    return Cube(dom.center + shift, dom.half_side)


def covering_centers(cov: LatticeCovering) -> list[np.ndarray]:
    """Lattice points spacing*l with |l|_inf <= index_bound, sorted by norm then lexicographically.

    With ``axis_only`` the points are restricted to the first coordinate axis.
    """
    b = cov.index_bound
    if cov.axis_only:
        idx = [(k,) + (0,) * (cov.dim - 1) for k in range(-b, b + 1)]
    else:
        idx = list(itertools.product(range(-b, b + 1), repeat=cov.dim))
    pts = [tuple(cov.spacing * np.array(i, dtype=float)) for i in idx]
    pts.sort(key=lambda c: (sum(x * x for x in c), c))
    return [np.array(c) for c in pts]


def is_rho_covering(cov: LatticeCovering) -> tuple[bool, float]:
    """Every ball of radius rho lies in some lattice ball iff r0 exceeds the cell half-diagonal."""
    half_diag = cov.spacing * math.sqrt(cov.dim) / 2
    rho = cov.r0 - half_diag
    return rho > 0, rho


def make_grid(dom: Domain, h: float) -> QuadratureGrid:
    """Midpoint grid: cells of side h aligned to the domain center, kept when the cell center is inside."""
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    if h >= 2 * dom.extent:
        raise ValueError(f"grid spacing {h} is degenerate for a domain of extent {dom.extent}")
    d = dom.dim
    kmax = int(math.ceil(dom.radius / h))
    ks = np.arange(-kmax, kmax)
    offs = (ks + 0.5) * h
    mesh = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1).reshape(-1, d)
    idx = np.stack(np.meshgrid(*([ks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    nodes = mesh + dom.center
    keep = dom.contains(nodes)
    nodes = nodes[keep]
    if nodes.shape[0] == 0:
        raise ValueError("grid has no nodes inside the domain")
    weights = np.full(nodes.shape[0], h ** d)
    return QuadratureGrid(nodes, weights, h, dom, 0.03, idx[keep])


def make_mc_grid(dom: Domain, n: int, seed: int = 0) -> QuadratureGrid:
    """Seeded Monte Carlo nodes, uniform in the domain, equal weights summing to its measure."""
    rng = np.random.default_rng(seed)
    d = dom.dim
    if isinstance(dom, Cube):
        pts = dom.center + dom.half_side * rng.uniform(-1, 1, size=(n, d))
    else:
        dirs = rng.standard_normal((n, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        lo = dom.inner if isinstance(dom, SphericalLayer) else 0.0
        hi = dom.radius
        r = (lo ** d + rng.uniform(size=n) * (hi ** d - lo ** d)) ** (1 / d)
        pts = dom.center + r[:, None] * dirs
    return QuadratureGrid(pts, np.full(n, dom.measure / n), dom.extent / math.sqrt(n), dom, 3 / math.sqrt(n))


def sphere_directions(d: int, n_polar: int = 16, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the unit sphere S^{d-1}; weights sum to its area."""
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if d == 2:
        m = 4 * n_polar
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, 2 * np.pi / m)
    if d == 3:
        x, wx = roots_legendre(n_polar)
        m = 2 * n_polar
        ph = 2 * np.pi * (np.arange(m) + 0.5) / m
        ct, phi = np.meshgrid(x, ph, indexing="ij")
        st = np.sqrt(1 - ct ** 2)
        dirs = np.stack([ct, st * np.cos(phi), st * np.sin(phi)], axis=-1).reshape(-1, 3)
        # polar axis along x1
        w = np.outer(wx, np.full(m, 2 * np.pi / m)).ravel()
        return dirs, w
    rng = np.random.default_rng(seed)
    n = 64 * n_polar
    dirs = rng.standard_normal((n, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs, np.full(n, unit_sphere_area(d) / n)


def radial_nodes(a: float, b: float, breaks: Sequence[float] = (), order: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on [a, b], split at the given interior breakpoints."""
    pts = sorted({a, b, *[float(t) for t in breaks if a < t < b]})
    x, w = roots_legendre(order)
    rs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        rs.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    return np.concatenate(rs), np.concatenate(ws)


def make_shell_grid(ball: Ball, breaks: Sequence[float] = (), order: int = 12, n_polar: int = 16,
                    n_radial_panels: int = 8, inner: float = 0.0) -> QuadratureGrid:
    """Product quadrature in spherical coordinates about the ball center.

    Accurate for fields that are piecewise smooth in |x - center|; ``breaks`` lists radii
    where the radial profile jumps.
    """
    d = ball.dim
    edges = np.linspace(inner, ball.radius, n_radial_panels + 1)[1:-1]
    r, wr = radial_nodes(inner, ball.radius, list(breaks) + list(edges), order)
    dirs, wd = sphere_directions(d, n_polar)
    nodes = ball.center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    weights = (wr[:, None] * r[:, None] ** (d - 1) * wd[None, :]).ravel()
    dom = ball if inner == 0.0 else SphericalLayer(ball.center, inner, ball.radius)
    return QuadratureGrid(nodes, weights, ball.radius / (n_radial_panels * order), dom, 1e-10)


def triangle_grid(r: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (s, t) with 0 < s < t < r and weights summing to r^2/2.

    Off-diagonal cells of the m x m grid contribute their center with weight (r/m)^2;
    each diagonal cell contributes the centroid of its upper half with weight (r/m)^2/2.
    """
    if m < 2:
        raise ValueError("triangle grid needs m >= 2")
    h = r / m
    i, j = np.triu_indices(m, k=1)
    s = np.concatenate([(i + 0.5) * h, (np.arange(m) + 1 / 3) * h])
    t = np.concatenate([(j + 0.5) * h, (np.arange(m) + 2 / 3) * h])
    w = np.concatenate([np.full(i.size, h * h), np.full(m, h * h / 2)])
    return np.stack([s, t], axis=1), w
