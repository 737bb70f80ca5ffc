"""Smallest Dirichlet eigenvalues on balls, radial shooting and trend classification."""
from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .geometry import Ball, Cube, LatticeCovering, covering_centers

WORKERS_ENV = "SPECTRUM_CRITERIA_WORKERS"


class EigenConvergenceError(RuntimeError):
    def __init__(self, message: str, best: "EigenResult"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class EigenResult:
    lambda0: float
    ground_state: np.ndarray
    nodes: np.ndarray
    residual: float
    h: float
    iterations: int = 0

    @property
    def size(self) -> int:
        return self.ground_state.size


@dataclass(frozen=True)
class RiccatiThreshold:
    lambda_hat: float
    bracket: float


@dataclass(frozen=True)
class RiccatiProfile:
    rho: np.ndarray
    v: np.ndarray
    vprime: np.ndarray
    residual: float


@dataclass(frozen=True)
class ScanSeries:
    centers: list
    values: np.ndarray
    trend: str
    errors: dict = field(default_factory=dict)
    h: float = 0.0
    tolerance: float = 0.0


# ---------------------------------------------------------------- trends


def classify_trend(values: Sequence[float], margin_factor: float = 2.0, rel_floor: float = 0.05) -> str:
    """Head/tail quartile comparison.

    diverging: min of the last quartile exceeds max of the first quartile by the margin;
    declining: max of the last quartile is below min of the first quartile by the margin;
    bounded: the tail stays inside the head band widened by the margin.
    The margin is ``margin_factor`` times the spread of the first quartile, but never less
    than ``rel_floor`` times the largest head magnitude (a one-point head has no spread).
    """
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size < 2:
        return "inconclusive"
    q = max(1, v.size // 4)
    head, tail = v[:q], v[-q:]
    scale = max(1.0, float(np.max(np.abs(v))))
    margin = max(margin_factor * float(head.max() - head.min()), rel_floor * float(np.max(np.abs(head))))
    margin += 1e-9 * scale
    if tail.min() > head.max() + margin:
        return "diverging"
    if tail.max() < head.min() - margin:
        return "declining"
    if tail.max() <= head.max() + margin and tail.min() >= head.min() - margin:
        return "bounded"
    return "inconclusive"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def map_ordered(fn: Callable, items: Sequence, workers: Optional[int] = None) -> list:
    """Apply fn to items, possibly on threads; results always in input order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- operator


def ball_operator(ball: Ball, h: float):
    """-Laplace on lattice nodes c + h k strictly inside the ball, Dirichlet data on the sphere.

    Boundary rows use the Shortley-Weller stencil with the exact distance to the sphere
    along each axis, so the scheme is second order on the curved boundary.
    Returns (sparse matrix, nodes).
    """
    d, R, c = ball.dim, ball.radius, ball.center
    K = int(math.ceil(R / h))
    ks = np.arange(-K, K + 1)
    grid = np.stack(np.meshgrid(*([ks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    off = grid * h
    r2 = np.sum(off ** 2, axis=1)
    # a node closer than 1e-6 h to the sphere is treated as lying on it
    inside = r2 < (R - 1e-6 * h) ** 2
    idx_map = np.full(grid.shape[0], -1, dtype=np.int64)
    n = int(inside.sum())
    idx_map[inside] = np.arange(n)
    shape = (2 * K + 1,) * d
    idx_map = idx_map.reshape(shape)
    pts = grid[inside]
    rel = off[inside]
    rr2 = r2[inside]
    diag = np.zeros(n)
    rows, cols, vals = [], [], []
    me = np.arange(n)
    for a in range(d):
        dist = {}
        nbr = {}
        for s in (-1, 1):
            q = pts.copy()
            q[:, a] += s
            valid = np.all(np.abs(q) <= K, axis=1)
            j = np.full(n, -1, dtype=np.int64)
            qi = q[valid] + K
            j[valid] = idx_map[tuple(qi.T)]
            # distance to the sphere along s*e_a
            xa = rel[:, a]
            disc = xa * xa - (rr2 - R * R)
            t = -s * xa + np.sqrt(np.maximum(disc, 0.0))
            dist[s] = np.where(j >= 0, h, np.minimum(t, h))
            nbr[s] = j
        hm, hp = dist[-1], dist[1]
        diag += 2.0 / (hm * hp)
        for s, hs in ((-1, hm), (1, hp)):
            j = nbr[s]
            ok = j >= 0
            rows.append(me[ok])
            cols.append(j[ok])
            vals.append(-2.0 / (hs[ok] * (hm[ok] + hp[ok])))
    rows.append(me)
    cols.append(me)
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A, c + pts * h


_AMG_LOCK = threading.Lock()


class _ShiftedSolver:
    def __init__(self, A: sp.csr_matrix, sigma: float, tol: float):
        n = A.shape[0]
        M = (A - sigma * sp.identity(n, format="csr")).tocsr()
        self.M = M
        self.tol = tol
        if n < 4000:
            self.lu = spla.splu(M.tocsc())
            self.ml = None
        else:
            import pyamg

            self.lu = None
            # the hierarchy setup draws from numpy's global RNG; pin it so runs repeat bit for bit
            with _AMG_LOCK:
                state = np.random.get_state()
                np.random.seed(0)
                try:
                    self.ml = pyamg.smoothed_aggregation_solver(M, symmetry="nonsymmetric", max_coarse=500)
                finally:
                    np.random.set_state(state)

    def __call__(self, b: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
        if self.lu is not None:
            return self.lu.solve(b)
        return self.ml.solve(b, x0=x0, tol=self.tol, accel="bicgstab", maxiter=300)


def _eigen_iterate(A: sp.csr_matrix, nodes: np.ndarray, h: float, tol: float, maxit: int) -> EigenResult:
    n = A.shape[0]
    absA = abs(A)
    dg = A.diagonal()
    gersh = float(np.min(2 * dg - np.asarray(absA.sum(axis=1)).ravel()))
    sigma = gersh - max(1.0, 1e-3 * abs(gersh))
    solver = _ShiftedSolver(A, sigma, 1e-11)
    x = np.ones(n) / math.sqrt(n)
    lam_prev = None
    lam = sigma
    res = np.inf
    rebuilds = 0
    for it in range(1, maxit + 1):
        y = solver(x, x0=x / max(lam - sigma, 1e-300) if lam_prev is not None else None)
        y /= np.linalg.norm(y)
        if np.sum(y) < 0:
            y = -y
        Ay = A @ y
        lam = float(y @ Ay)
        res = float(np.linalg.norm(Ay - lam * y))
        x = y
        if lam_prev is not None and abs(lam - lam_prev) <= tol * max(1.0, abs(lam)) and res <= 1e-6 * max(1.0, abs(lam)):
            return EigenResult(lam, y, nodes, res, h, it)
        lam_prev = lam
        # Collatz-Wielandt: min (Ay)_i / y_i <= lambda0 for any positive y
        if np.all(y > 0) and rebuilds < 8:
            lower = float(np.min(Ay / y))
            target = min(lower, lam - 0.1 * max(abs(lam), 1.0))
            if target > sigma + 0.5 * (lam - sigma):
                sigma = target - 1e-9 * max(1.0, abs(target))
                solver = _ShiftedSolver(A, sigma, 1e-11)
                rebuilds += 1
    best = EigenResult(lam, x, nodes, res, h, maxit)
    raise EigenConvergenceError(f"inverse iteration did not converge in {maxit} steps (residual {res:.3g})", best)


def dirichlet_lambda0(V, ball: Ball, h: float, tol: float = 1e-8, maxit: int = 500) -> EigenResult:
    """Smallest eigenvalue of the finite-difference -Laplace + V on the ball, zero Dirichlet data."""
    if h > ball.radius / 8 + 1e-15:
        raise ValueError(f"h = {h} too coarse for radius {ball.radius} (need h <= radius/8)")
    A, nodes = ball_operator(ball, h)
    vals = np.asarray(V(nodes), dtype=float) if callable(V) else np.broadcast_to(np.asarray(V, dtype=float), (nodes.shape[0],))
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential is not finite on the grid nodes")
    A = (A + sp.diags(vals)).tocsr()
    return _eigen_iterate(A, nodes, h, tol, maxit)


def cube_operator(cube: Cube, h: float):
    """-Laplace on the interior nodes of a cube whose side is a multiple of h, zero Dirichlet data."""
    n = int(round(2 * cube.half_side / h))
    if n < 2 or abs(n * h - 2 * cube.half_side) > 1e-9 * cube.half_side:
        raise ValueError(f"h = {h} must divide the side {2 * cube.half_side}")
    d = cube.dim
    T = sp.diags([-np.ones(n - 2), 2 * np.ones(n - 1), -np.ones(n - 2)], [-1, 0, 1]) / (h * h)
    I = sp.identity(n - 1)
    A = sp.csr_matrix((T.shape[0] ** d,) * 2)
    for a in range(d):
        term = sp.identity(1)
        for b in range(d):
            term = sp.kron(term, T if a == b else I)
        A = A + term
    ax = cube.center[None, :] - cube.half_side + h * np.arange(1, n)[:, None]
    nodes = np.stack(np.meshgrid(*[ax[:, j] for j in range(d)], indexing="ij"), axis=-1).reshape(-1, d)
    return A.tocsr(), nodes


def cube_lambda0(V, cube: Cube, h: float, tol: float = 1e-8, maxit: int = 500, n_1d: int = 4000) -> float:
    """Dirichlet lambda0 on a cube.

    A field with per-axis parts is handled exactly as a sum of 1D ground energies
    (n_1d cells each); otherwise the tensor-grid difference operator with spacing h is used.
    """
    parts = getattr(V, "separable", None)
    if parts is not None:
        s = cube.half_side
        return float(sum(interval_lambda0_1d(f, (c - s, c + s), n=n_1d) for f, c in zip(parts, cube.center)))
    A, nodes = cube_operator(cube, h)
    vals = np.asarray(V(nodes), dtype=float) if callable(V) else np.broadcast_to(
        np.asarray(V, dtype=float), (nodes.shape[0],))
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential is not finite on the grid nodes")
    return _eigen_iterate((A + sp.diags(vals)).tocsr(), nodes, h, tol, maxit).lambda0


def _centers(cov) -> list:
    if isinstance(cov, LatticeCovering):
        return covering_centers(cov)
    return [np.atleast_1d(np.asarray(c, dtype=float)) for c in cov]


def _map_trend(t: str) -> str:
    return {"bounded": "bounded-below", "declining": "unbounded-below"}.get(t, t)


def localization_scan(V, cov, r: float, h: float, workers: Optional[int] = None,
                      margin_factor: float = 2.0, domain: str = "ball") -> ScanSeries:
    """lambda0 on B_r(y) (or the cube of half-side r with ``domain="cube"``) for every center;
    failures are recorded per center."""
    centers = _centers(cov)
    if domain not in ("ball", "cube"):
        raise ValueError(f"unknown domain {domain!r}")

    def one(c):
        try:
            if domain == "cube":
                return cube_lambda0(V, Cube(c, r), h), None
            return dirichlet_lambda0(V, Ball(c, r), h).lambda0, None
        except (EigenConvergenceError, ValueError) as exc:
            return float("nan"), str(exc)

    out = map_ordered(one, centers, workers)
    vals = np.array([o[0] for o in out])
    errs = {i: o[1] for i, o in enumerate(out) if o[1] is not None}
    return ScanSeries(centers, vals, _map_trend(classify_trend(vals, margin_factor)), errs, h, 1e-8)


@dataclass(frozen=True)
class SplitScan:
    centers: list
    first: np.ndarray
    second: np.ndarray
    combined: np.ndarray


def split_operator_scan(V1, V2, theta1: float, theta2: float, cov, r: float, h: float,
                        total=None, workers: Optional[int] = None) -> SplitScan:
    """lambda0 of -Laplace + V_k/theta_k per center, and theta1*lam1 + theta2*lam2."""
    if not (theta1 > 0 and theta2 > 0 and abs(theta1 + theta2 - 1) < 1e-12):
        raise ValueError("need theta1, theta2 > 0 with theta1 + theta2 = 1")
    centers = _centers(cov)
    if total is not None:
        rng = np.random.default_rng(0)
        for c in centers:
            d = np.size(c)
            pts = np.asarray(c) + r * rng.uniform(-1, 1, size=(64, d)) / math.sqrt(d)
            if not np.allclose(V1(pts) + V2(pts), total(pts), rtol=1e-10, atol=1e-10):
                raise ValueError(f"V1 + V2 differs from V near center {c}")

    def one(c):
        b = Ball(c, r)
        l1 = dirichlet_lambda0(lambda x: V1(x) / theta1, b, h).lambda0
        l2 = dirichlet_lambda0(lambda x: V2(x) / theta2, b, h).lambda0
        return l1, l2

    out = map_ordered(one, centers, workers)
    l1 = np.array([o[0] for o in out])
    l2 = np.array([o[1] for o in out])
    return SplitScan(centers, l1, l2, theta1 * l1 + theta2 * l2)


# ---------------------------------------------------------------- radial shooting


def _half_samples(Vrad, r: float, n: int) -> np.ndarray:
    rho = np.linspace(0.0, r, 2 * n + 1)
    vs = np.asarray(Vrad(rho), dtype=float)
    if vs.shape != rho.shape:
        vs = np.broadcast_to(vs, rho.shape).copy()
    if not np.all(np.isfinite(vs)):
        raise ValueError("radial potential is not finite on [0, r]")
    return np.ascontiguousarray(vs)


def first_zero(Vrad, r: float, lam: float, d: int = 3, n_steps: int = 4000) -> float:
    """Position of the first zero of the regular radial solution on [0, r], or -1."""
    vs = _half_samples(Vrad, r, n_steps)
    z, _, _ = kernels.shoot_radial(vs, float(lam), int(d), r / n_steps, False)
    return z


def riccati_threshold(Vrad, r: float, d: int = 3, n_steps: int = 4000, rel_tol: float = 1e-6) -> RiccatiThreshold:
    """Largest lam for which the regular solution of u'' + (d-1)/rho u' = (V - lam) u stays positive on [0, r]."""
    vs = _half_samples(Vrad, r, n_steps)
    h = r / n_steps

    def hits(lam):
        return kernels.shoot_radial(vs, float(lam), int(d), h, False)[0] >= 0

    lo = float(vs.min()) - 1.0
    for _ in range(60):
        if not hits(lo):
            break
        lo -= 2 * (abs(lo) + 1)
    else:
        raise RuntimeError("could not bracket the threshold from below")
    hi = float(vs.max()) + (math.pi / r) ** 2 * (d + 2) / 3 + 1.0
    for _ in range(60):
        if hits(hi):
            break
        hi += 2 * (hi - lo)
    else:
        raise RuntimeError("could not bracket the threshold from above")
    while hi - lo > rel_tol * max(1.0, abs(0.5 * (lo + hi))):
        mid = 0.5 * (lo + hi)
        if hits(mid):
            hi = mid
        else:
            lo = mid
    return RiccatiThreshold(0.5 * (lo + hi), hi - lo)


def riccati_solution(Vrad, r: float, lam: float, d: int = 3, step: float = 1e-4) -> RiccatiProfile:
    """v = -ln u for the regular radial solution; raises once u vanishes on [0, r]."""
    n = int(math.ceil(r / step))
    h = r / n
    vs = _half_samples(Vrad, r, n)
    z, logu, w = kernels.shoot_radial(vs, float(lam), int(d), h, True)
    if z >= 0:
        raise ValueError(f"lambda = {lam} is past the threshold: u vanishes at rho = {z:.6g}")
    rho = np.linspace(0.0, r, n + 1)
    v = -np.asarray(logu)
    vp = -np.asarray(w)
    Vn = vs[::2]
    # -v'' - (d-1)/rho v' + v'^2 + lam - V, central differences at interior nodes
    d2 = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    d1 = (v[2:] - v[:-2]) / (2 * h)
    res = -d2 - (d - 1) / rho[1:-1] * d1 + d1 * d1 + lam - Vn[1:-1]
    return RiccatiProfile(rho, v, vp, float(np.max(np.abs(res))) if res.size else 0.0)


def interval_lambda0_1d(V1d, interval: tuple[float, float], n: int = 4000, subsamples: int = 8) -> float:
    """Smallest Dirichlet eigenvalue of -d^2/dx^2 + V on (a, b), three-point differences.

    V enters through its average over each node's cell, which keeps jumps second order.
    """
    a, b = map(float, interval)
    if not b > a:
        raise ValueError("empty interval")
    n = max(int(n), 200)
    h = (b - a) / n
    x = a + h * np.arange(1, n)
    offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    Vc = np.mean(np.asarray(V1d((x[:, None] + h * offs[None, :]).ravel()), dtype=float).reshape(x.size, -1), axis=1)
    diag = 2.0 / h ** 2 + Vc
    off = np.full(n - 2, -1.0 / h ** 2)
    w = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])
