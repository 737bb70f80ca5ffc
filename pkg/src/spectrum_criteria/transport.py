"""Divergence-constrained transport: radial closed form and P1 energy minimization.

For W with zero mean on a domain, the field of least L^p norm with div F = W (no flux
through the boundary) comes from the dual q-Laplace Neumann problem
    div(|grad u|^(q-2) grad u) = kappa W,   kappa = p^(1/(p-1)),  q = p/(p-1),
as F = |grad u|^(q-2) grad u / kappa.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import roots_legendre

from . import kernels
from .geometry import Ball, Cube, QuadratureGrid, unit_sphere_area


class CompatibilityError(ValueError):
    """Raised when W does not integrate to zero (no solution of the Neumann problem)."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = defect


class TransportSolverError(RuntimeError):
    pass


def signed_power(a, alpha: float):
    a = np.asarray(a, dtype=float)
    return np.sign(a) * np.abs(a) ** alpha


# ---------------------------------------------------------------- radial


@dataclass(frozen=True)
class RadialSolution:
    rho: np.ndarray
    v: np.ndarray
    uprime: np.ndarray
    flux: np.ndarray
    energy: float
    bound: float
    field_norm: float
    d: int


def _panels(r0: float, breaks: Sequence[float], n_panels: int) -> np.ndarray:
    edges = set(np.linspace(0.0, r0, n_panels + 1).tolist())
    edges.update(float(b) for b in breaks if 0 < b < r0)
    return np.array(sorted(edges))


def radial_neumann_solve(Wtilde: Callable, r0: float, d: int = 3, breaks: Sequence[float] = (),
                         n_panels: int = 400, order: int = 10, tol: float = 1e-8) -> RadialSolution:
    """Radial solution on B_r0 for W(x) = Wtilde(|x|).

    I(r) = int_0^r Wtilde rho^(d-1), flux F_r = I(r) r^(1-d) (the least-norm radial field),
    v = -d^(1/(d-1)) F_r and u' = v^<d-1>. ``field_norm`` is ||F||_d; ``bound`` is
    (energy / d^(1/(d-1)))^(1/d) = d^(1/d) ||F||_d.
    """
    if d < 2:
        raise ValueError("radial transport needs d >= 2")
    edges = _panels(r0, breaks, n_panels)
    x, w = roots_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = lo[:, None] + half[:, None] * (x[None, :] + 1)
    f = lambda r: np.asarray(Wtilde(r), dtype=float) * np.asarray(r) ** (d - 1)  # noqa: E731
    panel_int = np.sum(w[None, :] * half[:, None] * f(nodes), axis=1)
    I_edges = np.concatenate([[0.0], np.cumsum(panel_int)])
    scale = float(np.sum(w[None, :] * half[:, None] * np.abs(f(nodes))))
    defect = float(I_edges[-1])
    if abs(defect) > tol * max(1.0, scale):
        raise CompatibilityError(f"int_0^r0 W rho^(d-1) = {defect:.3e} is not zero", defect)
    # I at the outer quadrature nodes: partial panel integrals
    sub_half = 0.5 * (nodes - lo[:, None])
    sub_pts = lo[:, None, None] + sub_half[:, :, None] * (x[None, None, :] + 1)
    I_nodes = I_edges[:-1, None] + np.sum(w[None, None, :] * sub_half[:, :, None] * f(sub_pts), axis=2)
    flux_nodes = I_nodes / nodes ** (d - 1)
    om = unit_sphere_area(d)
    wq = w[None, :] * half[:, None]
    norm_d = (om * float(np.sum(wq * np.abs(flux_nodes) ** d * nodes ** (d - 1)))) ** (1.0 / d)
    kap = d ** (1.0 / (d - 1))
    qd = d / (d - 1.0)
    up_nodes = signed_power(-kap * flux_nodes, d - 1.0)
    energy = om * float(np.sum(wq * np.abs(up_nodes) ** qd * nodes ** (d - 1)))
    bound = (energy / kap) ** (1.0 / d)
    rho = edges
    flux = np.where(rho > 0, I_edges / np.where(rho > 0, rho, 1.0) ** (d - 1), 0.0)
    v = -kap * flux
    return RadialSolution(rho, v, signed_power(v, d - 1.0), flux, energy, bound, norm_d, d)


# ---------------------------------------------------------------- simplex mesh


@dataclass(frozen=True)
class SimplexMesh:
    """Kuhn split of the cube cells (side h) whose centers lie in the domain."""

    h: float
    origin: np.ndarray
    vertices: np.ndarray      # integer lattice coordinates, (nv, d)
    cells: np.ndarray         # integer lower corners, (nc, d)
    simplices: np.ndarray     # (ns, d+1) vertex indices, int32
    stype: np.ndarray         # (ns,) permutation index, int32
    perms: tuple
    G: np.ndarray             # (d!, d, d+1) barycentric gradients
    domain: object = None

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def vol(self) -> float:
        return self.h ** self.dim / math.factorial(self.dim)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.h * self.vertices

    @property
    def measure(self) -> float:
        return self.cells.shape[0] * self.h ** self.dim

    def hat_mass(self) -> np.ndarray:
        """int phi_i for each vertex."""
        cnt = np.bincount(self.simplices.ravel(), minlength=self.n_vertices)
        return cnt * self.vol / (self.dim + 1)

    def hat_l2(self) -> np.ndarray:
        cnt = np.bincount(self.simplices.ravel(), minlength=self.n_vertices)
        d = self.dim
        return np.sqrt(cnt * self.vol * 2.0 / ((d + 1) * (d + 2)))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        Gs = self.G[self.stype]
        return np.einsum("sak,sk->sa", Gs, u[self.simplices])

    def centroids(self) -> np.ndarray:
        return self.points[self.simplices].mean(axis=1)


def simplex_mesh(dom: Union[Ball, Cube], h: float) -> SimplexMesh:
    d = dom.dim
    if d > 8:
        raise ValueError("simplex meshes are limited to d <= 8")
    if not 0 < h < dom.extent:
        raise ValueError(f"mesh size {h} incompatible with domain extent {dom.extent}")
    K = int(math.ceil(dom.radius / h))
    ks = np.arange(-K, K)
    C = np.stack(np.meshgrid(*([ks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    cen = dom.center + (C + 0.5) * h
    C = C[dom.contains(cen)]
    if C.shape[0] == 0:
        raise ValueError("mesh has no cells inside the domain")
    corners = np.array(list(itertools.product((0, 1), repeat=d)))
    allv = (C[:, None, :] + corners[None]).reshape(-1, d)
    verts, inv = np.unique(allv, axis=0, return_inverse=True)
    inv = inv.reshape(C.shape[0], 2 ** d)
    cidx = {tuple(c): i for i, c in enumerate(corners)}
    perms = tuple(itertools.permutations(range(d)))
    G = np.zeros((len(perms), d, d + 1))
    blocks, types = [], []
    for t, perm in enumerate(perms):
        path = [np.zeros(d, dtype=int)]
        for k, ax in enumerate(perm):
            nxt = path[-1].copy()
            nxt[ax] = 1
            path.append(nxt)
            G[t, ax, k + 1] = 1.0 / h
            G[t, ax, k] = -1.0 / h
        blocks.append(inv[:, [cidx[tuple(v)] for v in path]])
        types.append(np.full(C.shape[0], t))
    simp = np.ascontiguousarray(np.stack(blocks, axis=1).reshape(-1, d + 1).astype(np.int32))
    stype = np.ascontiguousarray(np.stack(types, axis=1).reshape(-1).astype(np.int32))
    return SimplexMesh(h, np.asarray(dom.center, dtype=float), verts, C, simp, stype, perms, G, dom)


def _duffy_rule(d: int, order: int):
    """Gauss rule on {1 >= c_1 >= ... >= c_d >= 0}; weights sum to 1/d!."""
    x, w = roots_legendre(order)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    T = np.stack(np.meshgrid(*([x] * d), indexing="ij"), axis=-1).reshape(-1, d)
    Wt = np.prod(np.stack(np.meshgrid(*([w] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
    c = np.cumprod(T, axis=1)
    jac = np.prod(T ** (d - 1 - np.arange(d))[None, :], axis=1)
    lam = np.concatenate([1 - c[:, :1], c[:, :-1] - c[:, 1:], c[:, -1:]], axis=1)
    return c, Wt * jac, lam


def assemble_load(W, mesh: SimplexMesh, order: int = 3, chunk: int = 200_000):
    """Load vector int W phi_i and ||W||_2 on the mesh.

    W may be a callable (Gauss-Duffy quadrature on every simplex), values at cell centers,
    or values at vertices (lumped).
    """
    d = mesh.dim
    nv = mesh.n_vertices
    if callable(W):
        c, wq, lam = _duffy_rule(d, order)
        wq = wq * math.factorial(d)  # rule on the unit ordered simplex, normalized to 1
        load = np.zeros(nv)
        sq = 0.0
        nc = mesh.cells.shape[0]
        for t, perm in enumerate(mesh.perms):
            loc = np.zeros((c.shape[0], d))
            loc[:, list(perm)] = c
            sl = mesh.simplices.reshape(nc, len(mesh.perms), d + 1)[:, t, :]
            for s0 in range(0, nc, max(1, chunk // c.shape[0])):
                s1 = min(nc, s0 + max(1, chunk // c.shape[0]))
                pts = mesh.origin + mesh.h * (mesh.cells[s0:s1, None, :] + loc[None])
                Wq = np.asarray(W(pts.reshape(-1, d)), dtype=float).reshape(s1 - s0, -1)
                if not np.all(np.isfinite(Wq)):
                    raise ValueError("W is not finite at quadrature points")
                sq += mesh.vol * float(np.sum(Wq ** 2 * wq[None]))
                contrib = mesh.vol * (Wq * wq[None]) @ lam
                load += np.bincount(sl[s0:s1].ravel(), weights=contrib.ravel(), minlength=nv)
        return load, math.sqrt(sq)
    vals = np.asarray(W, dtype=float).ravel()
    if vals.size == mesh.cells.shape[0]:
        per = np.repeat(vals, len(mesh.perms)) * mesh.vol / (d + 1)
        load = np.bincount(mesh.simplices.ravel(), weights=np.repeat(per, d + 1), minlength=nv)
        return load, math.sqrt(float(np.sum(vals ** 2)) * mesh.h ** d)
    if vals.size == nv:
        m = mesh.hat_mass()
        return vals * m, math.sqrt(float(np.sum(m * vals ** 2)))
    raise ValueError(f"W has {vals.size} values; mesh has {mesh.cells.shape[0]} cells and {nv} vertices")


def center_load(load: np.ndarray, mesh: SimplexMesh) -> np.ndarray:
    """Subtract the constant that makes the load integrate to zero."""
    m = mesh.hat_mass()
    return load - load.sum() * m / m.sum()


@dataclass(frozen=True)
class VectorFieldGrid:
    mesh: SimplexMesh
    values: np.ndarray        # (ns, d), constant on each simplex
    p: float
    load: np.ndarray          # int W phi_i used by the solver
    w_norm: float
    eps_sensitivity: float = 0.0
    iterations: int = 0
    message: str = ""

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.centroids()

    def norm(self, s: Optional[float] = None) -> float:
        s = self.p if s is None else s
        mag = np.linalg.norm(self.values, axis=1)
        return float((self.mesh.vol * np.sum(mag ** s)) ** (1.0 / s))

    @property
    def norm_d(self) -> float:
        return self.norm(self.mesh.dim)


def _energy(mesh: SimplexMesh, q: float, eps2: float, load: np.ndarray):
    simp, stype, G, vol = mesh.simplices, mesh.stype, np.ascontiguousarray(mesh.G), mesh.vol

    def fg(u):
        e, g = kernels.simplex_energy_grad(np.ascontiguousarray(u), simp, stype, G, vol, q, eps2)
        return e + float(load @ u), g + load

    return fg


def grid_plaplace_minimize(W, p: float, mesh: Union[SimplexMesh, QuadratureGrid], center_mean: bool = False,
                           order: int = 3, rel_tol: float = 1e-10, maxiter: int = 20000,
                           eps: float = 1e-8, mean_tol: float = 1e-8):
    """Minimize (1/q) int (|grad u|^2 + eps^2)^(q/2) + kappa int W u over P1 functions.

    Returns (u at mesh vertices, VectorFieldGrid). W must have zero mean unless
    ``center_mean`` asks for the mean to be removed. The problem is solved for W/s
    (s = ||W||_2 / sqrt(|domain|)) and rescaled, so the stop rule is scale free.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if isinstance(mesh, QuadratureGrid):
        if mesh.domain is None:
            raise ValueError("grid has no parent domain")
        mesh = simplex_mesh(mesh.domain, mesh.h)
    q = p / (p - 1.0)
    kappa = p ** (1.0 / (p - 1.0))
    load, wn = assemble_load(W, mesh, order)
    total = float(load.sum())
    absmass = float(np.sum(np.abs(load)))
    if not center_mean and abs(total) > mean_tol * max(1.0, absmass):
        raise CompatibilityError(f"W has nonzero mean: int W = {total:.3e}", total)
    load = center_load(load, mesh)
    nv = mesh.n_vertices
    scale = wn / math.sqrt(mesh.measure)
    if scale == 0.0 or not np.any(load):
        zero = np.zeros((mesh.simplices.shape[0], mesh.dim))
        return np.zeros(nv), VectorFieldGrid(mesh, zero, p, load, wn)
    fg = _energy(mesh, q, eps * eps, kappa * load / scale)
    opts = dict(maxcor=30, gtol=0.0, maxls=40)
    # a short warm-up fixes the energy scale so that ftol acts as a relative tolerance
    pre = minimize(fg, np.zeros(nv), jac=True, method="L-BFGS-B", options=dict(opts, maxiter=50, ftol=0.0))
    ref = max(abs(float(pre.fun)), 1e-300)

    def scaled(u):
        e, g = fg(u)
        return e / ref, g / ref

    res = minimize(scaled, pre.x, jac=True, method="L-BFGS-B",
                   options=dict(opts, maxiter=maxiter, ftol=rel_tol))
    res.nit += pre.nit
    u = res.x - np.mean(res.x)
    if not np.all(np.isfinite(u)):
        raise TransportSolverError(f"descent diverged: {res.message}")
    g = mesh.gradients(u)
    n2 = np.sum(g * g, axis=1)
    F = ((n2 + eps * eps) ** ((q - 2) / 2))[:, None] * g / kappa
    F_exact = (np.where(n2 > 0, n2, 1.0) ** ((q - 2) / 2) * (n2 > 0))[:, None] * g / kappa
    vf_reg = (mesh.vol * np.sum(np.linalg.norm(F, axis=1) ** p)) ** (1 / p)
    vf_ex = (mesh.vol * np.sum(np.linalg.norm(F_exact, axis=1) ** p)) ** (1 / p)
    sens = abs(vf_reg - vf_ex) / max(vf_ex, 1e-300)
    u_scaled = u * scale ** (1.0 / (q - 1.0))
    field_ = VectorFieldGrid(mesh, F * scale, p, load, wn, sens, int(res.nit), str(res.message))
    return u_scaled, field_


def discrete_energy(u: np.ndarray, vf: VectorFieldGrid, eps: float = 1e-8) -> float:
    """Energy of the unscaled problem at u (used for optimality checks)."""
    p = vf.p
    q = p / (p - 1.0)
    kappa = p ** (1.0 / (p - 1.0))
    fg = _energy(vf.mesh, q, eps * eps, kappa * vf.load)
    return fg(np.asarray(u, dtype=float))[0]


def divergence_residual(F: VectorFieldGrid, W=None, order: int = 3, center: bool = False) -> float:
    """max_i |int F.grad phi_i + int W phi_i| / (||phi_i||_2 ||W||_2) over all hat functions.

    Hat functions at boundary vertices are included (no-flux condition). ``W=None`` uses
    the load stored with F.
    """
    mesh = F.mesh
    if W is None:
        load, wn = F.load, F.w_norm
    else:
        load, wn = assemble_load(W, mesh, order)
        if center:
            load = center_load(load, mesh)
    Gs = mesh.G[mesh.stype]
    contrib = mesh.vol * np.einsum("sak,sa->sk", Gs, F.values)
    r = np.bincount(mesh.simplices.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices) + load
    return float(np.max(np.abs(r) / mesh.hat_l2()) / (wn if wn > 0 else 1.0))


def nodal_divergence(values: np.ndarray, mesh: SimplexMesh) -> np.ndarray:
    """Lumped weak divergence of a piecewise-constant field, one value per vertex."""
    Gs = mesh.G[mesh.stype]
    contrib = mesh.vol * np.einsum("sak,sa->sk", Gs, values)
    r = np.bincount(mesh.simplices.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)
    return -r / mesh.hat_mass()


def d_bound(W, dom: Union[Ball, Cube], h: Optional[float] = None, mesh: Optional[SimplexMesh] = None,
            center_mean: bool = False, **kw) -> float:
    """||F||_d of the computed minimizer: an upper estimate of the least L^d norm with div F = W."""
    if mesh is None:
        mesh = simplex_mesh(dom, h if h is not None else dom.extent / 12)
    _, F = grid_plaplace_minimize(W, float(mesh.dim), mesh, center_mean=center_mean, **kw)
    return F.norm_d
