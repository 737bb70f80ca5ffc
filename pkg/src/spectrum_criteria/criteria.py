"""Sufficient and necessary spectral criteria evaluated as series over ball coverings.

Every verdict is trend evidence over the scanned centers, not a proof: the conditions
are limits as the center goes to infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma as sp_gamma

from . import statistics as st
from .geometry import (Ball, LatticeCovering, QuadratureGrid, covering_centers, make_grid,
                       make_shell_grid, triangle_grid, unit_ball_volume)
from .spectral import classify_trend, map_ordered
from .transport import radial_neumann_solve, simplex_mesh, grid_plaplace_minimize

EVIDENCE_NOTE = "trend evidence at scanned range; limits over |y| -> infinity are not verified"

# ---------------------------------------------------------------- constants

_LANCZOS_G = 7
_LANCZOS = (0.99999999999980993, 676.5203681218851, -1259.1392167224028, 771.32342877765313,
            -176.61502916214059, 12.507343278686905, -0.13857109526572012,
            9.9843695780195716e-6, 1.5056327351493116e-7)


def lanczos_gamma(x: float) -> float:
    """Gamma by the Lanczos series (g = 7, 9 terms), reflection below 1/2."""
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * lanczos_gamma(1 - x))
    x -= 1
    a = _LANCZOS[0]
    t = x + _LANCZOS_G + 0.5
    for i in range(1, len(_LANCZOS)):
        a += _LANCZOS[i] / (x + i)
    return math.sqrt(2 * math.pi) * t ** (x + 0.5) * math.exp(-t) * a


@dataclass(frozen=True)
class SobolevConstants:
    d: int
    C: float
    K: float
    c_iso: float
    C_lanczos: float


def sobolev_C(d: int, gamma_fn: Callable[[float], float] = sp_gamma) -> float:
    return math.sqrt(1.0 / (math.pi * d * (d - 2))) * (gamma_fn(d) / gamma_fn(d / 2)) ** (1.0 / d)


def sobolev_constants(d: int) -> SobolevConstants:
    if d < 3:
        raise ValueError("the Sobolev constants need d >= 3")
    C = sobolev_C(d, lambda x: float(sp_gamma(x)))
    c_iso = float((d * (d - 2) * unit_ball_volume(d) ** (2.0 / d)) ** (-d / (d - 2.0)))
    return SobolevConstants(d, C, 1.0 / (C * C), c_iso, sobolev_C(d, lanczos_gamma))


def default_gamma(r: float, d: int) -> float:
    """gamma(r) = r^(d/(d-2)) clipped to (0, 0.99]."""
    return min(r ** (d / (d - 2.0)), 0.99) if d > 2 else min(r, 0.99)


# ---------------------------------------------------------------- verdicts


@dataclass
class CriterionVerdict:
    name: str
    centers: list
    values: np.ndarray                 # (n_rows, n_centers)
    labels: list                       # one label per row, e.g. "r=0.5"
    trends: list
    trend: str
    threshold: Optional[float] = None
    caveats: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)

    @property
    def series(self) -> np.ndarray:
        return self.values[0]

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "centers": [list(map(float, c)) for c in self.centers],
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "trends": list(self.trends),
            "trend": self.trend,
            "threshold": self.threshold,
            "caveats": list(self.caveats),
            "extra": _plain(self.extra),
            "resolution": _plain(self.resolution),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _overall(trends: Sequence[str]) -> str:
    return trends[0] if len(set(trends)) == 1 else "inconclusive"


def _centers(cov) -> list:
    if isinstance(cov, LatticeCovering):
        return covering_centers(cov)
    return [np.atleast_1d(np.asarray(c, dtype=float)) for c in cov]


def ball_grid(V, center, r: float, h: Optional[float] = None, quadrature: str = "auto") -> QuadratureGrid:
    """Quadrature on B_r(center): radial product rule when V declares radial structure about
    the center (jump radii), otherwise the midpoint cube grid with spacing h (default r/16)."""
    center = np.asarray(center, dtype=float)
    ball = Ball(center, r)
    brk = V.radial_breaks(center) if hasattr(V, "radial_breaks") else []
    use_shell = quadrature == "shell" or (quadrature == "auto" and getattr(V, "breaks", None) is not None)
    if use_shell:
        return make_shell_grid(ball, [b for b in brk if 0 < b < r])
    return make_grid(ball, h if h is not None else r / 16)


def _ball_values(V, centers, r, h, quadrature, fn, workers=None) -> np.ndarray:
    def one(c):
        g = ball_grid(V, c, r, h, quadrature)
        return fn(st.node_values(V, g), g)

    return np.array(map_ordered(one, centers, workers), dtype=float)


# ---------------------------------------------------------------- sufficient conditions


def check_negative_part(V, cov, r0: float, h: Optional[float] = None, quadrature: str = "auto",
                        margin_factor: float = 2.0) -> CriterionVerdict:
    """(int_B V_-^(d/2))^(2/d) per center against K(d)."""
    centers = _centers(cov)
    d = np.size(centers[0])
    K = sobolev_constants(d).K
    vals = _ball_values(V, centers, r0, h, quadrature,
                        lambda v, g: g.integrate(np.maximum(-v, 0.0) ** (d / 2)) ** (2.0 / d))
    q = max(1, vals.size // 4)
    if np.max(vals[-q:]) >= K:
        trend = "violating"
    else:
        trend = classify_trend(vals, margin_factor)
    return CriterionVerdict("negative_part", centers, vals[None], [f"r={r0}"], [trend], trend, K,
                            [EVIDENCE_NOTE], {"shape": classify_trend(vals, margin_factor)},
                            {"r0": r0, "h": h, "quadrature": quadrature})


def check_uniform_tail(V, cov, r0: float, N_list: Sequence[float], h: Optional[float] = None,
                       quadrature: str = "auto") -> CriterionVerdict:
    """I_y(N) = int_B (V + N)_-^(d/2); passes when sup_y I_y(N) <= K(d)^(d/2) for some N."""
    N_list = [float(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    centers = _centers(cov)
    d = np.size(centers[0])
    K = sobolev_constants(d).K
    lim = K ** (d / 2)

    def fn(v, g):
        return [g.integrate(np.maximum(-(v + N), 0.0) ** (d / 2)) for N in N_list]

    def one(c):
        gr = ball_grid(V, c, r0, h, quadrature)
        return fn(st.node_values(V, gr), gr)

    mat = np.array(map_ordered(one, centers)).T
    sups = mat.max(axis=1)
    ok = [N for N, s in zip(N_list, sups) if s <= lim]
    trend = "bounded" if ok else "violating"
    return CriterionVerdict("uniform_tail", centers, mat, [f"N={N:g}" for N in N_list],
                            ["bounded" if s <= lim else "violating" for s in sups], trend, lim,
                            [EVIDENCE_NOTE], {"sup_over_centers": sups, "passing_N": ok},
                            {"r0": r0, "h": h, "quadrature": quadrature})


def _per_r(name, Vplus, cov, r_list, fn, h, quadrature, margin_factor, gamma, extra_caveats=()):
    centers = _centers(cov)
    d = np.size(centers[0])
    rows, labels, trends = [], [], []
    caveats = [EVIDENCE_NOTE, *extra_caveats]
    neg = False
    for r in r_list:
        gm = gamma(r) if callable(gamma) else (default_gamma(r, d) if gamma is None else float(gamma))
        if not 0 < gm < 1:
            raise ValueError(f"gamma({r}) = {gm} outside (0, 1)")

        def one(c, r=r, gm=gm):
            g = ball_grid(Vplus, c, r, h, quadrature)
            v = st.node_values(Vplus, g)
            return fn(v, g, gm), bool(np.any(v < 0))

        out = map_ordered(one, centers)
        row = np.array([o[0] for o in out])
        neg = neg or any(o[1] for o in out)
        rows.append(row)
        labels.append(f"r={r:g},gamma={gm:.6g}")
        trends.append(classify_trend(row, margin_factor))
    if neg:
        caveats.append("field had negative values; its positive part was used")
    return CriterionVerdict(name, centers, np.array(rows), labels, trends, _overall(trends), None, caveats,
                            {}, {"r_list": list(r_list), "h": h, "quadrature": quadrature})


def check_rearrangement(Vplus, cov, r_list: Sequence[float], gamma=None, h: Optional[float] = None,
                        quadrature: str = "auto", margin_factor: float = 2.0) -> CriterionVerdict:
    """V_+*(gamma(r) |B_r|) per center and radius."""

    def fn(v, g, gm):
        return st.rearrangement(np.maximum(v, 0.0), None, gm * g.measure, g)

    return _per_r("rearrangement", Vplus, cov, r_list, fn, h, quadrature, margin_factor, gamma)


def check_expectation_deviation(Vplus, cov, r_list: Sequence[float], gamma=None, h: Optional[float] = None,
                                quadrature: str = "auto", margin_factor: float = 2.0) -> CriterionVerdict:
    """E(V_+) - sqrt(gamma(r)) Dev(V_+) under the normalized measure of each ball."""

    def fn(v, g, gm):
        m = st.moments(np.maximum(v, 0.0), None, g)
        return m.expectation - math.sqrt(gm) * m.deviation

    return _per_r("expectation_deviation", Vplus, cov, r_list, fn, h, quadrature, margin_factor, gamma)


def check_trimmed_integral(Vplus, cov, r_list: Sequence[float], gamma=None, h: Optional[float] = None,
                           quadrature: str = "auto", margin_factor: float = 2.0,
                           signed: bool = False) -> CriterionVerdict:
    """int_B V minus its top gamma(r)|B_r| mass. ``signed`` keeps negative values of V."""

    def fn(v, g, gm):
        vv = v if signed else np.maximum(v, 0.0)
        return st.trimmed_integral(vv, None, gm * g.measure, g, signed=signed)

    cav = ("signed field: only the positive part is trimmed",) if signed else ()
    out = _per_r("trimmed_integral", Vplus, cov, r_list, fn, h, quadrature, margin_factor, gamma, cav)
    if signed:
        out.caveats = [c for c in out.caveats if not c.startswith("field had negative")]
    return out


def _transport_one(V, c, r0: float, h: float, quadrature: str):
    g = ball_grid(V, c, r0, None, quadrature)
    E = st.moments(V, None, g).expectation
    ball = Ball(c, r0)
    split = V.radial_part(c) if getattr(V, "radial_part", None) is not None else None
    mesh = simplex_mesh(ball, h)
    if split is not None:
        prof, brk, rem = split
        rad = radial_neumann_solve(prof, r0, ball.dim, brk).field_norm
        _, F = grid_plaplace_minimize(rem, float(ball.dim), mesh, center_mean=True)
        return E, rad + F.norm_d, True
    _, F = grid_plaplace_minimize(V, float(ball.dim), mesh, center_mean=True)
    return E, F.norm_d, False


def check_transport(V, cov, r0: float, h: Optional[float] = None, quadrature: str = "auto",
                    margin_factor: float = 2.0) -> CriterionVerdict:
    """Per-center upper estimate of D_d(V - E_{y,r0}V) against 1/(2C(d)), plus the E series."""
    centers = _centers(cov)
    d = np.size(centers[0])
    thr = 1.0 / (2.0 * sobolev_constants(d).C)
    h = r0 / 12 if h is None else h
    caveats = [EVIDENCE_NOTE,
               "transport values are upper estimates (no-flux minimizer); a violated bound is inconclusive",
               "no-flux boundary condition imposed, the unconstrained infimum may be smaller"]
    errors = {}

    def one(ic):
        i, c = ic
        try:
            return _transport_one(V, c, r0, h, quadrature) + (None,)
        except Exception as exc:  # recorded per center, the scan continues
            return float("nan"), float("nan"), False, f"{type(exc).__name__}: {exc}"

    out = map_ordered(one, list(enumerate(centers)))
    E = np.array([o[0] for o in out])
    B = np.array([o[1] for o in out])
    errors = {i: o[3] for i, o in enumerate(out) if o[3] is not None}
    if any(o[2] for o in out):
        caveats.append("radial part solved in closed form, smooth remainder on the grid (triangle inequality)")
    q = max(1, B.size // 4)
    tail = B[-q:]
    satisfied = bool(np.all(np.isfinite(tail)) and np.max(tail) < thr)
    e_trend = classify_trend(E, margin_factor)
    if not satisfied:
        evidence = "inconclusive"
    elif e_trend == "diverging":
        evidence = "discreteness evidence"
    elif e_trend != "declining":
        evidence = "semi-boundedness evidence"
    else:
        evidence = "inconclusive"
    trend = "bounded" if satisfied else "violating"
    return CriterionVerdict("transport", centers, np.vstack([B, E]), ["transport_bound", "expectation"],
                            [trend, e_trend], trend, thr, caveats,
                            {"evidence": evidence, "errors": errors},
                            {"r0": r0, "mesh_h": h, "quadrature": quadrature, "rel_tol": 1e-10})


# ---------------------------------------------------------------- necessary conditions


def ball_integral_profile(V, center, r: float, t_points: Sequence[float], breaks: Sequence[float] = (),
                          order: int = 3, n_polar: int = 16) -> np.ndarray:
    """W_y(t) = int_{B_t(y)} V at the given radii, by Gauss panels between consecutive radii."""
    from scipy.special import roots_legendre

    from .geometry import sphere_directions

    center = np.asarray(center, dtype=float)
    d = center.size
    t_points = np.asarray(t_points, dtype=float)
    edges = np.array(sorted({0.0, *t_points.tolist(), *[b for b in breaks if 0 < b < r]}))
    x, w = roots_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    rad = (lo[:, None] + half[:, None] * (x[None, :] + 1)).ravel()
    wr = (half[:, None] * w[None, :]).ravel()
    dirs, wd = sphere_directions(d, n_polar)
    pts = center + rad[:, None, None] * dirs[None, :, :]
    vals = np.asarray(V(pts.reshape(-1, d)), dtype=float).reshape(rad.size, -1)
    shell = (vals @ wd) * rad ** (d - 1) * wr
    cum = np.concatenate([[0.0], np.cumsum(shell.reshape(lo.size, order).sum(axis=1))])
    return cum[np.searchsorted(edges, t_points)]


def measure_trend(values: Sequence[float], ratio: float = 0.5, margin_factor: float = 2.0) -> str:
    """Trend of a nonnegative measure series: "declining" when the four quartile means never
    increase and the last is below ``ratio`` times the first, else the shared head/tail rule."""
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size >= 4:
        qm = np.array([b.mean() for b in np.array_split(v, 4)])
        tol = 1e-12 * max(1.0, float(np.max(np.abs(v))))
        if np.all(np.diff(qm) <= tol) and qm[-1] < ratio * qm[0]:
            return "declining"
    return classify_trend(v, margin_factor)


@dataclass
class NecessaryMeasures:
    centers: list
    A_list: list
    mes1: np.ndarray      # (nA, n_centers)
    mes2: np.ndarray
    r: float
    m: int
    trends1: list
    trends2: list

    def as_dict(self) -> dict:
        return _plain({"centers": [list(map(float, c)) for c in self.centers], "A_list": self.A_list,
                       "mes1": self.mes1, "mes2": self.mes2, "r": self.r, "m": self.m,
                       "trends1": self.trends1, "trends2": self.trends2,
                       "caveats": [EVIDENCE_NOTE, "declining series are necessary, not sufficient, evidence"]})


def necessary_measure_conditions(V, y_series, r: float, A_list: Sequence[float] = (1.0, 10.0, 100.0),
                                 m: int = 100, margin_factor: float = 2.0) -> NecessaryMeasures:
    """mes_1{t in (0,r): W_y(t) <= A} and mes_2{(s,t) in triangle: W_y(t) - W_y(s) <= A}."""
    centers = _centers(y_series)
    h = r / m
    tri, tw = triangle_grid(r, m)
    t1 = (np.arange(m) + 0.5) * h
    # all needed radii are multiples of h/6
    ks = np.arange(1, 6 * m + 1)
    fine = ks * h / 6

    def lookup(x):
        return np.clip(np.rint(x / (h / 6)).astype(int) - 1, 0, ks.size - 1)

    A_list = [float(a) for a in A_list]

    def one(c):
        brk = V.radial_breaks(c) if hasattr(V, "radial_breaks") else []
        Wt = ball_integral_profile(V, c, r, fine, brk)
        w1 = Wt[lookup(t1)]
        ws, wt = Wt[lookup(tri[:, 0])], Wt[lookup(tri[:, 1])]
        m1 = [float(h * np.sum(w1 <= A)) for A in A_list]
        m2 = [float(np.sum(tw[(wt - ws) <= A])) for A in A_list]
        return m1, m2

    out = map_ordered(one, centers)
    mes1 = np.array([o[0] for o in out]).T
    mes2 = np.array([o[1] for o in out]).T
    return NecessaryMeasures(centers, A_list, mes1, mes2, r, m,
                             [measure_trend(row, margin_factor=margin_factor) for row in mes1],
                             [measure_trend(row, margin_factor=margin_factor) for row in mes2])


def necessary_molchanov(V, cov, r_list: Sequence[float], h: Optional[float] = None, quadrature: str = "auto",
                        margin_factor: float = 2.0) -> CriterionVerdict:
    """int_{B_r(y)} V per center; divergence is necessary for discreteness when V >= 0."""

    def fn(v, g, gm):
        return g.integrate(v)

    out = _per_r("molchanov", V, cov, r_list, fn, h, quadrature, margin_factor, 0.5)
    out.labels = [f"r={r:g}" for r in r_list]
    if any(c.startswith("field had negative") for c in out.caveats):
        out.caveats = [c for c in out.caveats if not c.startswith("field had negative")]
        out.caveats.append("V takes negative values: divergence is then not a necessary condition")
    return out
