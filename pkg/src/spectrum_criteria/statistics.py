"""Level-set measures, rearrangements, moments and trimmed integrals on quadrature grids.

Every function takes the field either as a callable on (n, d) points or as an array of
values at the grid nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Domain, QuadratureGrid, make_grid


@dataclass(frozen=True)
class LevelSetProfile:
    thresholds: np.ndarray
    measures: np.ndarray
    domain_measure: float


@dataclass(frozen=True)
class MomentSummary:
    expectation: float
    deviation: float
    second_moment: float


def default_grid(dom: Domain) -> QuadratureGrid:
    return make_grid(dom, dom.extent / 16)


def _grid(dom: Optional[Domain], grid: Optional[QuadratureGrid]) -> QuadratureGrid:
    if grid is not None:
        return grid
    if dom is None:
        raise ValueError("need a domain or a grid")
    return default_grid(dom)


def node_values(V, grid: QuadratureGrid) -> np.ndarray:
    if callable(V):
        vals = np.asarray(V(grid.nodes), dtype=float)
    else:
        vals = np.asarray(V, dtype=float)
    if vals.shape != (grid.size,):
        raise ValueError(f"field has shape {vals.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(vals)):
        raise ValueError("field is not finite on the grid")
    return vals


def level_measure(V, dom: Optional[Domain], s: float, grid: Optional[QuadratureGrid] = None) -> float:
    """Measure of {V >= s}."""
    g = _grid(dom, grid)
    vals = node_values(V, g)
    return float(np.sum(g.weights[vals >= s]))


def level_profile(V, dom: Optional[Domain], thresholds, grid: Optional[QuadratureGrid] = None) -> LevelSetProfile:
    g = _grid(dom, grid)
    vals = node_values(V, g)
    s = np.sort(np.asarray(thresholds, dtype=float))
    order = np.argsort(vals)
    cum = np.concatenate([np.cumsum(g.weights[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(vals[order], s, side="left")
    return LevelSetProfile(s, cum[idx], g.measure)


class _Sorted:
    """Node values sorted decreasingly with cumulative weights."""

    def __init__(self, vals: np.ndarray, weights: np.ndarray):
        order = np.argsort(-vals, kind="stable")
        self.vals = vals[order]
        self.w = weights[order]
        self.cum = np.cumsum(self.w)
        self.total = float(self.cum[-1])

    def rearranged(self, t: np.ndarray) -> np.ndarray:
        # smallest k with cumulative weight of the top k nodes >= t
        k = np.searchsorted(self.cum, t * (1 - 1e-13), side="left")
        k = np.minimum(k, self.vals.size - 1)
        return np.maximum(self.vals[k], 0.0)

    def top_mass(self, delta: float, positive_only: bool = False) -> float:
        vals, w, cum = self.vals, self.w, self.cum
        if positive_only:
            keep = vals > 0
            vals, w = vals[keep], w[keep]
            cum = np.cumsum(w)
            if vals.size == 0:
                return 0.0
        if delta <= 0:
            return 0.0
        if delta >= cum[-1]:
            return float(np.dot(vals, w))
        k = int(np.searchsorted(cum, delta, side="left"))
        before = cum[k - 1] if k > 0 else 0.0
        return float(np.dot(vals[:k], w[:k]) + vals[k] * (delta - before))


def rearrangement(V, dom: Optional[Domain], t, grid: Optional[QuadratureGrid] = None):
    """W*(t) = sup{s > 0: mes{V >= s} >= t}, exact for the grid's step-function model of V.

    Returns 0 when no positive level has measure t. Accepts scalar or array t.
    """
    g = _grid(dom, grid)
    srt = _Sorted(node_values(V, g), g.weights)
    ta = np.asarray(t, dtype=float)
    if np.any(ta <= 0) or np.any(ta > srt.total * (1 + 1e-9)):
        raise ValueError(f"t must lie in (0, {srt.total}]")
    out = srt.rearranged(ta)
    return float(out) if out.ndim == 0 else out


def trimmed_integral(V, dom: Optional[Domain], delta: float, grid: Optional[QuadratureGrid] = None,
                     signed: bool = False) -> float:
    """Integral of V with the mass on its highest-value set of measure delta removed.

    With ``signed`` negative values are allowed and only the positive part can be trimmed.
    """
    g = _grid(dom, grid)
    vals = node_values(V, g)
    if not signed and np.any(vals < 0):
        raise ValueError("trimmed_integral needs a nonnegative field (use its positive part)")
    if delta < 0 or delta > g.measure * (1 + 1e-12):
        raise ValueError(f"delta must lie in [0, {g.measure}]")
    srt = _Sorted(vals, g.weights)
    full = float(np.dot(vals, g.weights))
    if not signed and delta >= srt.total:
        return 0.0
    return full - srt.top_mass(delta, positive_only=signed)


def moments(V, dom: Optional[Domain], grid: Optional[QuadratureGrid] = None) -> MomentSummary:
    """Expectation and deviation under the normalized measure of the domain."""
    g = _grid(dom, grid)
    vals = node_values(V, g)
    w = g.weights / g.measure
    e = float(np.dot(w, vals))
    e2 = float(np.dot(w, vals * vals))
    var = float(np.dot(w, (vals - e) ** 2))
    return MomentSummary(e, float(np.sqrt(max(var, 0.0))), e2)


def lp_norm(V, dom: Optional[Domain], p: float, grid: Optional[QuadratureGrid] = None) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    g = _grid(dom, grid)
    vals = np.abs(node_values(V, g))
    return float(np.dot(g.weights, vals ** p) ** (1.0 / p))


def integral(V, dom: Optional[Domain], grid: Optional[QuadratureGrid] = None) -> float:
    g = _grid(dom, grid)
    return g.integrate(node_values(V, g))
