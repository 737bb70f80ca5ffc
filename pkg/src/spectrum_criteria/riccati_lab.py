"""Integral-inequality sets of the Riccati comparison argument.

E(u, lam) = {(s, t): 0 < s < t < r, u(t) - u(s) > int_s^t u^2 + lam (t - s)} shrinks as lam
grows because solutions of w = int w^2 + lam z blow up at pi / (2 sqrt(lam)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .geometry import triangle_grid
from .potential import tent_train

# bounded continuous test functions u on [0, r]
TEST_FAMILY = {
    "zero": lambda t: 0.0 * np.asarray(t, dtype=float),
    "const": lambda t: 0.0 * np.asarray(t, dtype=float) + 3.0,
    "sin": lambda t: np.sin(10.0 * np.asarray(t, dtype=float)),
    "linear": lambda t: 5.0 * np.asarray(t, dtype=float),
    "tent": lambda t: tent_train(4.0 * np.asarray(t, dtype=float)),
}


@dataclass(frozen=True)
class TriangleSublevel:
    r: float
    m: int
    nodes: np.ndarray
    indicator: np.ndarray
    weights: np.ndarray
    measure: float
    refinement_change: float = 0.0


def _cumulative_square(u: Callable, r: float, n: int):
    """P(x) = int_0^x u^2 on a uniform grid of n cells (Simpson on half cells)."""
    x = np.linspace(0.0, r, 2 * n + 1)
    y = np.asarray(u(x), dtype=float) ** 2
    cell = (x[2] - x[0]) / 6.0 * (y[:-2:2] + 4 * y[1:-1:2] + y[2::2])
    P = np.concatenate([[0.0], np.cumsum(cell)])
    return x[::2], P


def _en_once(u: Callable, lam: float, r: float, m: int):
    nodes, w = triangle_grid(r, m)
    xs, P = _cumulative_square(u, r, 24 * m)
    s, t = nodes[:, 0], nodes[:, 1]
    g = lambda z: np.asarray(u(z), dtype=float) - np.interp(z, xs, P) - lam * z  # noqa: E731
    ind = g(t) > g(s)
    return nodes, w, ind, float(np.sum(w[ind]))


def en_measure(u: Callable, lam: float, r: float, m: int = 200, refine: bool = True,
               max_m: int = 3200, rel_change: float = 0.02) -> TriangleSublevel:
    """Grid estimate of mes_2 E(u, lam) on the triangle 0 < s < t < r.

    With ``refine`` the resolution doubles until successive estimates differ by less than
    ``rel_change`` (relative to the triangle area when the set is small).
    """
    nodes, w, ind, mes = _en_once(u, lam, r, m)
    change = 0.0
    if refine:
        while True:
            n2, w2, i2, mes2 = _en_once(u, lam, r, 2 * m)
            change = abs(mes2 - mes) / max(mes2, mes, 1e-300) if max(mes, mes2) > 0 else 0.0
            nodes, w, ind, mes, m = n2, w2, i2, mes2, 2 * m
            if change < rel_change or abs(mes2 - mes) < 1e-12 or 2 * m > max_m:
                break
    return TriangleSublevel(r, m, nodes, ind, w, mes, change)


def xn_measure(u: Callable, lam: float, t0: float, r: float, m: int = 2000) -> float:
    """mes_1{t in [t0, r]: u(t) >= int_t0^t u^2 + lam (t - t0)} on a midpoint grid of m cells."""
    if not r > t0:
        raise ValueError("need r > t0")
    h = (r - t0) / m
    t = t0 + (np.arange(m) + 0.5) * h
    xs, P = _cumulative_square(lambda z: u(z), r, 24 * m) if t0 == 0 else _cumulative_square(
        lambda z: u(t0 + z), r - t0, 24 * m)
    Pt = np.interp(t - t0, xs, P)
    ok = np.asarray(u(t), dtype=float) >= Pt + lam * (t - t0)
    return float(h * np.sum(ok))


def blowup_comparator(lam: float):
    """w(z) = sqrt(lam) tan(sqrt(lam) z), solving w = int_0^z w^2 + lam z, and its blow-up time."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    s = math.sqrt(lam)

    def w(z):
        return s * np.tan(s * np.asarray(z, dtype=float))

    return w, math.pi / (2 * s)


def comparator_residual(lam: float, n: int = 100, frac: float = 0.9) -> float:
    """max |w(z) - int_0^z w^2 - lam z| / max(1, |w(z)|) over n points of [0, frac * blow-up]."""
    w, zb = blowup_comparator(lam)
    zs = np.linspace(0.0, frac * zb, n)
    worst = 0.0
    for z in zs:
        val, _ = integrate.quad(lambda x: float(w(x)) ** 2, 0.0, z, epsabs=1e-13, epsrel=1e-13, limit=400)
        wz = float(w(z))
        worst = max(worst, abs(wz - val - lam * z) / max(1.0, abs(wz)))
    return worst


def satisfies_inequality(u_vals: np.ndarray, z: np.ndarray, lam: float) -> np.ndarray:
    """Pointwise check of u(z) >= int_0^z u^2 + lam z from samples (trapezoid rule)."""
    u_vals = np.asarray(u_vals, dtype=float)
    P = np.concatenate([[0.0], np.cumsum(0.5 * (u_vals[1:] ** 2 + u_vals[:-1] ** 2) * np.diff(z))])
    return u_vals >= P + lam * z


def comparator_dominates(u_vals: np.ndarray, z: np.ndarray, lam: float, slack: float = 1e-9) -> bool:
    """On the initial run of z where the sampled u satisfies the integral inequality, check u >= w.

    Only points before the comparator's blow-up time are compared.
    """
    z = np.asarray(z, dtype=float)
    ok = satisfies_inequality(u_vals, z, lam)
    stop = int(np.argmin(ok)) if not np.all(ok) else ok.size
    w, zb = blowup_comparator(lam)
    sel = slice(0, stop)
    zz, uu = z[sel], np.asarray(u_vals, dtype=float)[sel]
    keep = zz < zb
    return bool(np.all(uu[keep] >= w(zz[keep]) - slack * np.maximum(1.0, np.abs(uu[keep]))))
