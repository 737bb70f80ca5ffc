"""Potential fields and the constructed example potentials."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .geometry import unit_sphere_area

RadialSplit = tuple[Callable[[np.ndarray], np.ndarray], list, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PotentialField:
    """V: R^d -> R, vectorized over the last axis of its argument.

    ``profile`` is set for fields radial about the origin (V(x) = profile(|x|)).
    ``breaks(center)`` lists radii about ``center`` where V jumps, used by radial quadrature.
    ``radial_part(center)`` optionally returns (W, jump radii, R): a mean-zero radial profile
    W about ``center`` and a smooth field R with V = W(|x - center|) + R on the ball;
    transport estimates split on it.
    ``separable`` optionally lists per-axis functions f_j with V(x) = sum_j f_j(x_j).
    """

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    radial: bool = False
    description: str = ""
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    breaks: Optional[Callable[[np.ndarray], Sequence[float]]] = field(default=None, repr=False)
    radial_part: Optional[Callable[[np.ndarray], Optional[RadialSplit]]] = field(default=None, repr=False)
    separable: Optional[tuple] = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        lead = x.shape[:-1]
        out = np.asarray(self.func(x.reshape(-1, self.dim)), dtype=float)
        return out.reshape(lead)

    def radial_breaks(self, center) -> list:
        if self.breaks is None:
            return []
        return [float(b) for b in self.breaks(np.asarray(center, dtype=float))]

    def scaled(self, alpha: float) -> "PotentialField":
        return PotentialField(self.dim, lambda x: alpha * self.func(x), self.radial,
                              f"{alpha}*({self.description})",
                              None if self.profile is None else (lambda r: alpha * self.profile(r)),
                              self.breaks,
                              separable=None if self.separable is None else tuple(
                                  (lambda t, f=f: alpha * np.asarray(f(t), dtype=float)) for f in self.separable))


def radial_potential(profile: Callable[[np.ndarray], np.ndarray], d: int, description: str = "radial",
                     breaks: Sequence[float] = ()) -> PotentialField:
    brk = tuple(breaks)

    def func(x):
        return profile(np.linalg.norm(x, axis=-1))

    def center_breaks(c):
        return brk if not np.any(c) else ()

    return PotentialField(d, func, True, description, profile, center_breaks)


def constant_potential(c: float, d: int) -> PotentialField:
    return radial_potential(lambda r: np.full(np.shape(r), float(c)), d, f"constant {c}")


def quadratic_potential(d: int) -> PotentialField:
    return radial_potential(lambda r: np.asarray(r) ** 2, d, "|x|^2")


def sqrt_norm_potential(d: int) -> PotentialField:
    return radial_potential(lambda r: np.sqrt(r), d, "sqrt|x|")


def positive_negative_parts(V: PotentialField) -> tuple[PotentialField, PotentialField]:
    def plus(x):
        return np.maximum(V.func(x), 0.0)

    def minus(x):
        return np.maximum(-V.func(x), 0.0)

    prof_p = prof_m = None
    if V.profile is not None:
        prof_p = lambda r: np.maximum(V.profile(r), 0.0)  # noqa: E731
        prof_m = lambda r: np.maximum(-V.profile(r), 0.0)  # noqa: E731
    return (PotentialField(V.dim, plus, V.radial, f"({V.description})_+", prof_p, V.breaks),
            PotentialField(V.dim, minus, V.radial, f"({V.description})_-", prof_m, V.breaks))


def _lattice_split(x: np.ndarray):
    ell = np.rint(x)
    rho = np.linalg.norm(x - ell, axis=-1)
    return ell, rho


def _lattice_center(c: np.ndarray) -> Optional[np.ndarray]:
    ell = np.rint(c)
    if np.allclose(c, ell, atol=1e-12):
        return ell
    return None


# ---------------------------------------------------------------- example 1


def example1_profile(n: int, r0: float, d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Radial density V_n(rho) = S_n'(rho) / (omega_d rho^(d-1)) of the piecewise linear S_n."""
    om = unit_sphere_area(d)
    s1 = -(n * n) / r0
    s2 = n / (r0 * (1.0 - 1.0 / n))
    cut = r0 / n

    def prof(rho):
        rho = np.maximum(np.asarray(rho, dtype=float), 1e-12)
        slope = np.where(rho < cut, s1, s2)
        return slope / (om * np.minimum(rho, r0) ** (d - 1))

    return prof


def example1_cumulative(n: int, r0: float) -> Callable[[np.ndarray], np.ndarray]:
    """S_n(x): zero at 0 and at r0, minimum -n at r0/n."""
    cut = r0 / n

    def S(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < cut, -(n * n) / r0 * x, -n * (r0 - x) / (r0 * (1.0 - 1.0 / n)))

    return S


def example1_index(ell: np.ndarray) -> np.ndarray:
    return np.maximum(np.max(np.abs(ell), axis=-1), 2).astype(int)


def example1_potential(r0: float, d: int = 3) -> PotentialField:
    if not 0 < r0 < 0.5:
        raise ValueError(f"r0 must lie in (0, 1/2), got {r0}")
    if d < 3:
        raise ValueError("example 1 needs d >= 3")
    om = unit_sphere_area(d)

    def func(x):
        ell, rho = _lattice_split(x)
        n = example1_index(ell).astype(float)
        rho = np.minimum(np.maximum(rho, 1e-12), r0)
        slope = np.where(rho < r0 / n, -(n * n) / r0, n / (r0 * (1.0 - 1.0 / n)))
        return slope / (om * rho ** (d - 1))

    def breaks(c):
        ell = _lattice_center(c)
        if ell is None:
            return ()
        n = int(example1_index(ell))
        return (r0 / n, r0)

    return PotentialField(d, func, False, f"example1 r0={r0}", None, breaks)


def tent(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out = np.where((x >= 0) & (x < 1 / 3), 3 * x, out)
    out = np.where((x >= 1 / 3) & (x < 2 / 3), 1.0, out)
    out = np.where((x >= 2 / 3) & (x <= 1), 3 * (1 - x), out)
    return out


def tent_train(x) -> np.ndarray:
    """U(x) = sum_{k>=1} T(x - k + 1/3): zero below 2/3, 1-periodic tents above."""
    x = np.asarray(x, dtype=float)
    y = x - 2 / 3
    return np.where(y >= 0, tent(y - np.floor(y)), 0.0)


def tent_train_slope(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = x - 2 / 3
    f = y - np.floor(y)
    s = np.where(f < 1 / 3, 3.0, np.where(f < 2 / 3, 0.0, -3.0))
    return np.where(y >= 0, s, 0.0)


def remark_candidate_potential(r0: float, A: Sequence[float], d: int = 3) -> PotentialField:
    """S_n = A_n U(n x / r0), radialized and tiled over unit cells like example 1 (n = max(|l|_inf, 1))."""
    if not 0 < r0 < 0.5:
        raise ValueError(f"r0 must lie in (0, 1/2), got {r0}")
    A = np.asarray(A, dtype=float)
    om = unit_sphere_area(d)

    def func(x):
        ell, rho = _lattice_split(x)
        n = np.maximum(np.max(np.abs(ell), axis=-1), 1).astype(int)
        An = A[np.minimum(n, A.size) - 1]
        rho = np.minimum(np.maximum(rho, 1e-12), r0)
        return An * (n / r0) * tent_train_slope(n * rho / r0) / (om * rho ** (d - 1))

    def breaks(c):
        ell = _lattice_center(c)
        if ell is None:
            return ()
        n = max(int(np.max(np.abs(ell))), 1)
        ks = np.arange(0, n + 1)
        pts = np.concatenate([(ks + 2 / 3), (ks + 1), (ks + 4 / 3)]) * r0 / n
        return tuple(sorted(p for p in pts if 0 < p <= r0))

    return PotentialField(d, func, False, f"tent-train candidate r0={r0}", None, breaks)


# ---------------------------------------------------------------- example 2


def _well_length(alpha: float, a: float) -> float:
    s = math.sqrt(alpha)
    return (math.pi / 2 - math.atan(math.tanh(s * a))) / s


@dataclass(frozen=True)
class Example2Layout:
    """Endpoints m_k, l_{2k-1}, l_{2k} (k = 1..K, stored 0-based)."""

    a: float
    alpha: np.ndarray
    m: np.ndarray
    l_odd: np.ndarray
    l_even: np.ndarray

    @property
    def windows(self) -> int:
        return self.alpha.size - 1

    def window(self, k: int) -> tuple[float, float]:
        """(c_k, c_{k+1}) = (m_k, l_{2k+1}) for 1-based k."""
        self._check(k)
        return float(self.m[k - 1]), float(self.l_odd[k])

    def _check(self, k: int):
        if not 1 <= k <= self.windows:
            raise IndexError(f"window index {k} outside 1..{self.windows}")


def example2_layout(a: float, alpha: Sequence[float], origin: float = 0.0) -> Example2Layout:
    alpha = np.asarray(alpha, dtype=float)
    if not a > 0:
        raise ValueError("a must be positive")
    if alpha.size < 2 or np.any(alpha <= 0) or np.any(np.diff(alpha) <= 0):
        raise ValueError("alpha must be positive and strictly increasing (at least two entries)")
    K = alpha.size
    m = np.zeros(K)
    lo = np.zeros(K)
    le = np.zeros(K - 1)
    m[0] = origin
    for k in range(K):
        lo[k] = m[k] + a
        if k < K - 1:
            le[k] = lo[k] + _well_length(alpha[k], a)
            m[k + 1] = le[k] + _well_length(alpha[k + 1], a)
    return Example2Layout(a, alpha, m, lo, le)


def example2_potential(a: float, alpha: Sequence[float], U: Optional[Callable] = None, d: int = 3,
                       origin: float = 0.0):
    """Returns (V1d, Vdd, layout): the one-dimensional barrier/well potential and the
    separated field V1d(x1) + sum_j U(x_j)."""
    lay = example2_layout(a, alpha, origin)
    if U is None:
        U = lambda x: np.asarray(x, dtype=float) ** 2 + 1.0  # noqa: E731
    # breakpoints and values on (edge_i, edge_{i+1}]
    edges, vals = [], []
    K = lay.alpha.size
    for k in range(K):
        edges.append(lay.m[k])
        vals.append(lay.alpha[k])
        if k < K - 1:
            edges += [lay.l_odd[k], lay.l_even[k]]
            vals += [-lay.alpha[k], -lay.alpha[k + 1]]
    edges.append(lay.l_odd[K - 1])
    edges = np.asarray(edges)
    vals = np.asarray(vals)
    first, last = float(lay.alpha[0]), float(lay.alpha[-1])

    def V1d(x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(edges, x, side="left") - 1
        out = vals[np.clip(i, 0, vals.size - 1)]
        out = np.where(x <= edges[0], first, out)
        return np.where(x > edges[-1], last, out)

    def func(x):
        out = V1d(x[:, 0])
        for j in range(1, x.shape[1]):
            out = out + U(x[:, j])
        return out

    Vdd = PotentialField(d, func, False, f"example2 a={a} K={K}", separable=(V1d,) + (U,) * (d - 1))
    return V1d, Vdd, lay


def example2_eigenfunction(layout: Example2Layout, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Zero-energy solution on (c_k, c_{k+1}] vanishing at both ends (1-based k)."""
    layout._check(k)
    a = layout.a
    sa, sb = math.sqrt(layout.alpha[k - 1]), math.sqrt(layout.alpha[k])
    c0, c1 = layout.window(k)
    p1, p2, p3 = layout.l_odd[k - 1], layout.l_even[k - 1], layout.m[k]
    na = math.sqrt(math.sinh(sa * a) ** 2 + math.cosh(sa * a) ** 2)
    nb = math.sqrt(math.sinh(sb * a) ** 2 + math.cosh(sb * a) ** 2)
    ta, tb = math.atan(math.tanh(sa * a)), math.atan(math.tanh(sb * a))

    def phi(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= p1, np.sinh(sa * (x - c0)) / na, 0.0)
        out = np.where((x > p1) & (x <= p2), np.sin(sa * (x - c0 - a) + ta), out)
        out = np.where((x > p2) & (x <= p3), np.sin(sb * (c1 - a - x) + tb), out)
        out = np.where(x > p3, np.sinh(sb * (c1 - x)) / nb, out)
        return np.where((x < c0) | (x > c1), 0.0, out)

    return phi


# ---------------------------------------------------------------- example 3


def ball_mean_of_radial(f: Callable[[float], float], L: float, R: float) -> float:
    """Mean over B_R(c), |c| = L, of x -> f(|x|) in R^3 (spherical-cap areas)."""

    def area(rho):
        if rho <= R - L:
            return 4 * math.pi * rho * rho
        return math.pi * rho * (R * R - (rho - L) ** 2) / L

    lo, hi = max(0.0, L - R), L + R
    pts = [p for p in (R - L,) if lo < p < hi]
    val, _ = integrate.quad(lambda r: f(r) * area(r), lo, hi, points=pts or None, epsabs=1e-13,
                            epsrel=1e-12, limit=200)
    return val / (4 / 3 * math.pi * R ** 3)


@lru_cache(maxsize=4096)
def _sqrt_ball_mean(norm2: int, r0: float) -> float:
    return ball_mean_of_radial(math.sqrt, math.sqrt(norm2), r0)


@dataclass(frozen=True)
class Example3Params:
    r0: float = 0.9
    rho0: float = 0.1
    amplitude: Optional[Callable[[np.ndarray], float]] = field(default=None, repr=False)

    def violations(self) -> list[str]:
        out = []
        if not self.r0 > math.sqrt(3) / 2:
            out.append(f"r0={self.r0} must exceed sqrt(3)/2 for the balls B_r0(l) to cover R^3")
        if not 0 < self.rho0 < 1 - math.sqrt(3) / 2:
            out.append(f"rho0={self.rho0} must lie in (0, 1 - sqrt(3)/2)")
        if self.rho0 + self.r0 > 1.0:
            out.append(f"rho0 + r0 = {self.rho0 + self.r0} > 1: W-supports overlap neighbouring balls")
        return out


def example3_frequency_index(ell: np.ndarray) -> np.ndarray:
    return np.floor(np.linalg.norm(ell, axis=-1) + 1e-12).astype(int)


def example3_mean_v0(ell, r0: float) -> float:
    """E_{l,r0}(sqrt|x|)."""
    n2 = int(round(float(np.sum(np.asarray(ell, dtype=float) ** 2))))
    return _sqrt_ball_mean(n2, float(r0))


def example3_amplitude(ell, p: Example3Params) -> float:
    if p.amplitude is not None:
        return float(p.amplitude(np.asarray(ell, dtype=float)))
    return example3_mean_v0(ell, p.r0) * p.rho0 ** 2


def example3_profile(ell, p: Example3Params) -> tuple[Callable[[np.ndarray], np.ndarray], list]:
    """W~ about lattice point l and its jump radii."""
    ell = np.asarray(ell, dtype=float)
    N = int(example3_frequency_index(ell))
    if N == 0:
        return (lambda r: np.zeros(np.shape(r))), []
    A = example3_amplitude(ell, p)
    rho0 = p.rho0

    def prof(rho):
        rho = np.asarray(rho, dtype=float)
        inside = (rho >= rho0 / N) & (rho <= rho0)
        safe = np.where(inside, rho, 1.0)
        return np.where(inside, A * np.sign(np.sin(2 * np.pi * N * safe / rho0)) / safe ** 2, 0.0)

    return prof, [rho0 * k / (2 * N) for k in range(2, 2 * N + 1)]


def example3_potential(p: Example3Params = Example3Params()) -> PotentialField:
    bad = p.violations()
    if bad:
        raise ValueError("; ".join(bad))
    rho0 = p.rho0

    def func(x):
        v0 = np.sqrt(np.linalg.norm(x, axis=-1))
        ell, rho = _lattice_split(x)
        N = example3_frequency_index(ell)
        act = (rho <= rho0) & (N >= 1) & (rho >= rho0 / np.maximum(N, 1))
        W = np.zeros(x.shape[0])
        if np.any(act):
            e_act = ell[act]
            keys, inv = np.unique(e_act, axis=0, return_inverse=True)
            amps = np.array([example3_amplitude(k, p) for k in keys])[inv.ravel()]
            r = rho[act]
            W[act] = amps * np.sign(np.sin(2 * np.pi * N[act] * r / rho0)) / r ** 2
        return v0 + W

    def breaks(c):
        ell = _lattice_center(c)
        if ell is None:
            return ()
        return tuple(example3_profile(ell, p)[1])

    def radial_part(c):
        ell = _lattice_center(np.asarray(c, dtype=float))
        if ell is None:
            return None
        prof, brk = example3_profile(ell, p)
        return prof, brk, lambda x: np.sqrt(np.linalg.norm(x, axis=-1))

    return PotentialField(3, func, False, f"example3 r0={p.r0} rho0={p.rho0}", None, breaks, radial_part)


# ---------------------------------------------------------------- tabulated


def load_grid_potential(path, d: Optional[int] = None) -> PotentialField:
    """Plain-text table, one node per line: d coordinates then the value; nearest-node lookup."""
    data = np.loadtxt(path, dtype=float, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError("grid table needs coordinates and a value column")
    dim = data.shape[1] - 1
    if d is not None and d != dim:
        raise ValueError(f"table has dimension {dim}, expected {d}")
    tree = cKDTree(data[:, :dim])
    vals = data[:, dim].copy()

    def func(x):
        _, i = tree.query(x)
        return vals[i]

    return PotentialField(dim, func, False, f"table {path}")
