"""Pure-Python fallback for the compiled kernels (same signatures)."""
import math

import numpy as np

BIG = 1e12
SMALL = 1e-12


def _acc(rho, u, up, v, lam, dm1, dim):
    if rho == 0.0:
        return (v - lam) * u / dim
    return (v - lam) * u - dm1 / rho * up


def shoot_radial(vs, lam, dim, h, record=False):
    vs = [float(x) for x in vs]
    n = (len(vs) - 1) // 2
    u, up, scale_log = 1.0, 0.0, 0.0
    dm1 = dim - 1.0
    logu = np.zeros(n + 1) if record else None
    w = np.zeros(n + 1) if record else None
    for i in range(n):
        rho = i * h
        k1u = up
        k1p = _acc(rho, u, up, vs[2 * i], lam, dm1, dim)
        k2u = up + 0.5 * h * k1p
        k2p = _acc(rho + 0.5 * h, u + 0.5 * h * k1u, k2u, vs[2 * i + 1], lam, dm1, dim)
        k3u = up + 0.5 * h * k2p
        k3p = _acc(rho + 0.5 * h, u + 0.5 * h * k2u, k3u, vs[2 * i + 1], lam, dm1, dim)
        k4u = up + h * k3p
        k4p = _acc(rho + h, u + h * k3u, k4u, vs[2 * i + 2], lam, dm1, dim)
        un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        upn = up + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if un <= 0.0:
            return rho + h * u / (u - un), None, None
        u, up = un, upn
        if u > BIG or u < SMALL:
            up /= u
            scale_log += math.log(u)
            u = 1.0
        if record:
            logu[i + 1] = scale_log + math.log(u)
            w[i + 1] = up / u
    return -1.0, logu, w


def simplex_energy_grad(u, simp, stype, G, vol, q, eps2):
    Gs = G[stype]
    g = np.einsum("sak,sk->sa", Gs, u[simp])
    n2 = np.einsum("sa,sa->s", g, g) + eps2
    f = n2 ** (0.5 * q - 1.0)
    energy = vol * float(np.sum(f * n2)) / q
    contrib = vol * f[:, None] * np.einsum("sak,sa->sk", Gs, g)
    grad = np.bincount(simp.ravel(), weights=contrib.ravel(), minlength=u.shape[0])
    return energy, grad
