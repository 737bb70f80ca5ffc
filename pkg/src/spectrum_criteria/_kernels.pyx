# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: radial RK4 shooting and P1 simplex energy/gradient."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, pow, sqrt

cnp.import_array()

cdef double BIG = 1e12
cdef double SMALL = 1e-12


cdef inline double _acc(double rho, double u, double up, double v, double lam, double dm1, double dim):
    if rho == 0.0:
        return (v - lam) * u / dim
    return (v - lam) * u - dm1 / rho * up


def shoot_radial(double[::1] vs, double lam, int dim, double h, bint record=False):
    """RK4 for u'' + (d-1)/rho u' = (V - lam) u, u(0)=1, u'(0)=0.

    vs holds V at rho = i*h/2 (2n+1 samples). Returns (first zero or -1, log|u|, u'/u);
    the last two are None unless record is set.
    """
    cdef Py_ssize_t n = (vs.shape[0] - 1) // 2
    cdef Py_ssize_t i
    cdef double u = 1.0, up = 0.0, rho, scale_log = 0.0, s
    cdef double k1u, k1p, k2u, k2p, k3u, k3p, k4u, k4p, un, upn
    cdef double dm1 = dim - 1.0, fd = <double>dim
    cdef double[::1] logu
    cdef double[::1] w
    if record:
        logu_arr = np.zeros(n + 1)
        w_arr = np.zeros(n + 1)
        logu = logu_arr
        w = w_arr
    for i in range(n):
        rho = i * h
        k1u = up
        k1p = _acc(rho, u, up, vs[2 * i], lam, dm1, fd)
        k2u = up + 0.5 * h * k1p
        k2p = _acc(rho + 0.5 * h, u + 0.5 * h * k1u, k2u, vs[2 * i + 1], lam, dm1, fd)
        k3u = up + 0.5 * h * k2p
        k3p = _acc(rho + 0.5 * h, u + 0.5 * h * k2u, k3u, vs[2 * i + 1], lam, dm1, fd)
        k4u = up + h * k3p
        k4p = _acc(rho + h, u + h * k3u, k4u, vs[2 * i + 2], lam, dm1, fd)
        un = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        upn = up + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if un <= 0.0:
            return rho + h * u / (u - un), None, None
        u = un
        up = upn
        if u > BIG or u < SMALL:
            s = u
            u = 1.0
            up = up / s
            scale_log += log(s)
        if record:
            logu[i + 1] = scale_log + log(u)
            w[i + 1] = up / u
    if record:
        return -1.0, logu_arr, w_arr
    return -1.0, None, None


def simplex_energy_grad(double[::1] u, int[:, ::1] simp, int[::1] stype,
                        double[:, :, ::1] G, double vol, double q, double eps2):
    """Energy (vol/q) sum (|grad u|^2 + eps2)^(q/2) and its gradient in u."""
    cdef Py_ssize_t ns = simp.shape[0], nl = simp.shape[1], dim = G.shape[1]
    cdef Py_ssize_t s, a, k, t
    cdef double energy = 0.0, n2, f, c
    cdef double g[8]
    cdef int mode = 1 if q == 1.5 else (2 if q == 2.0 else 0)
    grad_arr = np.zeros(u.shape[0])
    cdef double[::1] grad = grad_arr
    for s in range(ns):
        t = stype[s]
        n2 = eps2
        for a in range(dim):
            c = 0.0
            for k in range(nl):
                c += G[t, a, k] * u[simp[s, k]]
            g[a] = c
            n2 += c * c
        if mode == 1:
            f = 1.0 / sqrt(sqrt(n2))
        elif mode == 2:
            f = 1.0
        else:
            f = pow(n2, 0.5 * q - 1.0)
        energy += f * n2
        for k in range(nl):
            c = 0.0
            for a in range(dim):
                c += G[t, a, k] * g[a]
            grad[simp[s, k]] += vol * f * c
    return vol * energy / q, grad_arr
