"""numba-compiled time-stepping loops.

Array conventions shared with :mod:`kernels_numpy`:

coef   (N, 14)  per-mode step coefficients, see ``dynamics.exponential_coefficients``
gv     (nsteps, 3)  modulation g at t_k, t_k + h/2 (RK4 only), t_k + h
basis  (M+1, N) sqrt(2) sin(n pi x_j);  wbasis = weights[:, None] * basis
Return value is (status, step): status 0 on success, 1 when the phase norm
left the blow-up guard (or became non-finite) after ``step`` steps.
"""
import numpy as np
from numba import njit

BLOWUP_SQ = 1e12


@njit(cache=True, nogil=True)
def positive_part_into(u, basis, wbasis, out):
    m1, n = basis.shape
    for i in range(n):
        out[i] = 0.0
    for j in range(1, m1 - 1):
        s = 0.0
        for i in range(n):
            s += basis[j, i] * u[i]
        if s > 0.0:
            for i in range(n):
                out[i] += wbasis[j, i] * s


@njit(cache=True, nogil=True)
def _axial(u, mu):
    s = 0.0
    for i in range(u.size):
        s += mu[i] * u[i] * u[i]
    return s


@njit(cache=True, nogil=True)
def _forces(u, t_g, p, kk, mu, f0, f1, basis, wbasis, up, out):
    s = _axial(u, mu)
    positive_part_into(u, basis, wbasis, up)
    for i in range(u.size):
        out[i] = f0[i] + t_g * f1[i] + (p - s) * mu[i] * u[i] - kk * up[i]


@njit(cache=True, nogil=True)
def _phase_sq(u, v, lam):
    s = 0.0
    for i in range(u.size):
        s += lam[i] * u[i] * u[i] + v[i] * v[i]
    return s


@njit(cache=True, nogil=True)
def exp_integrate(u0, v0, nsteps, stride, coef, p, kk, mu, lam, f0, f1, gv,
                  basis, wbasis, U, V):
    n = u0.size
    u = u0.copy()
    v = v0.copy()
    uh = np.empty(n)
    vh = np.empty(n)
    g0 = np.empty(n)
    g1 = np.empty(n)
    up = np.empty(n)
    U[0, :] = u
    V[0, :] = v
    for k in range(nsteps):
        _forces(u, gv[k, 0], p, kk, mu, f0, f1, basis, wbasis, up, g0)
        for i in range(n):
            uh[i] = coef[i, 4] * u[i] + coef[i, 5] * v[i] + coef[i, 8] * g0[i]
            vh[i] = coef[i, 6] * u[i] + coef[i, 7] * v[i] + coef[i, 9] * g0[i]
        _forces(uh, gv[k, 2], p, kk, mu, f0, f1, basis, wbasis, up, g1)
        for i in range(n):
            un = coef[i, 0] * u[i] + coef[i, 1] * v[i] + coef[i, 10] * g0[i] + coef[i, 12] * g1[i]
            vn = coef[i, 2] * u[i] + coef[i, 3] * v[i] + coef[i, 11] * g0[i] + coef[i, 13] * g1[i]
            u[i] = un
            v[i] = vn
        ph = _phase_sq(u, v, lam)
        if not ph < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            U[(k + 1) // stride, :] = u
            V[(k + 1) // stride, :] = v
    return 0, nsteps


@njit(cache=True, nogil=True)
def _accel(u, v, t_g, h_damp, p, kk, mu, lam, f0, f1, basis, wbasis, up, out):
    _forces(u, t_g, p, kk, mu, f0, f1, basis, wbasis, up, out)
    for i in range(u.size):
        out[i] += -lam[i] * u[i] - h_damp * v[i]


@njit(cache=True, nogil=True)
def rk4_integrate(u0, v0, nsteps, stride, h, damping, p, kk, mu, lam, f0, f1, gv,
                  basis, wbasis, U, V):
    n = u0.size
    u = u0.copy()
    v = v0.copy()
    ut = np.empty(n)
    vt = np.empty(n)
    a1 = np.empty(n)
    a2 = np.empty(n)
    a3 = np.empty(n)
    a4 = np.empty(n)
    v2 = np.empty(n)
    v3 = np.empty(n)
    v4 = np.empty(n)
    up = np.empty(n)
    U[0, :] = u
    V[0, :] = v
    for k in range(nsteps):
        _accel(u, v, gv[k, 0], damping, p, kk, mu, lam, f0, f1, basis, wbasis, up, a1)
        for i in range(n):
            ut[i] = u[i] + 0.5 * h * v[i]
            vt[i] = v[i] + 0.5 * h * a1[i]
            v2[i] = vt[i]
        _accel(ut, vt, gv[k, 1], damping, p, kk, mu, lam, f0, f1, basis, wbasis, up, a2)
        for i in range(n):
            ut[i] = u[i] + 0.5 * h * v2[i]
            vt[i] = v[i] + 0.5 * h * a2[i]
            v3[i] = vt[i]
        _accel(ut, vt, gv[k, 1], damping, p, kk, mu, lam, f0, f1, basis, wbasis, up, a3)
        for i in range(n):
            ut[i] = u[i] + h * v3[i]
            vt[i] = v[i] + h * a3[i]
            v4[i] = vt[i]
        _accel(ut, vt, gv[k, 2], damping, p, kk, mu, lam, f0, f1, basis, wbasis, up, a4)
        for i in range(n):
            u[i] += h / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])
            v[i] += h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
        ph = _phase_sq(u, v, lam)
        if not ph < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            U[(k + 1) // stride, :] = u
            V[(k + 1) // stride, :] = v
    return 0, nsteps


@njit(cache=True, nogil=True)
def _split_forces(u, y, w, t_g, alpha, literal, p, kk, mu, f0, f1, basis, wbasis, up, gu, gy,
                  gw):
    s = _axial(u, mu)
    positive_part_into(u, basis, wbasis, up)
    for i in range(u.size):
        f = f0[i] + t_g * f1[i]
        gu[i] = f + (p - s) * mu[i] * u[i] - kk * up[i]
        gy[i] = (p - s) * mu[i] * y[i] - alpha * y[i]
        # axial term on w itself (literal) or on u - y (same solution, damped defect)
        ww = w[i] if literal else u[i] - y[i]
        gw[i] = f + (p - s) * mu[i] * ww + alpha * y[i] - kk * up[i]


@njit(cache=True, nogil=True)
def exp_integrate_split(z0, nsteps, stride, coef, alpha, literal, p, kk, mu, lam, f0, f1, gv,
                        basis, wbasis, Z):
    """Full solution plus its decaying/compact splitting.

    z0 and each Z[s] hold rows (u, u_t, y, y_t, w, w_t); y is the decaying part.
    """
    n = z0.shape[1]
    z = z0.copy()
    zh = np.empty_like(z)
    g0 = np.empty((3, n))
    g1 = np.empty((3, n))
    up = np.empty(n)
    Z[0] = z
    for k in range(nsteps):
        _split_forces(z[0], z[2], z[4], gv[k, 0], alpha, literal, p, kk, mu, f0, f1, basis, wbasis,
                      up, g0[0], g0[1], g0[2])
        for c in range(3):
            for i in range(n):
                zh[2 * c, i] = coef[i, 4] * z[2 * c, i] + coef[i, 5] * z[2 * c + 1, i] + coef[i, 8] * g0[c, i]
                zh[2 * c + 1, i] = coef[i, 6] * z[2 * c, i] + coef[i, 7] * z[2 * c + 1, i] + coef[i, 9] * g0[c, i]
        _split_forces(zh[0], zh[2], zh[4], gv[k, 2], alpha, literal, p, kk, mu, f0, f1, basis, wbasis,
                      up, g1[0], g1[1], g1[2])
        for c in range(3):
            for i in range(n):
                a = z[2 * c, i]
                b = z[2 * c + 1, i]
                z[2 * c, i] = coef[i, 0] * a + coef[i, 1] * b + coef[i, 10] * g0[c, i] + coef[i, 12] * g1[c, i]
                z[2 * c + 1, i] = coef[i, 2] * a + coef[i, 3] * b + coef[i, 11] * g0[c, i] + coef[i, 13] * g1[c, i]
        ph = max(_phase_sq(z[0], z[1], lam), _phase_sq(z[4], z[5], lam))
        if not ph < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            Z[(k + 1) // stride] = z
    return 0, nsteps
