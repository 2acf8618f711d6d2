"""Vectorised numpy counterparts of :mod:`kernels_numba` (same signatures)."""
import numpy as np

BLOWUP_SQ = 1e12


def positive_part_into(u, basis, wbasis, out):
    vals = basis @ u
    np.maximum(vals, 0.0, out=vals)
    out[:] = wbasis.T @ vals


def _forces(u, t_g, p, kk, mu, f0, f1, basis, wbasis):
    s = np.dot(mu * u, u)
    up = wbasis.T @ np.maximum(basis @ u, 0.0)
    return f0 + t_g * f1 + (p - s) * mu * u - kk * up


def exp_integrate(u0, v0, nsteps, stride, coef, p, kk, mu, lam, f0, f1, gv,
                  basis, wbasis, U, V):
    u = u0.copy()
    v = v0.copy()
    c = [coef[:, j].copy() for j in range(coef.shape[1])]
    U[0] = u
    V[0] = v
    for k in range(nsteps):
        g0 = _forces(u, gv[k, 0], p, kk, mu, f0, f1, basis, wbasis)
        uh = c[4] * u + c[5] * v + c[8] * g0
        vh = c[6] * u + c[7] * v + c[9] * g0
        g1 = _forces(uh, gv[k, 2], p, kk, mu, f0, f1, basis, wbasis)
        u, v = (c[0] * u + c[1] * v + c[10] * g0 + c[12] * g1,
                c[2] * u + c[3] * v + c[11] * g0 + c[13] * g1)
        if not np.dot(lam * u, u) + np.dot(v, v) < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            U[(k + 1) // stride] = u
            V[(k + 1) // stride] = v
    return 0, nsteps


def rk4_integrate(u0, v0, nsteps, stride, h, damping, p, kk, mu, lam, f0, f1, gv,
                  basis, wbasis, U, V):
    def accel(u, v, tg):
        return _forces(u, tg, p, kk, mu, f0, f1, basis, wbasis) - lam * u - damping * v

    u = u0.copy()
    v = v0.copy()
    U[0] = u
    V[0] = v
    for k in range(nsteps):
        a1 = accel(u, v, gv[k, 0])
        v2 = v + 0.5 * h * a1
        a2 = accel(u + 0.5 * h * v, v2, gv[k, 1])
        v3 = v + 0.5 * h * a2
        a3 = accel(u + 0.5 * h * v2, v3, gv[k, 1])
        v4 = v + h * a3
        a4 = accel(u + h * v3, v4, gv[k, 2])
        u = u + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if not np.dot(lam * u, u) + np.dot(v, v) < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            U[(k + 1) // stride] = u
            V[(k + 1) // stride] = v
    return 0, nsteps


def _split_forces(z, t_g, alpha, literal, p, kk, mu, f0, f1, basis, wbasis):
    u, y, w = z[0], z[2], z[4]
    s = np.dot(mu * u, u)
    up = wbasis.T @ np.maximum(basis @ u, 0.0)
    f = f0 + t_g * f1
    return np.stack((f + (p - s) * mu * u - kk * up,
                     (p - s) * mu * y - alpha * y,
                     f + (p - s) * mu * (w if literal else u - y) + alpha * y - kk * up))


def exp_integrate_split(z0, nsteps, stride, coef, alpha, literal, p, kk, mu, lam, f0, f1, gv,
                        basis, wbasis, Z):
    z = z0.copy()
    c = [coef[:, j].copy() for j in range(coef.shape[1])]
    pos, vel = z[0::2], z[1::2]
    Z[0] = z
    for k in range(nsteps):
        pos, vel = z[0::2], z[1::2]
        g0 = _split_forces(z, gv[k, 0], alpha, literal, p, kk, mu, f0, f1, basis, wbasis)
        zh = np.empty_like(z)
        zh[0::2] = c[4] * pos + c[5] * vel + c[8] * g0
        zh[1::2] = c[6] * pos + c[7] * vel + c[9] * g0
        g1 = _split_forces(zh, gv[k, 2], alpha, literal, p, kk, mu, f0, f1, basis, wbasis)
        zn = np.empty_like(z)
        zn[0::2] = c[0] * pos + c[1] * vel + c[10] * g0 + c[12] * g1
        zn[1::2] = c[2] * pos + c[3] * vel + c[11] * g0 + c[13] * g1
        z = zn
        ph = max(np.dot(lam * z[0], z[0]) + np.dot(z[1], z[1]),
                 np.dot(lam * z[4], z[4]) + np.dot(z[5], z[5]))
        if not ph < BLOWUP_SQ:
            return 1, k + 1
        if (k + 1) % stride == 0:
            Z[(k + 1) // stride] = z
    return 0, nsteps
