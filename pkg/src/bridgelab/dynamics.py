"""Time integration of the modal system

    u'' + A u + damping u' - (p - ||u||_1^2) A^{1/2} u + k^2 u+ = f(t).

Mode n of the linear part, a'' + damping a' + (n pi)^4 a = 0, is propagated
exactly; the axial, cable and forcing terms enter through a two-stage
exponential Runge-Kutta rule (c2 = 1, weights phi1 - phi2 and phi2), which
is second order even for the stiff high modes and adds no spurious growth
when the explicit axial term stiffens the top modes.  The constant load p
is folded into the exact linear part; only ||u||_1^2 A^{1/2} u, the cable
and f are explicit.  Classical RK4 on the
full first-order system is kept as a reference integrator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import _backend
from .diagnostics import DiagnosticRecord, diagnostic_columns
from .modal import ModalField, State, wavenumbers
from .params import BridgeParams

RK4_STABILITY = 2.8


class IntegrationError(RuntimeError):
    """The state left the blow-up guard or became non-finite."""

    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


@lru_cache(maxsize=64)
def exponential_coefficients(h: float, order: int, damping: float, load: float = 0.0) -> np.ndarray:
    """Per-mode coefficient table (order, 14) for one exponential step of size h.

    Columns: e^{hL} (4, row-major) | stage propagator e^{hL} (4) | h phi1(hL) e2 (2)
    | h (phi1 - phi2)(hL) e2 (2) | h phi2(hL) e2 (2), with
    L = [[0, 1], [-(n pi)^4 + load (n pi)^2, -damping]] and e2 the velocity
    unit vector.  The kernels then get p - load as the explicit axial load.
    """
    mu = wavenumbers(order) ** 2
    lam = mu * mu - load * mu
    coef = np.empty((order, 14))
    aug = np.zeros((6, 6))
    aug[0:2, 2:4] = np.eye(2)
    aug[2:4, 4:6] = np.eye(2)
    for i, lam_n in enumerate(lam):
        L = np.array([[0.0, 1.0], [-lam_n, -damping]])
        aug[0:2, 0:2] = h * L
        full = expm(aug)
        phi1, phi2 = full[0:2, 2:4], full[0:2, 4:6]
        coef[i, 0:4] = full[0:2, 0:2].ravel()
        coef[i, 4:8] = full[0:2, 0:2].ravel()
        coef[i, 8:10] = h * phi1[:, 1]
        coef[i, 10:12] = h * (phi1[:, 1] - phi2[:, 1])
        coef[i, 12:14] = h * phi2[:, 1]
    coef.setflags(write=False)
    return coef


def _check_order(state: State, params: BridgeParams):
    if state.order != params.N:
        raise ValueError(f"state order {state.order} does not match params.N = {params.N}")


def rhs(state: State, params: BridgeParams, t: float = 0.0):
    """Time derivative (u', u'') of the modal system as a pair of ModalFields."""
    _check_order(state, params)
    n = params.N
    u, v = state.position.coeffs, state.velocity.coeffs
    mu = wavenumbers(n) ** 2
    grid = params.grid
    up = grid.weighted_basis(n).T @ np.maximum(grid.basis(n) @ u, 0.0)
    s = float(np.dot(mu * u, u))
    acc = (params.forcing.at(t, n) - mu * mu * u - params.damping * v
           + (params.p - s) * mu * u - params.k ** 2 * up)
    return ModalField(v), ModalField(acc)


def _kernel_args(params: BridgeParams):
    n = params.N
    mu = wavenumbers(n) ** 2
    grid = params.grid
    return dict(p=float(params.p), kk=float(params.k) ** 2, mu=mu, lam=mu * mu,
                f0=params.forcing.static_coeffs(n), f1=params.forcing.modulated_coeffs(n),
                basis=np.ascontiguousarray(grid.basis(n)),
                wbasis=np.ascontiguousarray(grid.weighted_basis(n)))


def _modulation_table(params: BridgeParams, t0: float, dt: float, nsteps: int) -> np.ndarray:
    if params.forcing.modulation is None:
        return np.zeros((nsteps, 3))
    tk = t0 + dt * np.arange(nsteps)
    times = tk[:, None] + dt * np.array([0.0, 0.5, 1.0])[None, :]
    return np.ascontiguousarray(params.forcing.g(times), dtype=float)


def rk4_limit(order: int) -> float:
    """Largest dt accepted by the RK4 reference integrator, 2.8 / sqrt(lambda_N)."""
    return RK4_STABILITY / (order * np.pi) ** 2


def _run(params, init, t0, dt, nsteps, stride, scheme, backend):
    kern = _backend.get_kernels(backend)
    _check_order(init, params)
    if dt <= 0:
        raise ValueError("dt must be > 0")
    n = params.N
    nsamples = nsteps // stride + 1
    U = np.empty((nsamples, n))
    V = np.empty((nsamples, n))
    u0 = np.array(init.position.coeffs, dtype=float)
    v0 = np.array(init.velocity.coeffs, dtype=float)
    gv = _modulation_table(params, t0, dt, nsteps)
    kw = _kernel_args(params)
    if scheme == "exponential":
        coef = exponential_coefficients(float(dt), n, float(params.damping), kw["p"])
        status, done = kern.exp_integrate(u0, v0, nsteps, stride, coef, 0.0, kw["kk"], kw["mu"],
                                          kw["lam"], kw["f0"], kw["f1"], gv, kw["basis"],
                                          kw["wbasis"], U, V)
    elif scheme == "rk4":
        if dt > rk4_limit(n):
            raise ValueError(f"dt = {dt} exceeds the RK4 stability limit {rk4_limit(n):.3e} "
                             f"for N = {n}")
        status, done = kern.rk4_integrate(u0, v0, nsteps, stride, float(dt), float(params.damping),
                                          kw["p"], kw["kk"], kw["mu"], kw["lam"], kw["f0"],
                                          kw["f1"], gv, kw["basis"], kw["wbasis"], U, V)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return status, done, U, V


def step_exponential(state: State, params: BridgeParams, t: float, dt: float,
                     backend: Optional[str] = None) -> State:
    """One exponential step of size dt from time t."""
    status, _, U, V = _run(params, state, t, dt, 1, 1, "exponential", backend)
    if status:
        raise IntegrationError("state left the blow-up guard", time=t + dt)
    return State.from_arrays(U[1], V[1])


def step_rk4(state: State, params: BridgeParams, t: float, dt: float,
             backend: Optional[str] = None) -> State:
    """One classical RK4 step; dt must respect :func:`rk4_limit`."""
    status, _, U, V = _run(params, state, t, dt, 1, 1, "rk4", backend)
    if status:
        raise IntegrationError("RK4 step unstable (phase norm above 1e6)", time=t + dt)
    return State.from_arrays(U[1], V[1])


@dataclass(eq=False)
class Trajectory:
    """Samples of S(t)z on a uniform time grid with per-sample diagnostics."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    params: BridgeParams
    dt: float
    stride: int
    scheme: str = "exponential"
    diagnostics: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.diagnostics is None:
            self.diagnostics = diagnostic_columns(self.times, self.positions, self.velocities,
                                                  self.params)

    def __len__(self):
        return self.times.size

    def state(self, i: int) -> State:
        return State.from_arrays(self.positions[i], self.velocities[i])

    @property
    def final(self) -> State:
        return self.state(-1)

    def record(self, i: int) -> DiagnosticRecord:
        return DiagnosticRecord(**{k: float(v[i]) for k, v in self.diagnostics.items()})

    @property
    def records(self):
        return [self.record(i) for i in range(len(self))]

    def column(self, name: str) -> np.ndarray:
        return self.diagnostics[name]


def step_count(T: float, dt: float) -> int:
    nsteps = int(round(T / dt))
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T = {T} is not a whole number of steps dt = {dt}")
    return nsteps


def simulate(params: BridgeParams, init: State, T: float, dt: float = 1e-3, stride: int = 1,
             scheme: str = "exponential", t0: float = 0.0,
             backend: Optional[str] = None) -> Trajectory:
    """Integrate from (t0, init) to t0 + T, keeping every ``stride``-th step.

    Raises IntegrationError (with the blow-up time and the samples so far)
    when the phase norm exceeds 1e6 or turns non-finite.
    """
    if T <= 0:
        raise ValueError("T must be > 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    nsteps = step_count(T, dt)
    if nsteps % stride:
        raise ValueError(f"stride {stride} does not divide the {nsteps} steps")
    status, done, U, V = _run(params, init, t0, dt, nsteps, stride, scheme, backend)
    times = t0 + dt * stride * np.arange(U.shape[0])
    if status:
        kept = (done - 1) // stride + 1
        partial = Trajectory(times[:kept], U[:kept], V[:kept], params, dt, stride, scheme)
        blowup = t0 + done * dt
        raise IntegrationError(f"solution left the blow-up guard at t = {blowup:.6g}",
                               time=blowup, trajectory=partial)
    return Trajectory(times, U, V, params, dt, stride, scheme)
