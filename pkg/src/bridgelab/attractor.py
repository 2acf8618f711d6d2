"""Long-time behaviour: omega-limits, basin sweeps, absorbing radii and the
decaying/compact splitting of trajectories."""
from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import _backend
from .diagnostics import fit_envelope_rate
from .dynamics import (IntegrationError, _kernel_args, _modulation_table, exponential_coefficients,
                       simulate, step_count)
from .equilibria import Equilibrium, steady_residual
from .modal import SQRT_LAMBDA1, ModalField, State, wavenumbers
from .params import BridgeParams

OMEGA_TOL = 1e-4
SETTLED_VELOCITY = 1e-5
SETTLED_RESIDUAL = 1e-4


def phase_distance(state: State, target: ModalField) -> float:
    """H-norm distance between (u, v) and the rest state (target, 0)."""
    lam = wavenumbers(state.order) ** 4
    du = state.position.coeffs - target.resized(state.order).coeffs
    v = state.velocity.coeffs
    return float(np.sqrt(np.dot(lam * du, du) + np.dot(v, v)))


@dataclass
class OmegaReport:
    initial: State
    final_time: float
    nearest_label: Optional[str]
    nearest_b: Optional[float]
    nearest_kappa: Optional[float]
    distance: float
    converged: bool
    velocity_norm: float = float("nan")
    residual: float = float("nan")
    settled: bool = False
    L_initial: float = float("nan")
    L_final: float = float("nan")
    reason: str = ""
    final: Optional[State] = field(default=None, repr=False)

    def to_dict(self):
        return {"initial": self.initial.to_dict(), "final_time": self.final_time,
                "nearest_label": self.nearest_label, "nearest_b": self.nearest_b,
                "nearest_kappa": self.nearest_kappa, "distance": self.distance,
                "converged": self.converged, "velocity_norm": self.velocity_norm,
                "residual": self.residual, "settled": self.settled,
                "L_initial": self.L_initial, "L_final": self.L_final, "reason": self.reason}


def omega_limit(params: BridgeParams, init: State, T: float, catalog: Sequence[Equilibrium],
                dt: float = 1e-3, tol: float = OMEGA_TOL, backend: Optional[str] = None
                ) -> OmegaReport:
    """Run to T and match the final state against the catalog in the H-norm.

    ``converged`` means distance and velocity norm are both <= tol.  ``settled``
    is the catalog-free test: velocity <= 1e-5 and steady residual <= 1e-4.
    """
    if not catalog:
        raise ValueError("equilibrium catalog is empty")
    if not params.forcing.autonomous:
        raise ValueError("omega-limit classification needs autonomous forcing")
    nsteps = step_count(T, dt)
    try:
        traj = simulate(params, init, T, dt=dt, stride=nsteps, backend=backend)
    except IntegrationError as exc:
        return OmegaReport(init, float(exc.time), None, None, None, float("inf"), False,
                           reason=str(exc))
    final = traj.final
    dists = [phase_distance(final, e.field) for e in catalog]
    j = int(np.argmin(dists))
    vnorm = float(np.linalg.norm(final.velocity.coeffs))
    res = float(np.linalg.norm(steady_residual(final.position, params).coeffs))
    L = traj.column("L")
    rep = OmegaReport(init, float(traj.times[-1]), catalog[j].branch_label, catalog[j].b,
                      catalog[j].kappa, dists[j], bool(dists[j] <= tol and vnorm <= tol),
                      velocity_norm=vnorm, residual=res,
                      settled=bool(vnorm <= SETTLED_VELOCITY and res <= SETTLED_RESIDUAL),
                      L_initial=float(L[0]), L_final=float(L[-1]), final=final)
    if not rep.converged:
        rep.reason = "not settled by final time" if not rep.settled else "settled off catalog"
    return rep


def sample_ball(order: int, radius: float, seed: int, index: int) -> State:
    """Seeded random state with ||z||_H <= radius.

    Direction: Gaussian H-coordinates ((n pi)^2 u_n, v_n) damped by 1/n^2;
    the radius is uniform on [0, radius].  Each index has its own stream, so
    sample i does not depend on how many others are drawn.
    """
    rng = np.random.default_rng([int(seed), int(index)])
    n = np.arange(1, order + 1)
    xi = rng.standard_normal((2, order)) / n ** 2
    xi *= radius * rng.uniform() / np.linalg.norm(xi)
    return State.from_arrays(xi[0] / (n * np.pi) ** 2, xi[1])


def _workers(threads):
    return max(1, int(threads or 1))


def basin_sweep(params: BridgeParams, catalog: Sequence[Equilibrium], count: int, T: float,
                radius: float = 10.0, seed: int = 0, dt: float = 1e-3, tol: float = OMEGA_TOL,
                threads: Optional[int] = None, backend: Optional[str] = None):
    """omega_limit over ``count`` seeded samples of the ball ||z||_H <= radius.

    Returns (reports in sampler order, summary dict).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    inits = [sample_ball(params.N, radius, seed, i) for i in range(count)]
    # warm the coefficient cache and the JIT once before fanning out
    omega_limit(params, State.zeros(params.N), dt, catalog, dt=dt, tol=tol, backend=backend)

    def job(z):
        return omega_limit(params, z, T, catalog, dt=dt, tol=tol, backend=backend)

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        reports = list(pool.map(job, inits))
    return reports, sweep_summary(reports, params, T, radius, seed)


def sweep_summary(reports: Sequence[OmegaReport], params=None, T=None, radius=None, seed=None):
    basins = Counter(r.nearest_label for r in reports if r.converged)
    unresolved = [i for i, r in enumerate(reports) if not r.converged]
    out = {"count": len(reports), "basins": dict(sorted(basins.items())),
           "unresolved": unresolved, "unresolved_fraction": len(unresolved) / len(reports)}
    if params is not None:
        out.update(b=params.b, kappa=params.kappa, T=T, radius=radius, seed=seed)
    return out


def reports_jsonl(reports: Sequence[OmegaReport]) -> str:
    return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in reports)


def default_alpha(p: float) -> float:
    """max(1, 2 |p| sqrt(lambda1)).

    Covers the modewise condition mu^2 / 2 - p mu + alpha >= 0 for p <= 4 pi^2;
    above that pass alpha >= p^2 / 2 explicitly.
    """
    return max(1.0, 2.0 * abs(p) * SQRT_LAMBDA1)


def gamma_margin(U, p: float, alpha: float) -> np.ndarray:
    """Per-sample ||u||_2^2 / 2 - p ||u||_1^2 + alpha ||u||^2; must be >= 0."""
    U = np.atleast_2d(U)
    mu = wavenumbers(U.shape[1]) ** 2
    return (U * U) @ (0.5 * mu * mu - p * mu + alpha)


@dataclass
class DecompositionReport:
    v_decay_rate: float
    v_sup_norm_tail: float
    w_H2_sup: float
    alpha: float
    sum_defect: float = 0.0
    times: Optional[np.ndarray] = field(default=None, repr=False)
    v_norm: Optional[np.ndarray] = field(default=None, repr=False)
    w_H2: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {"v_decay_rate": self.v_decay_rate, "v_sup_norm_tail": self.v_sup_norm_tail,
                "w_H2_sup": self.w_H2_sup, "alpha": self.alpha, "sum_defect": self.sum_defect}


def decompose_simulate(params: BridgeParams, init: State, T: float, alpha: Optional[float] = None,
                       dt: float = 1e-3, stride: int = 10, backend: Optional[str] = None,
                       literal: bool = False) -> DecompositionReport:
    """Integrate u together with its splitting u = v + w.

    v (decaying part) solves the linear problem with the extra restoring term
    alpha v and the same axial coefficient p - ||u||_1^2, from the initial data;
    w collects alpha v, the cable force and f from zero data.  Both share the
    stages of u, so u = v + w holds to rounding at every sample.

    By default the axial term of the w row is evaluated on u - v, which is the
    same solution but keeps the defect u - v - w on damped linear dynamics.
    literal=True uses the axial term on w itself; near the cable-engaged
    equilibrium that row has negative stiffness in mode 1 and rounding in the
    defect grows like exp(9.4 t).
    """
    if not params.forcing.autonomous:
        raise ValueError("the splitting is set up for autonomous forcing")
    alpha = default_alpha(params.p) if alpha is None else float(alpha)
    nsteps = step_count(T, dt)
    if nsteps % stride:
        raise ValueError(f"stride {stride} does not divide the {nsteps} steps")
    n = params.N
    z0 = np.zeros((6, n))
    z0[0] = z0[2] = init.position.coeffs
    z0[1] = z0[3] = init.velocity.coeffs
    Z = np.empty((nsteps // stride + 1, 6, n))
    kw = _kernel_args(params)
    # p stays explicit: the defect u - v - w then follows d'' + A d + d' = 0
    coef = exponential_coefficients(float(dt), n, float(params.damping))
    kern = _backend.get_kernels(backend)
    status, done = kern.exp_integrate_split(z0, nsteps, stride, coef, alpha, bool(literal), kw["p"], kw["kk"],
                                            kw["mu"], kw["lam"], kw["f0"], kw["f1"],
                                            _modulation_table(params, 0.0, dt, nsteps),
                                            kw["basis"], kw["wbasis"], Z)
    times = dt * stride * np.arange(Z.shape[0])
    if status:
        raise IntegrationError(f"split run left the blow-up guard at t = {done * dt:.6g}",
                               time=done * dt)
    for rows, name in ((Z[:, 0], "u"), (Z[:, 2], "v")):
        margin = gamma_margin(rows, params.p, alpha)
        bad = np.flatnonzero(margin < -1e-12 * (1.0 + np.abs(margin)))
        if bad.size:
            raise ValueError(f"alpha = {alpha} too small: coercivity fails on {name} at "
                             f"t = {times[bad[0]]:.6g}")
    lam = kw["lam"]
    mu = kw["mu"]
    diff = Z[:, 0] - Z[:, 2] - Z[:, 4]
    sum_defect = float(np.sqrt(np.max((diff * diff) @ lam)))
    v_norm = np.sqrt((Z[:, 2] ** 2) @ lam + np.einsum("ij,ij->i", Z[:, 3], Z[:, 3]))
    w_h2 = (Z[:, 4] ** 2) @ (lam * lam) + (Z[:, 5] ** 2) @ lam
    rate, _ = fit_envelope_rate(times, v_norm)
    tail = float(np.max(v_norm[times >= 0.5 * T]))
    return DecompositionReport(rate, tail, float(np.max(w_h2)), alpha, sum_defect, times, v_norm,
                               w_h2)


def dissipation_integral(traj) -> float:
    """Trapezoid value of int_0^T ||u_t||^2 ds over the stored samples."""
    if not traj.params.forcing.autonomous:
        raise ValueError("dissipation integral bound is for autonomous forcing")
    d = np.einsum("ij,ij->i", traj.velocities, traj.velocities)
    if d.size < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(traj.times) * (d[1:] + d[:-1])))


def scale_to_energy(state: State, params: BridgeParams, target: float, t: float = 0.0) -> State:
    """Rescale ``state`` so that E(0) equals target (bisection on the scale factor)."""
    from .diagnostics import energy_components

    def energy(s):
        z = State.from_arrays(s * state.position.coeffs, s * state.velocity.coeffs)
        return energy_components(z, params, t).E

    lo, hi = 0.0, 1.0
    while energy(hi) < target:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError("cannot reach the requested energy")
    if energy(lo) > target:
        raise ValueError(f"E(0) = {energy(lo)} already exceeds the target at zero amplitude")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if energy(mid) < target:
            lo = mid
        else:
            hi = mid
    return State.from_arrays(lo * state.position.coeffs, lo * state.velocity.coeffs)


def absorbing_radii(params: BridgeParams, inits: Sequence[State], T: float, t0: float,
                    dt: float = 1e-3, stride: int = 10, threads: Optional[int] = None,
                    backend: Optional[str] = None):
    """Per-init sup of E over [t0, T] and the resulting radius estimate.

    Returns dict(radii, R0 = max radius, spread = (max - min) / max).
    """
    def job(z):
        traj = simulate(params, z, T, dt=dt, stride=stride, backend=backend)
        E = traj.column("E")
        return float(np.max(E[traj.times >= t0]))

    with ThreadPoolExecutor(max_workers=_workers(threads)) as pool:
        radii = list(pool.map(job, inits))
    r = np.asarray(radii)
    return {"radii": radii, "R0": float(r.max()), "spread": float((r.max() - r.min()) / r.max())}


def decay_rates(params: BridgeParams, inits: Sequence[State], T: float, window: Sequence[float],
                dt: float = 1e-3, stride: int = 10, field: str = "calE",
                backend: Optional[str] = None) -> List[float]:
    """Fitted envelope decay rate of a diagnostic column for each initial state."""
    out = []
    for z in inits:
        traj = simulate(params, z, T, dt=dt, stride=stride, backend=backend)
        out.append(fit_envelope_rate(traj.times, traj.column(field), window)[0])
    return out
