"""Energy functionals along trajectories and the checks built on them."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .modal import LAMBDA1, SQRT_LAMBDA1, State, coercivity_constant, wavenumbers
from .params import BridgeParams

COLUMNS = ("E", "calE", "L", "Upsilon", "Lambda", "Phi", "axial", "cable")
ENVELOPE_FLOOR = 1e-300


@dataclass(frozen=True)
class DiagnosticRecord:
    """Scalar functionals of one state.

    calE = ||u||_2^2 + ||v||^2;  E = calE + (||u||_1^2 - p)^2 / 2 + k^2 ||u+||^2;
    L = E - 2 <u, f>;  Upsilon = <u, v>;  Lambda = L + Upsilon + C;
    Phi = E + eps Upsilon - p^2 / 2 (NaN when p >= pi^2).
    """

    E: float
    calE: float
    L: float
    Upsilon: float
    Lambda: float
    Phi: float
    axial: float
    cable: float

    def to_dict(self):
        return asdict(self)


def guaranteed_rate(p: float) -> Tuple[float, float, float]:
    """(C(p), eps, c) with eps = min(lambda1 C(p), 1) and c = eps (1 + eps) / 2.

    c is the exponential decay rate of the energy guaranteed for f = 0 below
    the critical load; raises ValueError for p >= pi^2.
    """
    if p >= SQRT_LAMBDA1:
        raise ValueError(f"no guaranteed decay above the critical load: p = {p} >= pi^2")
    cp = coercivity_constant(p)
    eps = min(LAMBDA1 * cp, 1.0)
    return cp, eps, 0.5 * eps * (1.0 + eps)


def lambda_offset(params: BridgeParams) -> float:
    """The additive constant in Lambda: 2||f||^2/lambda1 + 1/(2 lambda1) + |p|/(2 sqrt(lambda1))."""
    fsup = params.forcing.sup_norm(params.N)
    return 2.0 * fsup ** 2 / LAMBDA1 + 0.5 / LAMBDA1 + abs(params.p) / (2.0 * SQRT_LAMBDA1)


def forcing_samples(times, params: BridgeParams) -> np.ndarray:
    """(S, N) modal coefficients of f at each time."""
    n = params.N
    f0 = params.forcing.static_coeffs(n)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if params.forcing.modulation is None:
        return np.broadcast_to(f0, (times.size, n))
    g = params.forcing.g(times)
    return f0[None, :] + g[:, None] * params.forcing.modulated_coeffs(n)[None, :]


def diagnostic_columns(times, U, V, params: BridgeParams) -> dict:
    """Vectorised DiagnosticRecord fields for sample arrays U, V of shape (S, N)."""
    U = np.atleast_2d(U)
    V = np.atleast_2d(V)
    n = params.N
    mu = wavenumbers(n) ** 2
    grid = params.grid
    axial = (U * U) @ mu
    cal_e = (U * U) @ (mu * mu) + np.einsum("ij,ij->i", V, V)
    up = np.maximum(U @ grid.basis(n).T, 0.0)
    cable = params.k ** 2 * ((up * up) @ grid.weights)
    energy = cal_e + 0.5 * (axial - params.p) ** 2 + cable
    f = forcing_samples(times, params)
    lyap = energy - 2.0 * np.einsum("ij,ij->i", U, f)
    ups = np.einsum("ij,ij->i", U, V)
    big_lambda = lyap + ups + lambda_offset(params)
    if params.p < SQRT_LAMBDA1:
        eps = guaranteed_rate(params.p)[1]
        phi = energy + eps * ups - 0.5 * params.p ** 2
    else:
        phi = np.full_like(energy, np.nan)
    return {"E": energy, "calE": cal_e, "L": lyap, "Upsilon": ups, "Lambda": big_lambda,
            "Phi": phi, "axial": axial, "cable": cable}


def energy_components(state: State, params: BridgeParams, t: float = 0.0) -> DiagnosticRecord:
    """All functionals of a single state; f is evaluated at time t."""
    if state.order != params.N:
        raise ValueError(f"state order {state.order} does not match params.N = {params.N}")
    cols = diagnostic_columns([t], state.position.coeffs[None, :], state.velocity.coeffs[None, :],
                              params)
    return DiagnosticRecord(**{k: float(v[0]) for k, v in cols.items()})


def energy_identity_defects(traj) -> np.ndarray:
    """Per-interval defect of dE/dt + 2||u_t||^2 = 2<u_t, f>, relative to 1 + E(t_j).

    Time integrals use the trapezoid rule on the stored samples.
    """
    if len(traj) < 2:
        raise ValueError("energy identity needs at least two samples")
    t = traj.times
    V = traj.velocities
    E = traj.column("E")
    f = forcing_samples(t, traj.params)
    diss = np.einsum("ij,ij->i", V, V)
    work = np.einsum("ij,ij->i", V, f)
    h = np.diff(t)
    trap = lambda y: 0.5 * h * (y[1:] + y[:-1])  # noqa: E731
    defect = np.diff(E) + 2.0 * trap(diss) - 2.0 * trap(work)
    return defect / (1.0 + np.abs(E[:-1]))


def energy_identity_residual(traj) -> float:
    """Largest relative per-interval defect of the energy identity."""
    return float(np.max(np.abs(energy_identity_defects(traj))))


def lyapunov_check(traj, rtol: float = 1e-8) -> Tuple[bool, float]:
    """Check L(t_{j+1}) <= L(t_j) + rtol (1 + |L(0)|) along an autonomous run.

    Returns (monotone, largest increase); the increase is 0 when L never grows.
    """
    if not traj.params.forcing.autonomous:
        raise ValueError("Lyapunov monotonicity is only claimed for time-independent forcing")
    L = traj.column("L")
    if L.size < 2:
        return True, 0.0
    tol = rtol * (1.0 + abs(L[0]))
    worst = max(float(np.max(np.diff(L))), 0.0)
    return worst <= tol, worst


def upper_envelope(times, values) -> np.ndarray:
    """Indices of the peak envelope of a positive series.

    The envelope is the upper concave hull of (t, log y), plus the samples
    lying on it to rounding.  For y = exp(-c t) P(t) with periodic P it picks
    one sample per period at the same phase.
    """
    t = np.asarray(times, dtype=float)
    y = np.log(np.maximum(np.abs(np.asarray(values, dtype=float)), ENVELOPE_FLOOR))
    hull = []
    for i in range(t.size):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            cross = (t[i1] - t[i0]) * (y[i] - y[i0]) - (y[i1] - y[i0]) * (t[i] - t[i0])
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    hull = np.asarray(hull, dtype=int)
    line = np.interp(t, t[hull], y[hull])
    tol = 1e-9 * np.maximum(1.0, np.abs(y))
    on_hull = np.flatnonzero(y >= line - tol)
    return np.union1d(on_hull, hull)


def fit_envelope_rate(times, values, window: Optional[Sequence[float]] = None):
    """Least-squares fit of log(envelope) = log(prefactor) - rate * t."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, y = t[mask], y[mask]
    if t.size < 4:
        raise ValueError(f"only {t.size} samples in the fit window; need at least 4")
    idx = upper_envelope(t, y)
    if idx.size < 4:
        raise ValueError(f"only {idx.size} envelope points in the window; need at least 4")
    ly = np.log(np.maximum(np.abs(y[idx]), ENVELOPE_FLOOR))
    slope, intercept = np.polyfit(t[idx], ly, 1)
    return float(-slope), float(np.exp(intercept))


def fit_decay_rate(traj, field: Union[str, np.ndarray] = "calE",
                   window: Optional[Sequence[float]] = None):
    """(rate, prefactor) of the peak envelope of a diagnostic column (or array) over window."""
    values = traj.column(field) if isinstance(field, str) else np.asarray(field)
    return fit_envelope_rate(traj.times, values, window)


def entry_time(traj, threshold: float, column: str = "E") -> Optional[float]:
    """First stored time after which the column stays <= threshold; None if never."""
    vals = traj.column(column)
    above = np.flatnonzero(vals > threshold)
    if above.size == 0:
        return float(traj.times[0])
    last = above[-1]
    if last == vals.size - 1:
        return None
    return float(traj.times[last + 1])
