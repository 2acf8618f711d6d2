"""Steady states of the bridge: Newton solves, branches and their stability.

Equilibria solve  A u - (p - ||u||_1^2) A^{1/2} u + k^2 u+ = f0.  Loads and
stiffnesses are quoted as p = b pi^2, k = kappa pi^2.  On the first mode the
signed states are a_1 e_1 with a_1 = -sqrt(b - 1) (for b >= 1) and
a_1 = +sqrt(b - 1 - kappa^2) (for b >= 1 + kappa^2); in sin-amplitude units
A = sqrt(2) a_1 these are -sqrt(2(b-1)) and sqrt(2(b-1-kappa^2)).
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .modal import ModalField, QuadratureGrid, wavenumbers
from .params import PI2, BridgeParams

ORIGIN_AMPLITUDE = 1e-6
STABILITY_TOL = 1e-8


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual_norm=None, field=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.field = field


@dataclass
class Equilibrium:
    field: ModalField
    residual_norm: float
    b: float
    kappa: float
    stability: str = "unclassified"
    branch_label: str = ""
    iterations: int = 0

    @property
    def amplitude(self) -> float:
        """Signed sin-amplitude of the first mode, sqrt(2) a_1."""
        return float(np.sqrt(2.0) * self.field.coeffs[0])

    @property
    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.field.coeffs))

    def to_dict(self):
        return {"b": self.b, "kappa": self.kappa, "branch_label": self.branch_label,
                "amplitude": self.amplitude, "residual": self.residual_norm,
                "stability": self.stability, "field": self.field.to_dict()}


@dataclass
class Branch:
    points: List[Equilibrium] = field(default_factory=list)
    origin_b: Optional[float] = None
    reason: str = "range end"

    @property
    def label(self) -> str:
        return self.points[0].branch_label if self.points else ""


def _params_at(base: BridgeParams, b: float) -> BridgeParams:
    return base.with_(p=b * PI2)


def steady_residual(field: ModalField, params: BridgeParams, grid: Optional[QuadratureGrid] = None
                    ) -> ModalField:
    """Modal residual r_n = (n pi)^4 u_n - (p - S)(n pi)^2 u_n + k^2 (u+)_n - f0_n, S = ||u||_1^2."""
    n = params.N
    if field.order != n:
        raise ValueError(f"field order {field.order} does not match params.N = {n}")
    grid = params.grid if grid is None else grid
    u = field.coeffs
    mu = wavenumbers(n) ** 2
    s = float(np.dot(mu * u, u))
    up = grid.weighted_basis(n).T @ np.maximum(grid.basis(n) @ u, 0.0)
    r = mu * mu * u - (params.p - s) * mu * u + params.k ** 2 * up - params.forcing.static_coeffs(n)
    return ModalField(r)


def steady_jacobian(field: ModalField, params: BridgeParams, active=None) -> np.ndarray:
    """Generalised Jacobian of :func:`steady_residual`.

    The cable term uses the indicator of {u > 0} on the quadrature nodes;
    ``active`` overrides it (a boolean array over the nodes, or a scalar).
    """
    n = params.N
    grid = params.grid
    u = field.coeffs
    mu = wavenumbers(n) ** 2
    s = float(np.dot(mu * u, u))
    basis = grid.basis(n)
    if active is None:
        active = basis @ u > 0.0
    chi = np.broadcast_to(np.asarray(active, dtype=float), grid.weights.shape)
    J = np.diag(mu * mu - (params.p - s) * mu)
    J += 2.0 * np.outer(mu * u, mu * u)
    J += params.k ** 2 * (basis.T * (grid.weights * chi)) @ basis
    return J


def newton_solve(guess: ModalField, params: BridgeParams, tol: float = 1e-9, max_iter: int = 100,
                 label: str = "", classify: bool = True) -> Equilibrium:
    """Semismooth Newton with backtracking on the residual norm.

    Raises ConvergenceError (carrying the last residual) when max_iter is hit.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    u = np.array(guess.resized(params.N).coeffs)
    r = steady_residual(ModalField(u), params).coeffs
    rn = float(np.linalg.norm(r))
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations "
                                   f"(residual {rn:.3e})", residual_norm=rn, field=ModalField(u))
        J = steady_jacobian(ModalField(u), params)
        try:
            du = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            du = None
        if du is None or not np.all(np.isfinite(du)):
            try:
                du = np.linalg.solve(J + 1e-10 * np.eye(J.shape[0]), -r)
            except np.linalg.LinAlgError:
                raise ConvergenceError("singular generalised Jacobian", residual_norm=rn,
                                       field=ModalField(u)) from None
        step = 1.0
        while True:
            trial = u + step * du
            r_trial = steady_residual(ModalField(trial), params).coeffs
            rn_trial = float(np.linalg.norm(r_trial))
            if rn_trial < rn or step < 1e-4:
                break
            step *= 0.5
        u, r, rn = trial, r_trial, rn_trial
        it += 1
    eq = Equilibrium(ModalField(u), rn, params.b, params.kappa, branch_label=label, iterations=it)
    if not eq.branch_label:
        eq.branch_label = branch_label_of(eq.field)
    if classify:
        eq.stability = classify_stability(eq, params)
    return eq


def branch_label_of(field: ModalField, tol: float = 1e-8) -> str:
    """'trivial', 'mode<n>-negative|positive' for single-mode states, else 'mixed'."""
    a = field.coeffs
    scale = float(np.max(np.abs(a)))
    if scale < tol:
        return "trivial"
    big = np.flatnonzero(np.abs(a) > tol * max(1.0, scale))
    if big.size == 1:
        i = int(big[0])
        return f"mode{i + 1}-{'positive' if a[i] > 0 else 'negative'}"
    return "mixed"


def single_mode_equilibria(b: float, kappa: float, N: int = 16, M: Optional[int] = None,
                           classify: bool = False) -> List[Equilibrium]:
    """Trivial state plus the signed first-mode states existing at (b, kappa)."""
    params = BridgeParams.from_bk(b, kappa, N=N, M=M)
    out = []
    candidates = [("trivial", 0.0)]
    if b >= 1.0:
        candidates.append(("mode1-negative", -np.sqrt(b - 1.0)))
    if b >= 1.0 + kappa ** 2:
        candidates.append(("mode1-positive", np.sqrt(b - 1.0 - kappa ** 2)))
    for label, a1 in candidates:
        f = ModalField.mode(1, N, a1)
        res = float(np.linalg.norm(steady_residual(f, params).coeffs))
        eq = Equilibrium(f, res, b, kappa, branch_label=label)
        if classify:
            eq.stability = classify_stability(eq, params)
        out.append(eq)
    return out


def classify_stability(eq: Equilibrium, params: BridgeParams) -> str:
    """'stable' / 'unstable' / 'marginal' from the eigenvalues of the linearised flow.

    For the trivial state both one-sided linearisations (cable fully engaged
    and fully slack) are examined; it is stable only if both are.
    """
    n = params.N
    grid = params.grid
    u = eq.field.coeffs
    vals = grid.basis(n) @ u
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        tags = {_tag_from(steady_jacobian(eq.field, params, active=a), params.damping)
                for a in (True, False)}
        if "unstable" in tags:
            return "unstable"
        return "stable" if tags == {"stable"} else "marginal"
    interior = np.abs(vals[1:-1]) <= 1e-12 * scale
    if np.count_nonzero(interior) > n:
        warnings.warn("nonsmooth linearization: u vanishes on a set of nodes of positive measure")
        return "marginal"
    return _tag_from(steady_jacobian(eq.field, params), params.damping)


def _tag_from(J: np.ndarray, damping: float) -> str:
    n = J.shape[0]
    lin = np.block([[np.zeros((n, n)), np.eye(n)], [-J, -damping * np.eye(n)]])
    re = np.linalg.eigvals(lin).real
    if np.all(re < -STABILITY_TOL):
        return "stable"
    if np.any(re > STABILITY_TOL):
        return "unstable"
    return "marginal"


def continue_branch(seed: Equilibrium, b_range: Sequence[float], step: float,
                    base: Optional[BridgeParams] = None, tol: float = 1e-9,
                    classify: bool = True) -> Branch:
    """Natural-parameter continuation in b from the seed towards b_range[1].

    Newton is warm-started from the previous point.  A failed solve halves the
    step; two consecutive failures truncate the branch (fold).  When the
    amplitude drops below 1e-6 the onset is bracketed and bisected in b to
    1e-7 and stored as origin_b.
    Points are returned in increasing b whatever the marching direction.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    n = seed.field.order
    if base is None:
        base = BridgeParams.from_bk(seed.b, seed.kappa, N=n)
    label = seed.branch_label or branch_label_of(seed.field)
    try:
        first = newton_solve(seed.field, _params_at(base, seed.b), tol=tol, label=label,
                             classify=classify)
    except ConvergenceError as exc:
        raise ValueError(f"seed does not converge at b = {seed.b}: {exc}") from exc
    branch = Branch([first])
    if first.l2_norm < ORIGIN_AMPLITUDE and label != "trivial":
        branch.origin_b = seed.b
        branch.reason = "seed at onset"
        return branch
    b_end = float(b_range[1])
    direction = 1.0 if b_end >= seed.b else -1.0
    prev = first
    h = step
    failures = 0
    while direction * (b_end - prev.b) > 1e-12:
        b_next = prev.b + direction * min(h, abs(b_end - prev.b))
        try:
            eq = newton_solve(prev.field, _params_at(base, b_next), tol=tol, label=label,
                              classify=classify)
        except ConvergenceError:
            failures += 1
            if failures >= 2:
                branch.reason = f"fold: Newton failed twice near b = {b_next:.6g}"
                break
            h *= 0.5
            continue
        failures = 0
        if label != "trivial" and eq.l2_norm < ORIGIN_AMPLITUDE:
            branch.origin_b = _bisect_origin(prev, eq.b, base, tol)
            branch.reason = "origin"
            break
        branch.points.append(eq)
        prev = eq
    branch.points.sort(key=lambda e: e.b)
    return branch


def _bisect_origin(last: Equilibrium, b_zero: float, base: BridgeParams, tol: float) -> float:
    lo, hi = last.b, b_zero
    warm = last.field
    while abs(hi - lo) > 1e-7:
        mid = 0.5 * (lo + hi)
        try:
            eq = newton_solve(warm, _params_at(base, mid), tol=min(tol, 1e-14), max_iter=200,
                              classify=False)
            alive = eq.l2_norm >= ORIGIN_AMPLITUDE
        except ConvergenceError:
            alive = False
        if alive:
            lo, warm = mid, eq.field
        else:
            hi = mid
    return 0.5 * (lo + hi)


def same_state(a: ModalField, b: ModalField, tol: float = 1e-6) -> bool:
    """Equality in the energy norm ||u||_2 (velocities of equilibria vanish)."""
    lam = wavenumbers(a.order) ** 4
    d = a.coeffs - b.coeffs
    return float(np.sqrt(np.sum(lam * d * d))) <= tol


def multistart(params: BridgeParams, count: int = 32, seed: int = 0, scale: float = 2.0,
               tol: float = 1e-9, include_analytic: bool = True) -> List[Equilibrium]:
    """Distinct equilibria found from random seeds (plus the analytic first-mode states).

    Seeds a_n ~ scale * N(0,1) / n^2 are drawn from a fixed generator; results are
    sorted by label then amplitude.
    """
    rng = np.random.default_rng(seed)
    n = params.N
    guesses = []
    if include_analytic and not np.any(params.forcing.static_coeffs(n)):
        guesses += [e.field for e in single_mode_equilibria(params.b, params.kappa, N=n, M=params.M)]
    weights = 1.0 / np.arange(1, n + 1) ** 2
    guesses += [ModalField(scale * rng.standard_normal(n) * weights) for _ in range(count)]
    found: List[Equilibrium] = []
    for g in guesses:
        try:
            eq = newton_solve(g, params, tol=tol)
        except ConvergenceError:
            continue
        if not any(same_state(eq.field, f.field) for f in found):
            found.append(eq)
    found.sort(key=lambda e: (e.branch_label, e.amplitude))
    return found


def branch_csv(branches: Sequence[Branch]) -> str:
    """Rows (kappa, b, branch_label, amplitude, residual, stability), one per point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kappa", "b", "branch_label", "amplitude", "residual", "stability"])
    for br in branches:
        for e in br.points:
            w.writerow([repr(float(e.kappa)), repr(float(e.b)), e.branch_label,
                        repr(e.amplitude), repr(float(e.residual_norm)), e.stability])
    return buf.getvalue()


def write_branch_csv(path, branches: Sequence[Branch]):
    with open(path, "w", newline="") as fh:
        fh.write(branch_csv(branches))


def catalog_json(equilibria: Sequence[Equilibrium]) -> str:
    """JSON catalog keyed by 'b=<b>,kappa=<kappa>'."""
    out = {}
    for e in equilibria:
        out.setdefault(f"b={e.b!r},kappa={e.kappa!r}", []).append(e.to_dict())
    return json.dumps(out, indent=2, sort_keys=True)
