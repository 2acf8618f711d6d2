import numpy as np
import pytest

from bridgelab import _backend
from bridgelab.dynamics import (IntegrationError, Trajectory, rhs, rk4_limit, simulate,
                                step_exponential, step_rk4)
from bridgelab.modal import ModalField, State, wavenumbers
from bridgelab.params import BridgeParams, ForcingSpec, Sinusoid

from conftest import smooth_state

PI = np.pi


def state_err(a: State, b: State):
    lam = wavenumbers(a.order) ** 4
    du = a.position.coeffs - b.position.coeffs
    dv = a.velocity.coeffs - b.velocity.coeffs
    return float(np.sqrt(np.dot(lam * du, du) + np.dot(dv, dv)))


def forced(b=2.0, kappa=1.0, N=8, f0=0.3):
    return BridgeParams.from_bk(b, kappa, N=N, forcing=ForcingSpec(static=ModalField.mode(1, N, f0)))


# ---- rhs ----------------------------------------------------------------------------------------

def test_rhs_zero_state():
    du, dv = rhs(State.zeros(8), BridgeParams(N=8))
    assert not np.any(du.coeffs) and not np.any(dv.coeffs)


def test_rhs_single_mode_value():
    p = BridgeParams(N=4)
    _, acc = rhs(State(ModalField.mode(1, 4), ModalField.zeros(4)), p)
    # term by term: -(pi)^4 * 1 + (0 - pi^2) * pi^2 * 1
    oracle = -PI ** 4 + (0.0 - PI ** 2) * PI ** 2
    assert acc.coeffs[0] == pytest.approx(oracle, rel=1e-14)
    assert oracle == pytest.approx(-2 * PI ** 4)
    assert not np.any(acc.coeffs[1:])


def test_rhs_vanishes_on_negative_branch():
    b = 3.0
    p = BridgeParams.from_bk(b, 1.0, N=8)
    amp = -np.sqrt(2 * (b - 1))  # coefficient of sin(pi x)
    u = ModalField.mode(1, 8, amp / np.sqrt(2))
    _, acc = rhs(State(u, ModalField.zeros(8)), p)
    assert np.max(np.abs(acc.coeffs)) < 1e-10 * PI ** 4


def test_rhs_damping_and_forcing_terms():
    f1 = ModalField.mode(2, 4, 0.5)
    p = BridgeParams(N=4, damping=0.3, forcing=ForcingSpec(modulation=Sinusoid(2.0, 1.0),
                                                          modulated=f1))
    v = ModalField([0.0, 1.0, 0.0, 0.0])
    _, acc = rhs(State(ModalField.zeros(4), v), p, t=PI / 2)
    assert acc.coeffs[1] == pytest.approx(2.0 * 0.5 - 0.3, rel=1e-14)


def test_rhs_order_mismatch():
    with pytest.raises(ValueError):
        rhs(State.zeros(4), BridgeParams(N=8))


# ---- one-step behaviour ---------------------------------------------------------------------------

def test_linear_mode_matches_closed_form():
    p = BridgeParams(N=1)
    a0, v0 = 1e-8, 0.0
    h = 0.01
    z = State.from_arrays([a0], [v0])
    w = np.sqrt(PI ** 4 - 0.25)
    for k in range(1, 201):
        z = step_exponential(z, p, 0.0, h)
        t = k * h
        a = np.exp(-t / 2) * (a0 * np.cos(w * t) + (v0 + a0 / 2) / w * np.sin(w * t))
        assert z.position.coeffs[0] == pytest.approx(a, abs=1e-14 * a0 + 1e-24)


def test_zero_state_is_fixed():
    p = BridgeParams.from_bk(3.0, 1.0, N=8)
    z = State.zeros(8)
    assert state_err(step_exponential(z, p, 0.0, 1e-3), z) == 0.0
    assert state_err(step_rk4(z, p, 0.0, 1e-4), z) == 0.0


def test_exact_equilibrium_is_fixed_point_of_scheme():
    p = BridgeParams.from_bk(3.0, 1.0, N=16)
    u = ModalField.mode(1, 16, -np.sqrt(2.0))
    traj = simulate(p, State(u, ModalField.zeros(16)), 5.0, dt=1e-3, stride=100)
    assert np.max(np.abs(traj.positions - u.coeffs)) < 1e-12
    assert np.max(np.abs(traj.velocities)) < 1e-12


def test_rk4_rejects_large_dt_and_detects_blowup():
    p = BridgeParams(N=8)
    with pytest.raises(ValueError):
        step_rk4(State.zeros(8), p, 0.0, 1.01 * rk4_limit(8))
    big = State.from_arrays(np.r_[2e6 / PI ** 2, np.zeros(7)], np.zeros(8))
    with pytest.raises(IntegrationError):
        step_rk4(big, p, 0.0, 1e-4)


# ---- convergence ----------------------------------------------------------------------------------

def _final(params, init, dt, T=1.0, scheme="exponential"):
    return simulate(params, init, T, dt=dt, stride=int(round(T / dt)), scheme=scheme).final


@pytest.mark.parametrize("kappa", [0.0, 1.0])
def test_exponential_scheme_is_second_order(kappa):
    p = forced(kappa=kappa)
    z0 = smooth_state(8, 5.0, seed=1)
    ref = _final(p, z0, 1e-4, scheme="rk4")
    errs = [state_err(_final(p, z0, dt), ref) for dt in (0.01, 0.005, 0.0025)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert min(ratios) > 3.5, (errs, ratios)


def test_rk4_is_fourth_order():
    p = BridgeParams.from_bk(2.0, 0.0, N=4, forcing=ForcingSpec(static=ModalField.mode(1, 4, 0.3)))
    z0 = smooth_state(4, 5.0, seed=2)
    ref = _final(p, z0, 1e-4 / 4, scheme="rk4")
    errs = [state_err(_final(p, z0, dt, scheme="rk4"), ref) for dt in (0.01, 0.005, 0.0025)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert min(ratios) > 12, (errs, ratios)


def test_integrators_agree():
    """Matched accuracy: the exponential rule has the larger error constant (u+ kink)."""
    p = forced(N=8)
    z0 = smooth_state(8, 5.0, seed=3)
    a = _final(p, z0, 1e-5)
    b = _final(p, z0, 1e-4, scheme="rk4")
    assert state_err(a, b) < 1e-6


def test_time_dependent_forcing_agrees_with_rk4():
    fs = ForcingSpec(static=ModalField.mode(1, 8, 0.5), modulation=Sinusoid(1.0, 3.0, 0.2),
                     modulated=ModalField.mode(2, 8, 2.0))
    p = BridgeParams.from_bk(0.5, 1.0, N=8, forcing=fs)
    z0 = smooth_state(8, 2.0, seed=4)
    assert state_err(_final(p, z0, 1e-5), _final(p, z0, 1e-4, scheme="rk4")) < 1e-6


# ---- backends -------------------------------------------------------------------------------------

@pytest.mark.skipif(not _backend.HAS_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("scheme,dt", [("exponential", 1e-3), ("rk4", 1e-4)])
def test_backends_agree(scheme, dt):
    p = forced(N=16)
    z0 = smooth_state(16, 5.0, seed=5, modes=6)
    a = simulate(p, z0, 1.0, dt=dt, stride=50, scheme=scheme, backend="numba")
    b = simulate(p, z0, 1.0, dt=dt, stride=50, scheme=scheme, backend="numpy")
    assert np.max(np.abs(a.positions - b.positions)) < 1e-12
    assert np.max(np.abs(a.velocities - b.velocities)) < 1e-10


def test_backend_env_flag(monkeypatch):
    monkeypatch.setenv("BRIDGELAB_NO_JIT", "1")
    import importlib
    mod = importlib.reload(_backend)
    try:
        assert mod.backend_name() == "numpy"
        assert mod.get_kernels().__name__.endswith("kernels_numpy")
    finally:
        monkeypatch.delenv("BRIDGELAB_NO_JIT")
        importlib.reload(_backend)


# ---- simulate -------------------------------------------------------------------------------------

def test_simulate_grid_and_records():
    p = forced()
    traj = simulate(p, smooth_state(8, 1.0, seed=0), 1.0, dt=1e-3, stride=10)
    assert isinstance(traj, Trajectory)
    assert len(traj) == 101
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(1.0)
    assert np.all(np.diff(traj.times) > 0)
    rec = traj.record(5)
    assert rec.E == traj.column("E")[5]
    assert len(traj.records) == len(traj)


def test_simulate_argument_errors():
    p = BridgeParams(N=4)
    z = State.zeros(4)
    with pytest.raises(ValueError):
        simulate(p, z, 1.0, dt=1e-3, stride=7)
    with pytest.raises(ValueError):
        simulate(p, z, -1.0)
    with pytest.raises(ValueError):
        simulate(p, z, 1.0, dt=0.3)
    with pytest.raises(ValueError):
        simulate(BridgeParams(N=8), z, 1.0)


def test_blowup_reports_time_and_partial_trajectory():
    p = BridgeParams(N=4)
    big = State.from_arrays(np.zeros(4), np.r_[0.0, 0.0, 0.0, 1.1e6])
    with pytest.raises(IntegrationError) as info:
        simulate(p, big, 1.0, dt=1e-3)
    assert info.value.time == pytest.approx(1e-3)
    assert len(info.value.trajectory) == 1


def test_dissipation_without_forcing():
    p = BridgeParams(N=16)
    traj = simulate(p, smooth_state(16, 3.0, seed=7), 5.0, dt=1e-3, stride=100)
    assert traj.column("calE")[-1] < traj.column("calE")[0]


def test_semigroup_restart():
    p = forced(N=16)
    z0 = smooth_state(16, 5.0, seed=8)
    full = simulate(p, z0, 4.0, dt=1e-3, stride=4000).final
    mid = simulate(p, z0, 1.5, dt=1e-3, stride=1500).final
    rest = simulate(p, mid, 2.5, dt=1e-3, stride=2500, t0=1.5).final
    assert state_err(full, rest) < 1e-9


def test_continuity_in_initial_data():
    p = forced(N=16)
    z0 = smooth_state(16, 5.0, seed=9)
    delta = 1e-6
    d = np.zeros(16)
    d[2] = delta / (3 * PI) ** 2
    z1 = State.from_arrays(z0.position.coeffs + d, z0.velocity.coeffs)
    a = simulate(p, z0, 5.0, dt=1e-3, stride=100)
    b = simulate(p, z1, 5.0, dt=1e-3, stride=100)
    lam = wavenumbers(16) ** 4
    gap = np.sqrt(((a.positions - b.positions) ** 2) @ lam
                  + np.sum((a.velocities - b.velocities) ** 2, axis=1))
    assert gap[0] == pytest.approx(delta, rel=1e-6)
    assert np.max(gap) < 1e3 * delta


def test_truncation_convergence():
    """Low-mode coefficients converge as N doubles (smooth forcing, smooth data)."""
    finals = {}
    for n in (4, 8, 16, 32):
        p = forced(b=2.0, kappa=1.0, N=n)
        # sign-changing data so that u+ couples all modes
        z0 = State(ModalField([0.05, 0.08, 0.0, 0.0]).resized(n), ModalField.zeros(n))
        finals[n] = simulate(p, z0, 2.0, dt=1e-3, stride=2000).final.position.coeffs[:4]
    d1 = np.max(np.abs(finals[8] - finals[4]))
    d2 = np.max(np.abs(finals[16] - finals[8]))
    d3 = np.max(np.abs(finals[32] - finals[16]))
    assert d3 < d2 < d1


def test_converges_to_negative_branch():
    p = BridgeParams.from_bk(3.0, 1.0, N=16)
    u = ModalField.mode(1, 16, -np.sqrt(2.0)) + ModalField.mode(2, 16, 0.02)
    traj = simulate(p, State(u, ModalField.mode(1, 16, 0.1)), 60.0, dt=1e-3, stride=1000)
    target = ModalField.mode(1, 16, -np.sqrt(2.0))
    assert state_err(traj.final, State(target, ModalField.zeros(16))) < 1e-6
