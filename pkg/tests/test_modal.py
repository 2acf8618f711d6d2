import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from bridgelab.modal import (LAMBDA1, ModalField, QuadratureGrid, State, coercivity_constant,
                             evaluate, fp_pairing, positive_part, positive_part_sq,
                             positive_part_values, project, sobolev_norm_sq)

PI = np.pi
coeff_arrays = arrays(np.float64, st.integers(1, 12),
                      elements=st.floats(-10, 10, allow_nan=False, allow_infinity=False))


def e(n, order=8, amp=1.0):
    return ModalField.mode(n, order, amp)


# ---- ModalField / State -----------------------------------------------------------------------

def test_field_rejects_nonfinite_and_empty():
    with pytest.raises(ValueError):
        ModalField([1.0, np.nan])
    with pytest.raises(ValueError):
        ModalField([np.inf])
    with pytest.raises(ValueError):
        ModalField([])


def test_field_is_immutable():
    f = ModalField([1.0, 2.0])
    with pytest.raises((ValueError, TypeError)):
        f.coeffs[0] = 3.0


def test_field_json_round_trip():
    f = ModalField([0.1, -2.5, 1e-17])
    d = json.loads(f.to_json())
    assert d["order"] == 3
    g = ModalField.from_json(f.to_json())
    assert np.array_equal(f.coeffs, g.coeffs)


def test_state_orders_must_match():
    with pytest.raises(ValueError):
        State(ModalField([1.0]), ModalField([1.0, 2.0]))


def test_state_phase_norm():
    z = State(e(1, 4), e(2, 4, 3.0))
    assert z.phase_norm() == pytest.approx(np.sqrt(PI ** 4 + 9.0), rel=1e-14)


# ---- quadrature grid --------------------------------------------------------------------------

@pytest.mark.parametrize("m", [2, 16, 256, 1000])
def test_simpson_weights_sum_to_one(m):
    assert QuadratureGrid(m).weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_grid_rejects_odd_and_coarse():
    with pytest.raises(ValueError):
        QuadratureGrid(15)
    with pytest.raises(ValueError):
        project(lambda x: x, QuadratureGrid(64), 8)


def test_simpson_exact_on_cubics():
    g = QuadratureGrid(32)
    x = g.nodes
    assert g.integrate(x ** 3 - 2 * x) == pytest.approx(0.25 - 1.0, abs=1e-14)


# ---- sobolev_norm_sq --------------------------------------------------------------------------

def test_norm_of_e1():
    assert sobolev_norm_sq(e(1), 0) == 1.0
    assert sobolev_norm_sq(e(1), 4) == pytest.approx(LAMBDA1 ** 2, rel=1e-14)


def test_h1_norm_two_modes_against_quadrature_of_derivative():
    f = ModalField([1.0, 1.0])
    # oracle: int_0^1 (u')^2 with u' = sum a_n sqrt(2) n pi cos(n pi x)
    du = lambda x: np.sqrt(2) * (PI * np.cos(PI * x) + 2 * PI * np.cos(2 * PI * x))
    oracle = quad(lambda x: du(x) ** 2, 0, 1, epsabs=1e-13)[0]
    assert oracle == pytest.approx(5 * PI ** 2, rel=1e-12)
    assert sobolev_norm_sq(f, 1) == pytest.approx(oracle, rel=1e-12)


# ---- evaluate ---------------------------------------------------------------------------------

def test_evaluate_examples():
    assert evaluate(e(1), [0.5])[0] == pytest.approx(np.sqrt(2), rel=1e-15)
    assert evaluate(e(2), [0.5])[0] == pytest.approx(0.0, abs=1e-15)
    val = evaluate(ModalField([1.0, 0.5]), [0.25])[0]
    assert val == pytest.approx(np.sqrt(2) * (np.sin(PI / 4) + 0.5), rel=1e-15)


@pytest.mark.parametrize("x", [-1e-9, 1.0000001, np.nan])
def test_evaluate_domain_error(x):
    with pytest.raises(ValueError):
        evaluate(e(1), [x])


def test_evaluate_pinned_ends():
    f = ModalField(np.arange(1.0, 9.0))
    assert np.allclose(evaluate(f, [0.0, 1.0]), 0.0, atol=1e-13)


# ---- project ----------------------------------------------------------------------------------

def test_project_round_trip_basis_mode():
    g = QuadratureGrid.for_order(8)
    out = project(lambda x: evaluate(e(3), x), g, 8)
    assert np.max(np.abs(out.coeffs - e(3).coeffs)) < 1e-10


def test_project_zero():
    g = QuadratureGrid.for_order(8)
    assert not np.any(project(lambda x: 0.0 * x, g, 8).coeffs)


def test_project_parabola_against_quad():
    g = QuadratureGrid.for_order(8)
    c = project(lambda x: x * (1 - x), g, 8).coeffs
    oracle = np.array([quad(lambda x: x * (1 - x) * np.sqrt(2) * np.sin(n * PI * x), 0, 1,
                            epsabs=1e-14)[0] for n in range(1, 9)])
    n = np.arange(1, 9)
    closed = 2 * np.sqrt(2) * (1 - (-1.0) ** n) / (n * PI) ** 3
    assert np.allclose(oracle, closed, atol=1e-13)
    assert np.max(np.abs(c - oracle)) < 1e-8
    assert np.max(np.abs(c[1::2])) < 1e-14  # even modes vanish by symmetry


def test_project_accepts_samples_and_checks_length():
    g = QuadratureGrid.for_order(4)
    f = ModalField([0.3, -0.2, 0.1, 0.05])
    back = project(g.basis(4) @ f.coeffs, g, 4)
    assert np.allclose(back.coeffs, f.coeffs, atol=1e-13)
    with pytest.raises(ValueError):
        project(np.zeros(5), g, 4)


@given(coeff_arrays)
def test_project_evaluate_identity(a):
    f = ModalField(a)
    g = QuadratureGrid.for_order(f.order)
    back = project(lambda x: evaluate(f, x), g, f.order)
    assert np.max(np.abs(back.coeffs - a)) <= 1e-10 * max(1.0, np.max(np.abs(a)))


# ---- positive part ----------------------------------------------------------------------------

def test_positive_part_of_positive_and_negative_mode():
    g = QuadratureGrid.for_order(8)
    assert np.max(np.abs(positive_part(e(1), g).coeffs - e(1).coeffs)) < 1e-12
    assert np.max(np.abs(positive_part(e(1, amp=-1.0), g).coeffs)) < 1e-15


def test_positive_part_of_e2_against_quad():
    g = QuadratureGrid.for_order(8)
    c = positive_part(e(2), g).coeffs
    plus = lambda x: max(np.sqrt(2) * np.sin(2 * PI * x), 0.0)
    oracle = np.array([quad(lambda x: plus(x) * np.sqrt(2) * np.sin(n * PI * x), 0, 1,
                            points=[0.5], epsabs=1e-14)[0] for n in range(1, 9)])
    err = np.max(np.abs(c - oracle))
    assert err < 1e-6
    assert oracle[1] == pytest.approx(0.5, abs=1e-12)  # half of ||e2||^2
    # Simpson error on the piecewise-smooth integrand is fourth order in 1/M
    finer = positive_part(e(2), QuadratureGrid(2 * g.intervals)).coeffs
    assert np.max(np.abs(finer - oracle)) < err / 12


@given(coeff_arrays)
def test_positive_part_contraction_and_idempotence(a):
    f = ModalField(a)
    g = QuadratureGrid.for_order(f.order)
    vals = g.basis(f.order) @ a
    plus = positive_part_values(f, g)
    assert g.integrate(plus ** 2) <= g.integrate(vals ** 2) * (1 + 1e-14) + 1e-300
    assert np.array_equal(np.maximum(plus, 0.0), plus)
    assert positive_part_sq(f, g) == pytest.approx(g.integrate(plus ** 2), rel=1e-14)


# ---- Parseval / Poincare ----------------------------------------------------------------------

@given(coeff_arrays)
def test_parseval(a):
    f = ModalField(a)
    g = QuadratureGrid.for_order(f.order)
    vals = g.basis(f.order) @ a
    assert g.integrate(vals ** 2) == pytest.approx(sobolev_norm_sq(f, 0), rel=1e-10, abs=1e-300)


@given(coeff_arrays, st.sampled_from([0, 1, 2]))
def test_generalised_poincare(a, r):
    f = ModalField(a)
    lo = LAMBDA1 * sobolev_norm_sq(f, r) ** 2
    hi = sobolev_norm_sq(f, r + 1) ** 2
    assert lo <= hi * (1 + 1e-12)
    if np.any(a[1:] != 0) and lo > 0:
        assert lo < hi


def test_poincare_equality_on_first_mode():
    f = e(1, amp=0.7)
    for r in (0, 1, 2):
        assert LAMBDA1 * sobolev_norm_sq(f, r) ** 2 == pytest.approx(sobolev_norm_sq(f, r + 1) ** 2,
                                                                      rel=1e-14)


# ---- fp_pairing / C(p) ------------------------------------------------------------------------

def test_fp_pairing_examples():
    assert fp_pairing(e(1), 0.0) == pytest.approx(PI ** 4, rel=1e-15)
    assert fp_pairing(e(1), PI ** 2) == 0.0
    assert fp_pairing(ModalField([1.0, 1.0]), PI ** 2 / 2) == pytest.approx(14.5 * PI ** 4,
                                                                            rel=1e-14)


def test_coercivity_constant_cases():
    assert coercivity_constant(-3.0) == 1.0
    assert coercivity_constant(0.0) == 1.0
    assert coercivity_constant(PI ** 2 / 2) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        coercivity_constant(PI ** 2)


@given(coeff_arrays, st.floats(-3 * PI ** 2, PI ** 2, exclude_max=True))
def test_fp_pairing_bound(a, p):
    f = ModalField(a)
    lhs = fp_pairing(f, p)
    rhs = coercivity_constant(p) * sobolev_norm_sq(f, 2)
    assert lhs >= rhs - 1e-12 * max(abs(rhs), 1e-300)
