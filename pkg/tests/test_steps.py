from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradalign.linalg import SparseMatrix, quad_forms
from gradalign.steps import (KINDS, DGMRParams, IndefiniteOperatorError, SequencingError, StepConfigError,
                             StepRule, StepState, harmonic, phase, schedule_next, step_a2, step_ao, step_bb,
                             step_bb2, step_dgmr, step_mg, step_sd, step_y2, step_yuan, y2_radicand,
                             yuan_formula)

D12 = SparseMatrix.diag([1.0, 2.0])


def state(A, *grads, alpha=None):
    s = StepState(0, quad_forms(A, grads[0]))
    for g in grads[1:]:
        s.advance(quad_forms(A, g), alpha)
    return s


def test_basic_quotients_on_diag12():
    s = state(D12, [1.0, 1.0])
    assert step_sd(s) == pytest.approx(2 / 3)
    assert step_mg(s) == pytest.approx(3 / 5)
    assert step_ao(s) == pytest.approx(np.sqrt(2 / 5))
    assert step_mg(s) <= step_ao(s) <= step_sd(s)


@pytest.mark.parametrize("lam", [0.5, 2.0, 7.0])
def test_eigenvector_quotients(lam):
    A = SparseMatrix.diag([lam, 3.0])
    s = state(A, [2.0, 0.0])
    for f in (step_sd, step_mg, step_ao):
        assert f(s) == pytest.approx(1 / lam)
    s = state(SparseMatrix.diag(np.ones(3)), [1.0, -4.0, 2.0])
    assert step_sd(s) == step_mg(s) == pytest.approx(1.0)


def test_bb_relay_and_fallback():
    g0 = np.array([1.0, 1.0])
    s = state(D12, g0)
    assert step_bb(s) == step_sd(s) and step_bb2(s) == step_mg(s)
    g1 = g0 - (2 / 3) * np.array([1.0, 2.0])
    s.advance(quad_forms(D12, g1), 2 / 3)
    assert step_bb(s) == pytest.approx(2 / 3)
    assert step_bb2(s) == pytest.approx(3 / 5)


def test_two_point_steps_need_history():
    s = state(D12, [1.0, 1.0])
    for f in (step_yuan, step_y2, step_a2):
        with pytest.raises(SequencingError):
            f(s)


def test_yuan_collapse_equal_quotients():
    # equal quotients and a vanished gradient: the radical reduces to 0 and the step to a
    assert yuan_formula(0.4, 0.4, 0.0) == pytest.approx(0.4)
    assert yuan_formula(0.25, 0.25, 0.0) == pytest.approx(0.25)


def test_yuan_below_both_sd_steps():
    g0 = np.array([1.0, 1.0])
    a0 = 2 / 3
    g1 = g0 - a0 * np.array([1.0, 2.0])
    s = state(D12, g0, g1, alpha=a0)
    assert step_yuan(s) <= min(a0, step_sd(s))


def test_harmonic():
    assert harmonic(0.6, 0.5) == pytest.approx(3 / 11)
    assert harmonic(0.8, 0.8) == pytest.approx(0.4)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(0, 10))
def test_yuan_bounded_by_min(a, b, ratio):
    assert 0 < yuan_formula(a, b, ratio) <= min(a, b) * (1 + 1e-12)


def test_y2_radicand_closed_form():
    # on diag(1,10) the radicand of two consecutive MG gradients is exactly lam1*lamN
    A = SparseMatrix.diag([1.0, 10.0])
    g0 = np.array([1.0, 0.3])
    q0 = quad_forms(A, g0)
    a = q0.gAg / q0.AgAg
    g1 = g0 - a * np.array([1.0, 3.0])
    q1 = quad_forms(A, g1)
    r = y2_radicand(q0.gAg / q0.AgAg, q1.gAg / q1.AgAg, q0.gAg, q1.gAg)
    assert r == pytest.approx(10.0, rel=1e-12)
    s = state(A, g0, g1, alpha=a)
    assert step_y2(s) == pytest.approx(0.1, rel=1e-12)
    assert step_a2(s) == pytest.approx(1 / 11, rel=1e-12)


def _moments(A, g):
    M = A.to_dense()
    return np.array([g @ np.linalg.matrix_power(M, k) @ g for k in range(5)])


@pytest.mark.parametrize("rho, ups, ref", [(0, 1, step_sd), (1, 1, step_mg), (0, 2, step_ao)])
def test_dgmr_special_cases(rho, ups, ref):
    A = SparseMatrix.diag([1.0, 3.0, 5.0])
    g = np.array([0.3, -1.0, 2.0])
    rule = StepRule("DGMR", dgmr=DGMRParams((rho,), 0, ups))
    assert step_dgmr(rule, deque([_moments(A, g)]), 0) == pytest.approx(ref(state(A, g)), rel=1e-14)


def test_dgmr_lag_uses_older_gradient():
    A = SparseMatrix.diag([1.0, 3.0])
    h = deque([_moments(A, np.array([1.0, 1.0])), _moments(A, np.array([1.0, 0.0]))], maxlen=2)
    rule = StepRule("DGMR", dgmr=DGMRParams((0,), 1, 1))
    assert step_dgmr(rule, h, 5) == pytest.approx(2 / 4)
    assert step_dgmr(rule, deque([h[0]]), 0) == pytest.approx(2 / 4)


def test_dgmr_validation():
    for bad in (dict(rho_schedule=()), dict(rho_schedule=(-1,)), dict(rho_schedule=(3,)),
                dict(upsilon=0), dict(upsilon=3), dict(tau_lag=-1)):
        with pytest.raises(StepConfigError):
            DGMRParams(**bad)


def test_schedule_phase_pattern():
    rule = StepRule("SDA", d1=4, d2=4)
    assert [phase(rule, n) for n in range(10)] == ["base"] * 4 + ["aux"] + ["hold"] * 3 + ["base"] * 2


def test_schedule_hold_repeats_aux():
    rule = StepRule("MGC", d1=1, d2=3)
    A = SparseMatrix.diag([1.0, 2.0, 4.0])
    g = np.array([1.0, 1.0, 1.0])
    s = StepState(0, quad_forms(A, g))
    alphas = []
    for n in range(6):
        if n:
            g = g - alphas[-1] * (A.to_dense() @ g)
            s.advance(quad_forms(A, g), alphas[-1])
        alphas.append(schedule_next(rule, s))
    assert alphas[2] == alphas[1] and alphas[3] == alphas[1]


def test_aoa_aux_is_theta_ao():
    rule = StepRule("AOA", d1=1, d2=1, theta=0.3)
    s = state(D12, [1.0, 1.0], [0.5, -0.2], alpha=0.6)
    assert schedule_next(rule, s) == pytest.approx(0.3 * step_ao(s))


@pytest.mark.parametrize("kw", [dict(kind="XX"), dict(kind="SDA", d1=0), dict(kind="MGC", d2=0),
                                dict(kind="AOA", theta=1.0), dict(kind="AOA", theta=0.0),
                                dict(kind="CONST"), dict(kind="CONST", const_alpha=-1.0)])
def test_rule_validation(kw):
    with pytest.raises(StepConfigError):
        StepRule(**kw)


@pytest.mark.parametrize("kind", KINDS)
def test_rule_dict_roundtrip(kind):
    rule = StepRule(kind, const_alpha=0.1) if kind == "CONST" else StepRule(kind)
    assert StepRule.from_dict(rule.to_dict()) == rule


def test_indefinite_operator_detected():
    s = state(SparseMatrix.diag([-1.0, 2.0]), [1.0, 0.0])
    with pytest.raises(IndefiniteOperatorError):
        step_sd(s)
