import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradalign.linalg import SparseMatrix
from gradalign.problems import Problem, gen_bvp, gen_diagonal, gen_random_spd
from gradalign.solver import (CONVERGED, MAX_ITERS, NUMERICAL_ERROR, SolveConfig, default_max_iters,
                              eval_f_gap, run_gradient)
from gradalign.steps import KINDS, StepRule


def test_identity_one_step():
    p = gen_diagonal(np.ones(4), x_star=np.arange(1.0, 5.0))
    tr = run_gradient(p, StepRule("SD"))
    assert tr.converged and tr.iterations_used == 1 and tr.alpha == [1.0]
    assert np.allclose(tr.x, p.x_star)


def test_sd_golden_two_by_two():
    p = gen_diagonal([1.0, 2.0], x_star=[1.0, 1.0])
    tr = run_gradient(p, StepRule("SD"), SolveConfig(max_iters=1, capture_components=True))
    assert tr.alpha[0] == pytest.approx(5 / 9)
    assert np.allclose(tr.gradients[0], [-1, -2])
    assert np.allclose(tr.gradients[1], [-4 / 9, 2 / 9])


def test_bvp_mgc_converges():
    tr = run_gradient(gen_bvp(100), StepRule("MGC"), SolveConfig(max_iters=100_000))
    assert tr.converged and tr.final_relres < 1e-6


def test_f_gap_values():
    p = gen_diagonal([1.0, 2.0], x_star=[1.0, 1.0])
    assert eval_f_gap(p, p.x_star) == 0.0
    assert eval_f_gap(p, np.zeros(2)) == pytest.approx(1.5)


@pytest.mark.parametrize("kind", ["SD", "MG"])
def test_monotone_methods(kind):
    p = gen_random_spd(30, 1e3, 1)
    tr = run_gradient(p, StepRule(kind), SolveConfig(max_iters=500))
    f = np.asarray(tr.f_gap)
    assert np.all(np.diff(f) <= 1e-12 * f[:-1])
    if kind == "MG":
        r = np.asarray(tr.res_norm)
        assert np.all(np.diff(r) <= 1e-12 * r[:-1])


def test_f_gap_recorded_matches_direct():
    p = gen_random_spd(20, 100.0, 2)
    tr = run_gradient(p, StepRule("SDC"), SolveConfig(max_iters=30, capture_iterates=True))
    direct = [eval_f_gap(p, x) for x in tr.iterates]
    assert np.allclose(tr.f_gap, direct, rtol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([k for k in KINDS if k != "CONST"]), st.integers(0, 1000))
def test_recurrence_tracks_true_gradient(kind, seed):
    p = gen_random_spd(40, 1e3, seed, rotate=True)
    tr = run_gradient(p, StepRule(kind), SolveConfig(max_iters=60, recompute_period=20))
    assert len(tr.alpha) == tr.iterations_used
    assert all(d <= 1e-8 * tr.res_norm[0] for d in tr.refresh_drift)


def test_recompute_counts_matvecs():
    p = gen_random_spd(20, 1e3, 0)
    tr = run_gradient(p, StepRule("SD"), SolveConfig(max_iters=100, tol_rel=1e-30, recompute_period=50))
    assert tr.status == MAX_ITERS and tr.iterations_used == 100
    assert tr.matvecs == 101 + 2 and len(tr.refresh_drift) == 2


def test_default_budgets():
    assert default_max_iters(1e2) == 10_000 and default_max_iters(1e4) == 10_000
    assert default_max_iters(1e5) == 100_000 and default_max_iters(None) == 100_000


def test_indefinite_reports_numerical_error():
    A = SparseMatrix.diag([-1.0, 2.0])
    p = Problem(A, np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
    tr = run_gradient(p, StepRule("SD"))
    assert tr.status == NUMERICAL_ERROR and "positive definite" in tr.message


def test_zero_rhs_converges_immediately():
    p = gen_diagonal([1.0, 3.0], x_star=[0.0, 0.0])
    tr = run_gradient(p, StepRule("MGC"))
    assert tr.status == CONVERGED and tr.iterations_used == 0


def test_csv_and_sidecar(tmp_path):
    p = gen_random_spd(10, 10.0, 0)
    tr = run_gradient(p, StepRule("MGC"))
    tr.write_csv(tmp_path / "t.csv")
    tr.write_sidecar(tmp_path / "t.json")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["iter", "alpha", "res_norm", "gAg", "f_gap"]
    assert len(rows) == tr.iterations_used + 2 and rows[-1][1] == ""
    assert float(rows[1][1]) == tr.alpha[0]
    meta = json.loads((tmp_path / "t.json").read_text())
    assert meta["status"] == "converged" and meta["iterations_used"] == tr.iterations_used


def test_config_validation():
    for bad in (dict(tol_rel=0.0), dict(max_iters=0), dict(recompute_period=0)):
        with pytest.raises(ValueError):
            SolveConfig(**bad)
