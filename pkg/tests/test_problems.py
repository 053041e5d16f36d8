import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradalign.linalg import dense_sym_eigen, spmv
from gradalign.problems import (gen_bvp, gen_perturbed, gen_random_spd, load_problem, save_problem,
                                scale_problem, unit_scaled, bvp_eigenvalues, bvp_eigenvectors)


def test_two_by_two_pins_extremes():
    p = gen_random_spd(2, 10.0, seed=3)
    assert np.array_equal(p.A.to_dense(), np.diag([1.0, 10.0]))
    assert np.array_equal(p.spectrum.eigenvalues, [1.0, 10.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 300), st.floats(1.5, 1e6), st.integers(0, 2**32 - 1))
def test_kappa_exact_and_solution(n, kappa, seed):
    p = gen_random_spd(n, kappa, seed)
    lam = p.A.diagonal()
    assert lam.min() == 1.0 and lam.max() == kappa
    assert np.all(np.diff(p.spectrum.eigenvalues) >= 0)
    assert np.allclose(spmv(p.A, p.x_star), p.b)


def test_same_seed_same_problem():
    a, b = gen_random_spd(50, 1e3, 9), gen_random_spd(50, 1e3, 9)
    assert np.array_equal(a.b, b.b) and np.array_equal(a.A.values, b.A.values)
    assert not np.array_equal(a.b, gen_random_spd(50, 1e3, 10).b)


def test_rotated_spectrum_matches_eigensolver():
    p = gen_random_spd(50, 1e3, seed=4, rotate=True)
    sm = dense_sym_eigen(p.A)
    assert np.allclose(sm.eigenvalues, p.spectrum.eigenvalues, rtol=1e-8)
    Q = p.spectrum.eigenvectors
    assert np.allclose(Q.T @ Q, np.eye(50), atol=1e-12)


def test_bad_arguments():
    with pytest.raises(ValueError):
        gen_random_spd(1, 10.0)
    with pytest.raises(ValueError):
        gen_random_spd(5, 0.5)
    with pytest.raises(ValueError):
        gen_bvp(1)


def test_bvp_stencil_n3():
    A = gen_bvp(3).A.to_dense()
    assert np.allclose(np.diag(A), 18 / 121)
    assert np.allclose(np.diag(A, 1), -9 / 121) and np.allclose(np.diag(A, -1), -9 / 121)
    assert np.isclose(bvp_eigenvalues(3)[1], 18 / 121)


@pytest.mark.parametrize("n", [10, 100])
def test_bvp_closed_form_vs_eigensolver(n):
    p = gen_bvp(n)
    assert np.allclose(dense_sym_eigen(p.A).eigenvalues, bvp_eigenvalues(n), rtol=1e-10)
    V = bvp_eigenvectors(n)
    assert np.allclose(p.A.to_dense() @ V, V * bvp_eigenvalues(n), atol=1e-10)


def test_perturbation_bound_and_pattern():
    base = unit_scaled(gen_random_spd(80, 1e4, 2))
    for delta in (1e-4, 1e-8):
        q = gen_perturbed(base, delta, seed=2)
        diff = q.A.to_dense() - base.A.to_dense()
        V = diff / delta
        assert np.linalg.norm(diff) <= delta * np.linalg.norm(V) * (1 + 1e-12)
        assert not q.A.symmetric_flag and not q.A.is_symmetric()
        assert np.allclose(spmv(q.A, q.x_star), q.b)
        assert 0.05 < np.count_nonzero(V) / 80**2 < 0.15
    with pytest.raises(ValueError):
        gen_perturbed(base, 0.0)


def test_unit_scaling():
    p = unit_scaled(gen_random_spd(20, 1e3, 0))
    assert np.isclose(p.spectrum.lam_max, 1.0) and np.isclose(p.A.diagonal().max(), 1.0)
    assert np.allclose(spmv(p.A, p.x_star), p.b)
    with pytest.raises(ValueError):
        scale_problem(p, -1.0)


def test_save_load_roundtrip(tmp_path):
    p = gen_random_spd(12, 50.0, 5, rotate=True)
    q = load_problem(save_problem(p, tmp_path / "p"))
    assert np.array_equal(q.A.to_dense(), p.A.to_dense())
    assert np.array_equal(q.b, p.b) and np.array_equal(q.x_star, p.x_star)
    assert q.label == p.label and q.kappa == p.kappa and q.meta["seed"] == 5
