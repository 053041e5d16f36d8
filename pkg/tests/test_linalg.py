import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gradalign.linalg import (MatrixFormatError, SparseMatrix, SpectralModel, dense_sym_eigen,
                              project_components, quad_forms, read_matrix_market, spmv,
                              write_matrix_market)


def toeplitz_eigs(n):
    k = np.arange(1, n + 1)
    return 2.0 * (1.0 - np.cos(k * np.pi / (n + 1)))


def test_spmv_identity():
    assert np.array_equal(spmv(SparseMatrix.diag(np.ones(3)), [1, 2, 3]), [1, 2, 3])


def test_spmv_tridiag_row_sums():
    A = SparseMatrix.tridiag(3, -1, 2, -1)
    assert np.allclose(spmv(A, np.ones(3)), [1, 0, 1])


def test_spmv_zero_and_mismatch():
    A = SparseMatrix.tridiag(4, -1, 2, -1)
    assert np.array_equal(spmv(A, np.zeros(4)), np.zeros(4))
    with pytest.raises(ValueError, match="dimension"):
        spmv(A, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-5, 5)), arrays(np.float64, 6, elements=st.floats(-5, 5)))
def test_spmv_matches_dense(M, x):
    assert np.allclose(spmv(SparseMatrix.from_dense(M), x), M @ x, atol=1e-12)


def test_quad_forms_examples(diag12):
    q = quad_forms(diag12, [1.0, 1.0])
    assert (q.gg, q.gAg, q.AgAg) == (2.0, 3.0, 5.0)
    q = quad_forms(SparseMatrix.diag([1.0, 1.0]), [3.0, 4.0])
    assert (q.gg, q.gAg, q.AgAg) == (25.0, 25.0, 25.0)
    q = quad_forms(diag12, [0.0, 0.0])
    assert (q.gg, q.gAg, q.AgAg, q.norm_g) == (0.0, 0.0, 0.0, 0.0)


def test_invalid_csr_rejected():
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 1, 1]), np.array([5]), np.array([1.0]))


def _write(tmp_path, text):
    p = tmp_path / "m.mtx"
    p.write_text(text)
    return p


def test_mm_symmetric_expansion(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 3\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n")
    A = read_matrix_market(p)
    assert np.array_equal(A.to_dense(), [[2, -1], [-1, 2]])
    assert A.symmetric_flag


def test_mm_out_of_range_reports_line(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
    with pytest.raises(MatrixFormatError, match="out of range") as exc:
        read_matrix_market(p)
    assert exc.value.line == 3


def test_mm_general_kept_as_given(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 0.5\n2 1 0.5\n")
    A = read_matrix_market(p)
    assert not A.symmetric_flag
    assert A.to_dense()[0, 1] == A.to_dense()[1, 0] == 0.5


@pytest.mark.parametrize("text, msg", [
    ("%%MatrixMarket matrix array real general\n2 2\n", "unsupported"),
    ("hello\n", "header"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", "expected 2"),
    ("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1.0\n", "square"),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n", "parse"),
])
def test_mm_malformed(tmp_path, text, msg):
    with pytest.raises(MatrixFormatError, match=msg):
        read_matrix_market(_write(tmp_path, text))


def test_mm_duplicates_summed(tmp_path):
    p = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1.5\n1 1 2.0\n")
    assert read_matrix_market(p).to_dense()[0, 0] == 3.5


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_mm_roundtrip(tmp_path_factory, n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) * (rng.random((n, n)) < 0.5)
    S = M + M.T
    for dense, sym in ((S, True), (M, False)):
        path = tmp_path_factory.mktemp("mm") / "a.mtx"
        write_matrix_market(SparseMatrix.from_dense(dense, symmetric_flag=sym), path)
        B = read_matrix_market(path)
        assert np.array_equal(B.to_dense(), dense)
        assert B.symmetric_flag == sym


def test_eigen_diagonal_sorted():
    sm = dense_sym_eigen(SparseMatrix.diag([3.0, 1.0, 2.0]))
    assert np.allclose(sm.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(sm.eigenvectors), np.eye(3)[:, [1, 2, 0]])


@pytest.mark.parametrize("n", [5, 17, 60])
def test_eigen_toeplitz_closed_form(n):
    sm = dense_sym_eigen(SparseMatrix.tridiag(n, -1, 2, -1))
    assert np.allclose(sm.eigenvalues, toeplitz_eigs(n), rtol=1e-12, atol=1e-13)


def test_eigen_identity_and_guards():
    assert np.allclose(dense_sym_eigen(SparseMatrix.diag(np.ones(4))).eigenvalues, 1.0)
    with pytest.raises(ValueError, match="symmetric"):
        dense_sym_eigen(SparseMatrix.from_dense([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="capped"):
        dense_sym_eigen(SparseMatrix.diag(np.ones(5)), cap=4)


def test_spectral_model_validation():
    with pytest.raises(ValueError):
        SpectralModel(np.array([2.0, 1.0]))
    with pytest.raises(ValueError):
        SpectralModel(np.array([0.0, 1.0]))
    sm = SpectralModel(np.array([1.0, 4.0]), diagonal=True)
    assert sm.kappa == 4.0 and sm.has_basis()


def test_project_components_single_mode():
    sm = dense_sym_eigen(SparseMatrix.tridiag(4, -1, 2, -1))
    z = project_components(3.0 * sm.eigenvectors[:, 0], sm)
    assert np.allclose(np.abs(z[0]), [3, 0, 0, 0])
