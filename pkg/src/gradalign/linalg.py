"""Sparse/dense kernels, quadratic forms, Matrix Market I/O and a verification eigensolver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

DENSE_EIGEN_CAP = 2000


class MatrixFormatError(ValueError):
    """Raised for malformed Matrix Market input; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Square real matrix in CSR form with full (two-triangle) storage."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric_flag: bool = False
    _csr: sp.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        va = np.ascontiguousarray(self.values, dtype=np.float64)
        for arr in (ro, ci, va):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)
        object.__setattr__(self, "values", va)
        self._validate()
        csr = sp.csr_matrix((va, ci, ro), shape=(self.n, self.n))
        object.__setattr__(self, "_csr", csr)
        if self.symmetric_flag and not self.is_symmetric():
            raise ValueError("symmetric_flag set but stored entries are not symmetric")

    def _validate(self):
        n, ro, ci = self.n, self.row_offsets, self.col_indices
        if n < 1:
            raise ValueError("dimension must be positive")
        if ro.shape != (n + 1,) or ro[0] != 0 or ro[-1] != len(self.values):
            raise ValueError("row_offsets must have length n+1, start at 0 and end at nnz")
        if len(ci) != len(self.values):
            raise ValueError("col_indices and values differ in length")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= n):
            raise ValueError("column index out of range")
        # strictly increasing columns inside each row
        if len(ci) > 1:
            step = np.diff(ci)
            row_start = np.zeros(len(ci), dtype=bool)
            row_start[ro[1:-1][ro[1:-1] < len(ci)]] = True
            if np.any((step <= 0) & ~row_start[1:]):
                raise ValueError("column indices must be strictly increasing within each row")

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def is_diagonal(self) -> bool:
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        return bool(np.all(rows == self.col_indices))

    def is_symmetric(self, rtol: float = 0.0) -> bool:
        diff = self._csr - self._csr.T
        if diff.nnz == 0:
            return True
        worst = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        scale = np.max(np.abs(self.values)) if self.nnz else 0.0
        return bool(worst <= rtol * scale)

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @classmethod
    def from_scipy(cls, mat, symmetric_flag: Optional[bool] = None) -> "SparseMatrix":
        csr = sp.csr_matrix(mat, dtype=np.float64)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got {csr.shape}")
        csr.sum_duplicates()
        csr.sort_indices()
        if symmetric_flag is None:
            symmetric_flag = (csr - csr.T).nnz == 0
        return cls(csr.shape[0], csr.indptr, csr.indices, csr.data, symmetric_flag)

    @classmethod
    def from_dense(cls, a, symmetric_flag: Optional[bool] = None) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(a, dtype=np.float64)), symmetric_flag)

    @classmethod
    def diag(cls, d) -> "SparseMatrix":
        d = np.asarray(d, dtype=np.float64)
        n = len(d)
        return cls(n, np.arange(n + 1), np.arange(n), d, True)

    @classmethod
    def tridiag(cls, n: int, lower: float, main: float, upper: float) -> "SparseMatrix":
        mat = sp.diags([np.full(n - 1, lower), np.full(n, main), np.full(n - 1, upper)],
                       [-1, 0, 1], shape=(n, n), format="csr")
        return cls.from_scipy(mat, symmetric_flag=(lower == upper))


@dataclass(frozen=True)
class QuadForms:
    gg: float
    gAg: float
    AgAg: float
    norm_g: float
    norm_Ag: float


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Eigenvalues (ascending) and optionally eigenvectors of an SPD operator.

    ``diagonal=True`` means the eigenbasis is the coordinate basis, so
    eigen-components are read directly off a vector.
    """

    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    diagonal: bool = False

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        if lam.ndim != 1 or len(lam) == 0:
            raise ValueError("eigenvalues must be a nonempty vector")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ascending")
        if lam[0] <= 0:
            raise ValueError("smallest eigenvalue must be positive")
        object.__setattr__(self, "eigenvalues", lam)
        if self.eigenvectors is not None:
            vec = np.asarray(self.eigenvectors, dtype=np.float64)
            if vec.shape != (len(lam), len(lam)):
                raise ValueError("eigenvector matrix must be N x N")
            object.__setattr__(self, "eigenvectors", vec)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def kappa(self) -> float:
        return self.lam_max / self.lam_min

    def has_basis(self) -> bool:
        return self.diagonal or self.eigenvectors is not None


def _check_len(A: SparseMatrix, x: np.ndarray, name: str = "x"):
    if x.ndim != 1 or x.shape[0] != A.n:
        raise ValueError(f"dimension mismatch: {name} has shape {x.shape}, matrix is {A.n}x{A.n}")


def spmv(A: SparseMatrix, x) -> np.ndarray:
    """Return ``A @ x`` through the CSR kernel."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(A, x)
    return A.to_scipy() @ x


def quad_forms(A: SparseMatrix, g, w: Optional[np.ndarray] = None) -> QuadForms:
    """Scalars g'g, g'Ag, (Ag)'(Ag) from one matvec (``w`` may be passed in if already known)."""
    g = np.asarray(g, dtype=np.float64)
    _check_len(A, g, "g")
    if w is None:
        w = spmv(A, g)
    gg = float(g @ g)
    AgAg = float(w @ w)
    return QuadForms(gg=gg, gAg=float(g @ w), AgAg=AgAg,
                     norm_g=math.sqrt(gg), norm_Ag=math.sqrt(AgAg))


# --- Matrix Market ---------------------------------------------------------------------

def read_matrix_market(path) -> SparseMatrix:
    """Read a real coordinate Matrix Market file (symmetric or general)."""
    path = Path(path)
    with path.open("r") as fh:
        header = fh.readline()
        lineno = 1
        tokens = header.strip().split()
        if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
            raise MatrixFormatError("missing or malformed %%MatrixMarket header", lineno)
        obj, fmt, fld, symm = (t.lower() for t in tokens[1:])
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixFormatError(f"unsupported object/format '{obj} {fmt}'", lineno)
        if fld not in ("real", "double", "integer"):
            raise MatrixFormatError(f"unsupported field '{fld}'", lineno)
        if symm not in ("symmetric", "general"):
            raise MatrixFormatError(f"unsupported symmetry '{symm}'", lineno)

        size = None
        for line in fh:
            lineno += 1
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise MatrixFormatError("size line must be 'rows cols nnz'", lineno)
            try:
                size = tuple(int(p) for p in parts)
            except ValueError:
                raise MatrixFormatError("size line must hold integers", lineno) from None
            break
        if size is None:
            raise MatrixFormatError("missing size line", lineno)
        nrows, ncols, nnz = size
        if nrows != ncols:
            raise MatrixFormatError(f"matrix is not square ({nrows}x{ncols})", lineno)
        n = nrows

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        k = 0
        for line in fh:
            lineno += 1
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise MatrixFormatError("entry must be 'row col value'", lineno)
            if k >= nnz:
                raise MatrixFormatError(f"more than the declared {nnz} entries", lineno)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise MatrixFormatError(f"cannot parse entry '{s}'", lineno) from None
            if not (1 <= i <= n and 1 <= j <= n):
                raise MatrixFormatError(f"index ({i},{j}) out of range for {n}x{n}", lineno)
            rows[k], cols[k], vals[k] = i - 1, j - 1, v
            k += 1
        if k != nnz:
            raise MatrixFormatError(f"expected {nnz} entries, found {k}", lineno)

    if symm == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(n, n))
    # duplicates are summed by the COO -> CSR conversion
    return SparseMatrix.from_scipy(coo.tocsr(), symmetric_flag=(symm == "symmetric"))


def write_matrix_market(A: SparseMatrix, path, symmetric: Optional[bool] = None) -> None:
    """Write ``A``; symmetric matrices store the lower triangle only."""
    if symmetric is None:
        symmetric = A.symmetric_flag
    coo = A.to_scipy().tocoo()
    r, c, v = coo.row, coo.col, coo.data
    if symmetric:
        keep = r >= c
        r, c, v = r[keep], c[keep], v[keep]
    order = np.lexsort((r, c))
    kind = "symmetric" if symmetric else "general"
    with Path(path).open("w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {kind}\n")
        fh.write(f"{A.n} {A.n} {len(v)}\n")
        for i, j, x in zip(r[order], c[order], v[order]):
            fh.write(f"{i + 1} {j + 1} {float(x)!r}\n")


# --- verification eigensolver ----------------------------------------------------------

def dense_sym_eigen(A: SparseMatrix, cap: int = DENSE_EIGEN_CAP) -> SpectralModel:
    """Full eigendecomposition of a symmetric matrix via LAPACK ``syevd``."""
    if A.n > cap:
        raise ValueError(f"dense eigensolver is capped at n={cap}, got n={A.n}")
    if not A.is_symmetric(rtol=1e-14):
        raise ValueError("dense_sym_eigen requires a symmetric matrix")
    dense = A.to_dense()
    lam, vec = np.linalg.eigh(0.5 * (dense + dense.T))
    return SpectralModel(lam, vec, diagonal=False)


def project_components(vectors, sm: SpectralModel) -> np.ndarray:
    """Eigen-components of each row of ``vectors``: zeta[n, i] = v_i' g_n."""
    G = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if sm.diagonal:
        return G.copy()
    if sm.eigenvectors is None:
        raise ValueError("spectral model carries no eigenvectors")
    return G @ sm.eigenvectors
