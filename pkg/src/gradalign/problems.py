"""Problem families: random SPD with prescribed conditioning, 1-D BVP, nonsymmetric perturbations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linalg import SparseMatrix, SpectralModel, read_matrix_market, spmv, write_matrix_market

GENERATOR_VERSION = 1
HOUSEHOLDER_REFLECTIONS = 3
PERTURB_DENSITY = 0.1
XSTAR_RANGE = 10.0
PERTURB_STREAM = 0x5052  # separates the V draw from a base problem built with the same seed


@dataclass(frozen=True, eq=False)
class Problem:
    A: SparseMatrix
    b: np.ndarray
    x_star: Optional[np.ndarray] = None
    spectrum: Optional[SpectralModel] = None
    kappa: Optional[float] = None
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.n

    def residual(self, x) -> np.ndarray:
        return spmv(self.A, x) - self.b


def _rng(seed: int, stream: Optional[int] = None) -> np.random.Generator:
    key = [int(np.uint64(seed))] if stream is None else [int(np.uint64(seed)), stream]
    return np.random.default_rng(key)


def _x_star(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-XSTAR_RANGE, XSTAR_RANGE, n)


def random_spectrum(n: int, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """Ascending spectrum with 1 and ``kappa`` pinned and log-uniform interior."""
    interior = np.exp(rng.uniform(0.0, np.log(kappa), n - 2)) if n > 2 else np.empty(0)
    lam = np.concatenate([[1.0], np.sort(interior), [float(kappa)]])
    return np.clip(lam, 1.0, float(kappa))


def gen_random_spd(n: int, kappa: float, seed: int = 0, rotate: bool = False) -> Problem:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not kappa >= 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    rng = _rng(seed)
    lam = random_spectrum(n, kappa, rng)
    x_star = _x_star(rng, n)
    if rotate:
        Q = np.eye(n)
        for _ in range(HOUSEHOLDER_REFLECTIONS):
            u = rng.standard_normal(n)
            u /= np.linalg.norm(u)
            Q -= 2.0 * np.outer(Q @ u, u)
        dense = (Q * lam) @ Q.T
        dense = 0.5 * (dense + dense.T)
        A = SparseMatrix.from_dense(dense, symmetric_flag=True)
        spectrum = SpectralModel(lam, Q)
    else:
        A = SparseMatrix.diag(lam)
        spectrum = SpectralModel(lam, diagonal=True)
    return Problem(A, spmv(A, x_star), x_star, spectrum, float(kappa),
                   label=f"random-n{n}-k{kappa:g}-s{seed}" + ("-rot" if rotate else ""),
                   meta={"generator": "random_spd", "n": n, "kappa": float(kappa), "seed": int(seed),
                         "rotate": bool(rotate), "version": GENERATOR_VERSION})


def gen_diagonal(eigenvalues, x_star=None, seed: int = 0, label: str = "diag") -> Problem:
    """Diagonal problem with an explicit ascending spectrum (verification runs)."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if x_star is None:
        x_star = _x_star(_rng(seed), len(lam))
    x_star = np.asarray(x_star, dtype=np.float64)
    A = SparseMatrix.diag(lam)
    spectrum = SpectralModel(lam, diagonal=True)
    return Problem(A, spmv(A, x_star), x_star, spectrum, spectrum.kappa, label=label,
                   meta={"generator": "diagonal", "seed": int(seed), "version": GENERATOR_VERSION})


def bvp_eigenvalues(n: int) -> np.ndarray:
    h = 11.0 / n
    k = np.arange(1, n + 1)
    return (2.0 / h**2) * (1.0 - np.cos(k * np.pi / (n + 1)))


def bvp_eigenvectors(n: int) -> np.ndarray:
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * np.pi / (n + 1))


def gen_bvp(n: int, seed: int = 0) -> Problem:
    """Finite-difference two-point BVP: tridiag(-1, 2, -1)/h^2 with h = 11/n."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    h = 11.0 / n
    inv_h2 = 1.0 / h**2
    A = SparseMatrix.tridiag(n, -inv_h2, 2.0 * inv_h2, -inv_h2)
    x_star = _x_star(_rng(seed), n)
    lam = bvp_eigenvalues(n)
    spectrum = SpectralModel(lam)
    return Problem(A, spmv(A, x_star), x_star, spectrum, spectrum.kappa, label=f"bvp-n{n}-s{seed}",
                   meta={"generator": "bvp", "n": n, "seed": int(seed), "version": GENERATOR_VERSION})


def sprand(n: int, density: float, rng: np.random.Generator) -> sp.csr_matrix:
    """Random sparse matrix, entries uniform on (0, 1) at uniformly drawn positions."""
    nnz = int(round(density * n * n))
    flat = rng.choice(n * n, size=nnz, replace=False)
    vals = rng.uniform(0.0, 1.0, nnz)
    return sp.csr_matrix((vals, (flat // n, flat % n)), shape=(n, n))


def gen_perturbed(p: Problem, delta: float, seed: int = 0,
                  density: float = PERTURB_DENSITY) -> Problem:
    """A + delta*V with V nonsymmetric sparse random; x_star stays the solution."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if p.x_star is None:
        raise ValueError("perturbation needs a problem with known solution")
    V = sprand(p.n, density, _rng(seed, PERTURB_STREAM))
    At = SparseMatrix.from_scipy(p.A.to_scipy() + delta * V, symmetric_flag=False)
    meta = dict(p.meta, perturbed={"delta": float(delta), "seed": int(seed), "density": density})
    return Problem(At, spmv(At, p.x_star), p.x_star, None, p.kappa,
                   label=f"{p.label}-pert{delta:g}", meta=meta)


def scale_problem(p: Problem, factor: float) -> Problem:
    """Problem for (factor*A) x = factor*b; x_star unchanged, spectrum rescaled."""
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    A = SparseMatrix.from_scipy(factor * p.A.to_scipy(), symmetric_flag=p.A.symmetric_flag)
    spectrum = None
    if p.spectrum is not None:
        spectrum = SpectralModel(factor * p.spectrum.eigenvalues, p.spectrum.eigenvectors,
                                 p.spectrum.diagonal)
    b = spmv(A, p.x_star) if p.x_star is not None else factor * p.b
    return Problem(A, b, p.x_star, spectrum, p.kappa, label=f"{p.label}-x{factor:g}",
                   meta=dict(p.meta, scale=float(factor)))


def unit_scaled(p: Problem) -> Problem:
    """Rescale so the largest eigenvalue is 1 (the normalization of sprandsym-style matrices)."""
    if p.spectrum is None:
        raise ValueError("unit scaling needs a known spectrum")
    return scale_problem(p, 1.0 / p.spectrum.lam_max)


def from_matrix_market(path, seed: int = 0) -> Problem:
    """Load an operator and build b = A x_star with a random x_star."""
    A = read_matrix_market(path)
    x_star = _x_star(_rng(seed), A.n)
    return Problem(A, spmv(A, x_star), x_star, None, None, label=Path(path).stem,
                   meta={"generator": "matrix_market", "path": str(path), "seed": int(seed)})


# --- directory serialization ----------------------------------------------------------

def save_problem(p: Problem, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix_market(p.A, d / "matrix.mtx")
    np.savetxt(d / "b.txt", p.b, fmt="%.17g")
    if p.x_star is not None:
        np.savetxt(d / "x_star.txt", p.x_star, fmt="%.17g")
    meta = {"label": p.label, "kappa": p.kappa, "seed": p.meta.get("seed"),
            "generator": p.meta.get("generator"), "meta": p.meta}
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return d


def load_problem(directory) -> Problem:
    d = Path(directory)
    A = read_matrix_market(d / "matrix.mtx")
    b = np.atleast_1d(np.loadtxt(d / "b.txt"))
    xs = d / "x_star.txt"
    x_star = np.atleast_1d(np.loadtxt(xs)) if xs.exists() else None
    meta = json.loads((d / "meta.json").read_text())
    return Problem(A, b, x_star, None, meta.get("kappa"), meta.get("label", ""),
                   meta.get("meta", {}))


def with_spectrum(p: Problem, spectrum: SpectralModel) -> Problem:
    return replace(p, spectrum=spectrum)
