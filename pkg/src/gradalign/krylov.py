"""Krylov baselines: plain conjugate gradient and restarted GMRES(l)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import Problem
from .solver import CONVERGED, MAX_ITERS, NUMERICAL_ERROR, CountingOperator, IterationTrace

log = logging.getLogger(__name__)


@dataclass
class KrylovConfig:
    tol_rel: float = 1e-6
    max_iters: int = 10_000
    restart_l: int = 20
    x0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if self.restart_l < 1:
            raise ValueError("restart_l must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _start(p: Problem, cfg: KrylovConfig, op: CountingOperator):
    if cfg.x0 is None:
        return np.zeros(p.n), p.b.copy()
    x = np.array(cfg.x0, dtype=float)
    return x, p.b - op(x)


def run_cg(p: Problem, cfg: Optional[KrylovConfig] = None) -> IterationTrace:
    """Hestenes-Stiefel CG.

    ``res_norm`` holds the recursively updated residual. When it passes the
    tolerance the true residual is checked; if that fails the iteration restarts
    from the true residual, which is how stagnation shows up on nonsymmetric input.
    """
    cfg = cfg or KrylovConfig()
    if not p.A.symmetric_flag:
        log.warning("running CG on a nonsymmetric operator (%s)", p.label)
    op = CountingOperator(p.A)
    trace = IterationTrace(method="CG")
    x, r = _start(p, cfg, op)
    rr = float(r @ r)
    r0 = math.sqrt(rr)
    tol = cfg.tol_rel * r0
    trace.res_norm.append(r0)
    trace.extra["true_res_norm"] = []
    d = r.copy()
    n = 0
    if r0 == 0:
        trace.status = CONVERGED
    while n < cfg.max_iters and trace.status != CONVERGED:
        Ad = op(d)
        dAd = float(d @ Ad)
        if dAd <= 0:
            trace.status = NUMERICAL_ERROR
            trace.message = f"CG breakdown: d'Ad = {dAd:.3e} at n={n}"
            break
        alpha = rr / dAd
        x += alpha * d
        r -= alpha * Ad
        rr_new = float(r @ r)
        n += 1
        trace.alpha.append(alpha)
        trace.res_norm.append(math.sqrt(rr_new))
        if math.sqrt(rr_new) < tol:
            r_true = p.b - op(x)
            true_norm = float(np.linalg.norm(r_true))
            trace.extra["true_res_norm"].append((n, true_norm))
            if true_norm < tol:
                trace.status = CONVERGED
                break
            r = r_true
            rr = true_norm**2
            d = r.copy()
            continue
        d = r + (rr_new / rr) * d
        rr = rr_new
    else:
        if trace.status != CONVERGED:
            trace.status = MAX_ITERS
    trace.iterations_used = n
    trace.matvecs = op.count
    trace.x = x
    return trace


def run_gmres(p: Problem, cfg: Optional[KrylovConfig] = None) -> IterationTrace:
    """GMRES(l): modified Gram-Schmidt Arnoldi, Givens least squares, restart every l steps."""
    cfg = cfg or KrylovConfig()
    l = cfg.restart_l
    if l > p.n:
        raise ValueError(f"restart_l={l} exceeds dimension {p.n}")
    op = CountingOperator(p.A)
    trace = IterationTrace(method=f"GMRES({l})")
    x, r = _start(p, cfg, op)
    beta = float(np.linalg.norm(r))
    tol = cfg.tol_rel * beta
    trace.res_norm.append(beta)
    trace.extra["basis_vectors"] = 0
    trace.extra["restarts"] = []
    n = 0
    status = CONVERGED if beta == 0 else None

    while status is None:
        V = np.zeros((l + 1, p.n))
        trace.extra["basis_vectors"] = max(trace.extra["basis_vectors"], V.shape[0])
        H = np.zeros((l + 1, l))
        cs, sn = np.zeros(l), np.zeros(l)
        s = np.zeros(l + 1)
        s[0] = beta
        V[0] = r / beta
        k = 0
        breakdown = False
        while k < l and n < cfg.max_iters:
            w = op(V[k])
            for i in range(k + 1):
                H[i, k] = float(w @ V[i])
                w -= H[i, k] * V[i]
            H[k + 1, k] = float(np.linalg.norm(w))
            for i in range(k):
                h0, h1 = H[i, k], H[i + 1, k]
                H[i, k] = cs[i] * h0 + sn[i] * h1
                H[i + 1, k] = -sn[i] * h0 + cs[i] * h1
            hnext = H[k + 1, k]
            rad = math.hypot(H[k, k], hnext)
            if rad == 0.0:
                status = NUMERICAL_ERROR
                trace.message = f"singular least-squares system at n={n}"
                break
            cs[k], sn[k] = H[k, k] / rad, hnext / rad
            if hnext > 0.0:
                V[k + 1] = w / hnext
            H[k, k], H[k + 1, k] = rad, 0.0
            s[k + 1] = -sn[k] * s[k]
            s[k] = cs[k] * s[k]
            k += 1
            n += 1
            trace.res_norm.append(abs(s[k]))
            if abs(s[k]) < tol:
                break
            if hnext <= 1e-14 * rad:
                breakdown = True
                break
        if k > 0 and status != NUMERICAL_ERROR:
            R = np.triu(H[:k, :k])
            if np.any(np.abs(np.diag(R)) == 0.0):
                status = NUMERICAL_ERROR
                trace.message = "singular triangular factor"
                break
            y = _back_substitute(R, s[:k])
            x += V[:k].T @ y
        if status == NUMERICAL_ERROR:
            break
        r = p.b - op(x)
        beta = float(np.linalg.norm(r))
        trace.extra["restarts"].append((n, beta))
        if beta < tol:
            status = CONVERGED
        elif n >= cfg.max_iters:
            status = MAX_ITERS
    trace.status = status
    trace.iterations_used = n
    trace.matvecs = op.count
    trace.x = x
    return trace


def _back_substitute(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = len(rhs)
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (rhs[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y
