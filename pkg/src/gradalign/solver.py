"""Gradient iteration driver: x_{n+1} = x_n - alpha_n g_n with g_{n+1} = g_n - alpha_n A g_n."""

from __future__ import annotations

import csv
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .linalg import SparseMatrix, project_components, quad_forms, spmv
from .problems import Problem
from .steps import StepError, StepRule, StepState, schedule_next

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITERS = "max_iters"
NUMERICAL_ERROR = "numerical_error"


def default_max_iters(kappa: Optional[float]) -> int:
    if kappa is not None and kappa <= 1e4:
        return 10_000
    return 100_000


@dataclass
class SolveConfig:
    tol_rel: float = 1e-6
    max_iters: Optional[int] = None
    recompute_period: int = 50
    x0: Optional[np.ndarray] = None
    capture_components: bool = False
    capture_iterates: bool = False

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise ValueError("tol_rel must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.recompute_period < 1:
            raise ValueError("recompute_period must be >= 1")


class CountingOperator:
    """Wraps a SparseMatrix and counts matvecs."""

    def __init__(self, A: SparseMatrix):
        self.A = A
        self.count = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.count += 1
        return spmv(self.A, x)


@dataclass
class IterationTrace:
    method: str
    alpha: list = field(default_factory=list)
    res_norm: list = field(default_factory=list)
    gAg: list = field(default_factory=list)
    AgAg: list = field(default_factory=list)
    f_gap: list = field(default_factory=list)
    gradients: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    components: Optional[np.ndarray] = None
    status: str = MAX_ITERS
    iterations_used: int = 0
    matvecs: int = 0
    refresh_drift: list = field(default_factory=list)
    message: str = ""
    x: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def final_relres(self) -> float:
        if not self.res_norm or self.res_norm[0] == 0:
            return 0.0
        return self.res_norm[-1] / self.res_norm[0]

    def arrays(self) -> dict:
        return {k: np.asarray(getattr(self, k), dtype=float)
                for k in ("alpha", "res_norm", "gAg", "AgAg", "f_gap")}

    def sd_series(self) -> np.ndarray:
        r = np.asarray(self.res_norm[: len(self.gAg)])
        return r**2 / np.asarray(self.gAg)

    def mg_series(self) -> np.ndarray:
        return np.asarray(self.gAg) / np.asarray(self.AgAg)

    def ao_series(self) -> np.ndarray:
        r = np.asarray(self.res_norm[: len(self.AgAg)])
        return r / np.sqrt(np.asarray(self.AgAg))

    def write_csv(self, path) -> None:
        rows = len(self.res_norm)
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "alpha", "res_norm", "gAg", "f_gap"])
            for n in range(rows):
                w.writerow([n, _fmt(self.alpha, n), _fmt(self.res_norm, n),
                            _fmt(self.gAg, n), _fmt(self.f_gap, n)])

    def sidecar(self) -> dict:
        return {"method": self.method, "status": self.status,
                "iterations_used": self.iterations_used, "final_relres": self.final_relres}

    def write_sidecar(self, path) -> None:
        Path(path).write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")


def _fmt(seq, n) -> str:
    if n >= len(seq) or seq[n] is None:
        return ""
    return format(float(seq[n]), ".17g")


def eval_f_gap(p: Problem, x) -> float:
    """f(x) - f(x_star) = 1/2 (x_star - x)' A (x_star - x)."""
    if p.x_star is None:
        raise ValueError("f-gap needs a problem with known x_star")
    e = p.x_star - np.asarray(x, dtype=float)
    return 0.5 * float(e @ spmv(p.A, e))


def _moments(op: CountingOperator, g: np.ndarray, w: np.ndarray, q, max_power: int) -> np.ndarray:
    m = np.full(5, np.nan)
    m[0], m[1], m[2] = q.gg, q.gAg, q.AgAg
    if max_power > 2:
        z = op(w)
        m[3], m[4] = float(w @ z), float(z @ z)
    return m


def run_gradient(p: Problem, rule: StepRule, cfg: Optional[SolveConfig] = None) -> IterationTrace:
    cfg = cfg or SolveConfig()
    A = p.A
    max_iters = cfg.max_iters or default_max_iters(p.kappa)
    op = CountingOperator(A)
    trace = IterationTrace(method=rule.kind)

    x = np.zeros(A.n) if cfg.x0 is None else np.array(cfg.x0, dtype=float)
    if x.shape != (A.n,) or p.b.shape != (A.n,):
        raise ValueError("dimension mismatch between operator, b and x0")
    g = -p.b.copy() if cfg.x0 is None else op(x) - p.b
    x_star = p.x_star
    tol = None
    need_moments = rule.kind == "DGMR"
    state: Optional[StepState] = None

    n = 0
    while True:
        w = op(g)
        q = quad_forms(A, g, w)
        trace.res_norm.append(q.norm_g)
        trace.gAg.append(q.gAg)
        trace.AgAg.append(q.AgAg)
        if x_star is not None:
            # A e = -g, so 1/2 e'Ae = -1/2 e'g without another matvec
            trace.f_gap.append(-0.5 * float((x_star - x) @ g))
        if cfg.capture_components:
            trace.gradients.append(g.copy())
        if cfg.capture_iterates:
            trace.iterates.append(x.copy())
        if tol is None:
            tol = cfg.tol_rel * q.norm_g
        if q.norm_g < tol or q.norm_g == 0.0:
            trace.status = CONVERGED
            break
        if n >= max_iters:
            trace.status = MAX_ITERS
            break

        mom = _moments(op, g, w, q, rule.max_power) if need_moments else None
        if state is None:
            state = StepState(0, q, moments=deque(maxlen=rule.history_depth))
            if mom is not None:
                state.moments.append(mom)
        else:
            state.advance(q, trace.alpha[-1], mom)
        try:
            alpha = schedule_next(rule, state)
        except StepError as exc:
            trace.status = NUMERICAL_ERROR
            trace.message = str(exc)
            log.warning("%s aborted at n=%d: %s", rule.kind, n, exc)
            break
        if not np.isfinite(alpha):
            trace.status = NUMERICAL_ERROR
            trace.message = f"non-finite steplength at n={n}"
            break
        trace.alpha.append(alpha)

        x -= alpha * g
        g -= alpha * w
        n += 1
        if n % cfg.recompute_period == 0:
            g_true = op(x) - p.b
            trace.refresh_drift.append(float(np.linalg.norm(g - g_true)))
            g = g_true

    trace.iterations_used = n
    trace.matvecs = op.count
    trace.x = x
    if cfg.capture_components and p.spectrum is not None and p.spectrum.has_basis():
        trace.components = project_components(trace.gradients, p.spectrum)
    return trace
