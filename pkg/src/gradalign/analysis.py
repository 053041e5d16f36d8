"""Spectral post-processing of iteration traces.

Eigen-components, two-subsequence limit extraction and the closed-form
asymptotic limits of the minimal-gradient iteration, plus the verdict report
consumed by ``gradalign verify``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import SpectralModel, project_components
from .problems import Problem, gen_diagonal
from .solver import IterationTrace, SolveConfig, run_gradient
from .steps import StepRule, harmonic, y2_radicand, yuan_formula

INNER_MASS_THRESHOLD = 1e-8
TAIL = 5

__all__ = [
    "SpectralModel", "AsymptoticEstimate", "AlignmentReport", "Verdict", "NotConvergedError",
    "eigen_components", "weighted_masses", "estimate_c", "theorem1_limits", "theorem2_limits",
    "theorem4_limits", "verify_alignment", "estimate_two_subsequence_limit", "run_verification",
    "mg_asymptotics", "mg_verdicts", "alignment_verdicts", "verification_problem", "verdicts_json",
    "format_table", "f_gap_from_components", "a2_series", "y2_series", "radicand_series",
    "grad_ratio_series", "asymptotic_config", "verdict", "MGAsymptotics",
]


class NotConvergedError(RuntimeError):
    """The asymptotic regime has not been reached (or the hypotheses are unmet)."""


@dataclass
class AsymptoticEstimate:
    even_limit: float
    odd_limit: float
    converged: bool
    last_delta: float


@dataclass
class Verdict:
    theorem: str
    quantity: str
    predicted: Optional[float]
    observed: Optional[float]
    rel_error: Optional[float]
    passed: bool
    tol: Optional[float] = None
    note: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _rel(observed: float, predicted: float) -> float:
    return abs(observed - predicted) / max(abs(predicted), np.finfo(float).tiny)


def verdict(theorem: str, quantity: str, predicted: float, observed: float, tol: float,
            note: str = "") -> Verdict:
    err = _rel(observed, predicted)
    return Verdict(theorem, quantity, float(predicted), float(observed), float(err),
                   bool(err <= tol), tol, note)


# --- components -----------------------------------------------------------------------

def eigen_components(trace, sm: SpectralModel, check: bool = True) -> np.ndarray:
    """zeta[n, i] = v_i' g_n for every captured gradient of ``trace``."""
    if isinstance(trace, IterationTrace):
        if not trace.gradients:
            raise ValueError("trace carries no gradients; run with capture_components=True")
        G = np.asarray(trace.gradients)
    else:
        G = np.atleast_2d(np.asarray(trace, dtype=float))
    if not sm.has_basis():
        raise ValueError("eigen-components need eigenvectors or a diagonal problem")
    Z = project_components(G, sm)
    if check and not sm.diagonal:
        recon = Z @ sm.eigenvectors.T
        err = np.linalg.norm(recon - G, axis=1)
        scale = np.linalg.norm(G, axis=1)
        if np.any(err > 1e-10 * np.maximum(scale, np.finfo(float).tiny)):
            raise ValueError("eigenvector reconstruction failed; basis is not orthonormal")
    return Z


def weighted_masses(Z: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """p[n, i] = lam_i zeta_{i,n}^2 / sum_j lam_j zeta_{j,n}^2."""
    w = lam * np.asarray(Z) ** 2
    return w / w.sum(axis=1, keepdims=True)


def f_gap_from_components(Z: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """f(x_n) - f(x_star) = 1/2 g_n' A^{-1} g_n = 1/2 sum zeta^2 / lam."""
    return 0.5 * np.sum(np.asarray(Z) ** 2 / lam, axis=1)


# --- limit extraction -----------------------------------------------------------------

def estimate_two_subsequence_limit(series: Sequence[float], tol: float = 1e-8, offset: int = 0,
                                   tail: int = TAIL) -> AsymptoticEstimate:
    """Even/odd tail means of ``series`` (element k is iteration offset + k).

    Converged iff the last successive same-parity relative differences are <= ``tol``.
    """
    s = np.asarray(series, dtype=float)
    if len(s) < 20:
        raise ValueError(f"series too short for limit extraction ({len(s)} < 20)")
    idx = np.arange(len(s)) + offset
    even, odd = s[idx % 2 == 0], s[idx % 2 == 1]
    deltas = []
    for sub in (even, odd):
        d = abs(sub[-1] - sub[-2]) / max(abs(sub[-1]), np.finfo(float).tiny)
        deltas.append(d)
    last_delta = max(deltas)
    return AsymptoticEstimate(float(np.mean(even[-tail:])), float(np.mean(odd[-tail:])),
                              bool(last_delta <= tol), float(last_delta))


def mg_quotients(trace: IterationTrace) -> np.ndarray:
    return trace.mg_series()


def a2_series(trace: IterationTrace) -> np.ndarray:
    """A2 steplength at n = 1, 2, ... evaluated along the run."""
    mg = trace.mg_series()
    return np.array([harmonic(mg[i - 1], mg[i]) for i in range(1, len(mg))])


def y2_series(trace: IterationTrace) -> np.ndarray:
    mg, gAg = trace.mg_series(), np.asarray(trace.gAg)
    return np.array([yuan_formula(mg[i - 1], mg[i], gAg[i] / gAg[i - 1]) for i in range(1, len(mg))])


def radicand_series(trace: IterationTrace) -> np.ndarray:
    mg, gAg = trace.mg_series(), np.asarray(trace.gAg)
    return np.array([y2_radicand(mg[i - 1], mg[i], gAg[i - 1], gAg[i]) for i in range(1, len(mg))])


def grad_ratio_series(trace: IterationTrace) -> np.ndarray:
    """||g_{n+1}||^2 / ||g_n||^2 for n = 0, 1, ..."""
    r = np.asarray(trace.res_norm)
    return (r[1:] / r[:-1]) ** 2


# --- closed forms ---------------------------------------------------------------------

def estimate_c(trace, sm: SpectralModel, threshold: float = INNER_MASS_THRESHOLD,
               tail: int = TAIL) -> float:
    """c = sqrt(p_N / p_1) over the last even iterates of an MG run."""
    Z = trace if isinstance(trace, np.ndarray) else eigen_components(trace, sm)
    lam = sm.eigenvalues
    if Z[0, 0] == 0 or Z[0, -1] == 0:
        raise NotConvergedError("zeta_{1,0} and zeta_{N,0} must both be nonzero")
    P = weighted_masses(Z, lam)
    even = np.arange(0, len(P), 2)[-tail:]
    inner = P[even][:, 1:-1].sum(axis=1)
    if np.any(inner >= threshold):
        raise NotConvergedError(
            f"inner mass {inner.max():.3e} >= {threshold:.1e} at even iterates {even.tolist()}")
    return float(np.mean(np.sqrt(P[even, -1] / P[even, 0])))


def theorem1_limits(sm, c: float) -> dict:
    """Two-cycle limits of the MG iteration, parametrized by c."""
    lam1, kappa = _lam1_kappa(sm)
    c2 = c * c
    return {
        "alpha_even": (1 + c2) / (lam1 * (1 + c2 * kappa)),
        "alpha_odd": (1 + c2) / (lam1 * (c2 + kappa)),
        "grad_ratio": c2 * (kappa - 1) ** 2 / ((c2 + kappa) * (1 + c2 * kappa)),
        "gAg_ratio_even": c2 * (kappa - 1) ** 2 / (1 + c2 * kappa) ** 2,
        "gAg_ratio_odd": c2 * (kappa - 1) ** 2 / (c2 + kappa) ** 2,
    }


def theorem2_limits(kappa: float, c: float) -> dict:
    c2, k2 = c * c, kappa * kappa
    even = c2 * (1 + c2 * k2) * (kappa - 1) ** 2 / ((c2 + k2) * (1 + c2 * kappa) ** 2)
    odd = c2 * (c2 + k2) * (kappa - 1) ** 2 / ((1 + c2 * k2) * (c2 + kappa) ** 2)
    return {"f_ratio_even": even, "f_ratio_odd": odd, "product": even * odd}


def theorem4_limits(sm) -> dict:
    lam1, kappa = _lam1_kappa(sm)
    lamN = lam1 * kappa
    return {"a2_limit": 1.0 / (lam1 + lamN), "y2_limit": 1.0 / lamN, "radicand_limit": lam1 * lamN}


def _lam1_kappa(sm) -> tuple[float, float]:
    if isinstance(sm, SpectralModel):
        return sm.lam_min, sm.kappa
    lam1, kappa = sm
    return float(lam1), float(kappa)


# --- constant-step alignment ----------------------------------------------------------

@dataclass
class AlignmentReport:
    alpha_hat: float
    alpha_critical: float
    equality: bool
    phi: np.ndarray
    ratios: np.ndarray  # ratios[n, i] = zeta_{i,n} / zeta_{1,n}
    predicted_final: np.ndarray
    max_deviation: float
    decay_rate: Optional[float] = None
    modes: list = field(default_factory=list)

    @property
    def inner_max(self) -> np.ndarray:
        """max_{i>=2} |ratio| per iteration (strict case) or max over 2..N-1 (equality)."""
        cols = slice(1, -1) if self.equality else slice(1, None)
        sub = np.abs(self.ratios[:, cols])
        return sub.max(axis=1) if sub.shape[1] else np.zeros(len(self.ratios))


def verify_alignment(components, sm: SpectralModel, alpha_hat: float,
                     eq_rtol: float = 1e-12) -> AlignmentReport:
    """Classify zeta_{i,n}/zeta_{1,n} under a constant steplength alpha_hat <= 2/(lam_1+lam_N)."""
    Z = components.components if isinstance(components, IterationTrace) else np.asarray(components)
    if Z is None:
        raise ValueError("trace carries no eigen-components")
    lam = sm.eigenvalues
    crit = 2.0 / (lam[0] + lam[-1])
    if alpha_hat > crit * (1 + eq_rtol):
        raise ValueError(f"alpha_hat={alpha_hat:g} exceeds 2/(lam_1+lam_N)={crit:g}; outside theorem scope")
    if Z[0, 0] == 0:
        raise ValueError("zeta_{1,0} must be nonzero")
    equality = abs(alpha_hat - crit) <= eq_rtol * crit
    phi = (1 - alpha_hat * lam) / (1 - alpha_hat * lam[0])
    ratios = Z / Z[:, :1]
    n_last = len(Z) - 1
    predicted = np.zeros(len(lam))
    predicted[0] = 1.0
    modes = ["unit"] + ["vanishing"] * (len(lam) - 1)
    if equality:
        predicted[-1] = Z[0, -1] / Z[0, 0] * (-1) ** n_last
        modes[-1] = "alternating"
    max_dev = float(np.max(np.abs(ratios[-1] - predicted)))
    decay = None
    if not equality and len(lam) > 1:
        tail = np.abs(ratios[:, 1:]).max(axis=1)
        ok = tail > 0
        k = np.nonzero(ok)[0]
        if len(k) >= 3:
            k = k[-min(len(k), 20):]
            slope = np.polyfit(k, np.log(tail[k]), 1)[0]
            decay = float(math.exp(slope))
    return AlignmentReport(alpha_hat, crit, bool(equality), phi, ratios, predicted, max_dev,
                           decay, modes)


# --- verification driver --------------------------------------------------------------

def verification_problem(n: int = 10, lam1: float = 1.0, lamN: float = 10.0, seed: int = 0) -> Problem:
    """Diagonal problem, log-spaced spectrum from lam1 to lamN."""
    lam = np.logspace(np.log10(lam1), np.log10(lamN), n) if n > 1 else np.array([lam1])
    lam[0], lam[-1] = lam1, lamN
    return gen_diagonal(lam, seed=seed, label=f"verify-diag-n{n}")


def asymptotic_config(iters: int) -> SolveConfig:
    # no refresh: A x - b rounding would swamp components that are many decades below g_0
    return SolveConfig(tol_rel=1e-300, max_iters=iters, recompute_period=iters + 1,
                       capture_components=True)


@dataclass
class MGAsymptotics:
    """Everything the MG theorem checks need from one run."""

    trace: IterationTrace
    sm: SpectralModel
    c: float
    alpha: AsymptoticEstimate
    a2: AsymptoticEstimate
    y2: AsymptoticEstimate
    radicand: AsymptoticEstimate
    grad_ratio: AsymptoticEstimate
    gAg_ratio: AsymptoticEstimate
    f_two_step: AsymptoticEstimate
    f_ratio: AsymptoticEstimate
    norm_ratio: AsymptoticEstimate


def mg_asymptotics(p: Problem, iters: int = 300, tol: float = 1e-8) -> MGAsymptotics:
    sm = p.spectrum
    trace = run_gradient(p, StepRule("MG"), asymptotic_config(iters))
    if trace.iterations_used < 20:
        raise NotConvergedError(f"MG stopped after {trace.iterations_used} iterations ({trace.status})")
    Z = eigen_components(trace, sm)
    c = estimate_c(Z, sm)
    lam = sm.eigenvalues
    f = f_gap_from_components(Z, lam)
    r = np.asarray(trace.res_norm)
    gAg = np.asarray(trace.gAg)
    est = estimate_two_subsequence_limit
    return MGAsymptotics(
        trace=trace, sm=sm, c=c,
        alpha=est(trace.alpha, tol),
        a2=est(a2_series(trace), tol, offset=1),
        y2=est(y2_series(trace), tol, offset=1),
        radicand=est(radicand_series(trace), tol, offset=1),
        grad_ratio=est(grad_ratio_series(trace), tol),
        gAg_ratio=est(gAg[1:] / gAg[:-1], tol),
        f_two_step=est(f[2:] / f[:-2], tol),
        f_ratio=est(f[1:] / f[:-1], tol),
        norm_ratio=est(r[1:] / r[:-1], tol),
    )


def mg_verdicts(m: MGAsymptotics, tols: Optional[dict] = None) -> list[Verdict]:
    t = {"t1": 1e-6, "t1c": 1e-5, "t2": 1e-4, "t4": 1e-6, "t4r": 1e-5}
    t.update(tols or {})
    sm = m.sm
    lam1, lamN = sm.lam_min, sm.lam_max
    t1 = theorem1_limits(sm, m.c)
    t2 = theorem2_limits(sm.kappa, m.c)
    t4 = theorem4_limits(sm)
    rows = [
        verdict("Theorem 1", "1/alpha_even + 1/alpha_odd", lam1 + lamN,
                1 / m.alpha.even_limit + 1 / m.alpha.odd_limit, t["t1"], "c-free"),
        verdict("Theorem 1", "alpha_even", t1["alpha_even"], m.alpha.even_limit, t["t1"], "c estimated"),
        verdict("Theorem 1", "alpha_odd", t1["alpha_odd"], m.alpha.odd_limit, t["t1"], "c estimated"),
        verdict("Theorem 1", "grad_ratio (even n)", t1["grad_ratio"], m.grad_ratio.even_limit, t["t1c"]),
        verdict("Theorem 1", "grad_ratio (odd n)", t1["grad_ratio"], m.grad_ratio.odd_limit, t["t1c"]),
        verdict("Theorem 1", "gAg_ratio_even", t1["gAg_ratio_even"], m.gAg_ratio.even_limit, t["t1c"]),
        verdict("Theorem 1", "gAg_ratio_odd", t1["gAg_ratio_odd"], m.gAg_ratio.odd_limit, t["t1c"]),
        verdict("Theorem 2", "f two-step ratio vs norm_ratio^4", m.norm_ratio.even_limit ** 4,
                m.f_two_step.even_limit, t["t2"], "both sides observed"),
        verdict("Theorem 2", "f_ratio_even", t2["f_ratio_even"], m.f_ratio.even_limit, t["t2"]),
        verdict("Theorem 2", "f_ratio_odd", t2["f_ratio_odd"], m.f_ratio.odd_limit, t["t2"]),
        verdict("Theorem 4", "A2 limit", t4["a2_limit"], m.a2.odd_limit, t["t4"]),
        verdict("Theorem 4", "Y2 limit", t4["y2_limit"], m.y2.odd_limit, t["t4"]),
        verdict("Theorem 4", "radicand limit", t4["radicand_limit"], m.radicand.odd_limit, t["t4r"]),
    ]
    for est, name in ((m.a2, "A2"), (m.y2, "Y2"), (m.radicand, "radicand")):
        # both parities must agree for a single limit
        other = verdict("Theorem 4", f"{name} limit (other parity)",
                        {"A2": t4["a2_limit"], "Y2": t4["y2_limit"]}.get(name, t4["radicand_limit"]),
                        est.even_limit, t["t4r"] if name == "radicand" else t["t4"])
        rows.append(other)
    return rows


def alignment_verdicts(lam=(1.0, 2.0, 3.0), steps_eq: int = 100, steps_strict: int = 200,
                       shrink: float = 0.8, x_star=None) -> list[Verdict]:
    p = gen_diagonal(lam, x_star=x_star if x_star is not None else np.ones(len(lam)),
                     label="alignment")
    sm = p.spectrum
    crit = 2.0 / (sm.lam_min + sm.lam_max)
    rows = []

    tr = run_gradient(p, StepRule("CONST", const_alpha=crit), asymptotic_config(steps_eq))
    rep = verify_alignment(tr, sm, crit)
    if len(lam) > 2:
        mid = float(np.max(np.abs(rep.ratios[1:, 1:-1])))
        rows.append(Verdict("Theorem 3", "inner ratios after one step (equality)", 0.0, mid, mid,
                            mid <= 1e-15, 1e-15))
    mag = np.abs(rep.ratios[:, -1])
    drift = float(np.max(np.abs(mag - mag[0])))
    rows.append(Verdict("Theorem 3", "alternating-mode magnitude drift", 0.0, drift, drift,
                        drift < 1e-10, 1e-10))
    signs = np.sign(rep.ratios[:, -1])
    alternates = bool(np.all(signs[1:] == -signs[:-1]))
    rows.append(Verdict("Theorem 3", "alternating sign", 1.0, float(alternates), float(not alternates),
                        alternates, 0.0))

    a = shrink * crit
    tr = run_gradient(p, StepRule("CONST", const_alpha=a), asymptotic_config(steps_strict))
    rep = verify_alignment(tr, sm, a)
    inner = rep.inner_max
    below = np.nonzero(inner < 1e-8)[0]
    first = int(below[0]) if len(below) else -1
    rows.append(Verdict("Theorem 3", "inner ratios < 1e-8 (strict)", float(steps_strict),
                        float(first), None, bool(len(below)) and first <= steps_strict, None,
                        f"first reached at n={first}"))
    phi_max = float(np.max(np.abs(rep.phi[1:])))
    if rep.decay_rate is not None:
        rows.append(Verdict("Theorem 3", "geometric decay rate", phi_max, rep.decay_rate,
                            abs(rep.decay_rate - phi_max), abs(rep.decay_rate - phi_max) <= 1e-3, 1e-3))
    return rows


def run_verification(n: int = 10, lam1: float = 1.0, lamN: float = 10.0, iters: int = 300,
                     seed: int = 0) -> list[Verdict]:
    if lamN / lam1 <= 1.0 or n < 2:
        return [Verdict("Theorems 1-4", "all", None, None, None, True, None,
                        "skipped: kappa = 1, MG terminates in one step")]
    p = verification_problem(n, lam1, lamN, seed)
    rows = mg_verdicts(mg_asymptotics(p, iters))
    rows += alignment_verdicts()
    return rows


def verdicts_json(rows: list[Verdict]) -> str:
    return json.dumps([r.to_json() for r in rows], indent=2)


def format_table(rows: list[Verdict]) -> str:
    lines = [f"{'theorem':<10} {'quantity':<38} {'predicted':>14} {'observed':>14} {'rel_err':>10}  pass"]
    for r in rows:
        fmt = lambda v: "" if v is None else f"{v:.8g}"
        lines.append(f"{r.theorem:<10} {r.quantity:<38} {fmt(r.predicted):>14} {fmt(r.observed):>14} "
                     f"{fmt(r.rel_error):>10}  {'PASS' if r.passed else 'FAIL'}"
                     + (f"  ({r.note})" if r.note else ""))
    return "\n".join(lines)
