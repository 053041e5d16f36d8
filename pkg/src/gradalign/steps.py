"""Steplength rules.

Every rule is a pure function of a :class:`StepState`, which the solver
refreshes once per iteration from the quadratic forms of the current and
previous gradients. The cyclic schedules (SDA, SDC, AOA, MGA, MGC) take
``d1`` base steps, one auxiliary step, then hold that auxiliary value for
``d2 - 1`` further iterations.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .linalg import QuadForms

log = logging.getLogger(__name__)

KINDS = ("SD", "MG", "AO", "BB", "BB2", "DY", "SDA", "SDC", "AOA", "MGA", "MGC", "DGMR", "CONST")
SCHEDULES = ("SDA", "SDC", "AOA", "MGA", "MGC")
DGMR_RHO = (0, 1, 2)
DGMR_UPSILON = (1, 2)


class StepError(ArithmeticError):
    """A steplength could not be formed from the current state."""


class IndefiniteOperatorError(StepError):
    pass


class SingularOperatorError(StepError):
    pass


class SequencingError(StepError):
    pass


class StepConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DGMRParams:
    rho_schedule: tuple = (0,)
    tau_lag: int = 0
    upsilon: int = 1

    def __post_init__(self):
        rho = tuple(self.rho_schedule)
        object.__setattr__(self, "rho_schedule", rho)
        if not rho:
            raise StepConfigError("rho_schedule must be nonempty")
        for r in rho:
            if r < 0:
                raise StepConfigError(f"rho must be >= 0, got {r}")
            if r not in DGMR_RHO:
                raise StepConfigError(f"unsupported rho={r}; supported: {DGMR_RHO}")
        if self.upsilon <= 0:
            raise StepConfigError(f"upsilon must be > 0, got {self.upsilon}")
        if self.upsilon not in DGMR_UPSILON:
            raise StepConfigError(f"unsupported upsilon={self.upsilon}; supported: {DGMR_UPSILON}")
        if self.tau_lag < 0:
            raise StepConfigError("tau_lag must be >= 0")

    @property
    def max_power(self) -> int:
        return max(self.rho_schedule) + self.upsilon


@dataclass(frozen=True)
class StepRule:
    kind: str
    d1: int = 4
    d2: int = 4
    theta: float = 0.5
    const_alpha: Optional[float] = None
    dgmr: Optional[DGMRParams] = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise StepConfigError(f"unknown method '{self.kind}'; expected one of {', '.join(KINDS)}")
        if kind in SCHEDULES and (self.d1 < 1 or self.d2 < 1):
            raise StepConfigError(f"{kind} requires d1 >= 1 and d2 >= 1")
        if kind == "AOA" and not 0 < self.theta < 1:
            raise StepConfigError(f"AOA requires 0 < theta < 1, got {self.theta}")
        if kind == "CONST" and not (self.const_alpha and self.const_alpha > 0):
            raise StepConfigError("CONST requires a positive const_alpha")
        if kind == "DGMR" and self.dgmr is None:
            object.__setattr__(self, "dgmr", DGMRParams())

    @property
    def period(self) -> int:
        return self.d1 + self.d2

    @property
    def max_power(self) -> int:
        """Highest k for which g'A^k g is needed."""
        if self.kind == "DGMR":
            return self.dgmr.max_power
        return 2

    @property
    def history_depth(self) -> int:
        return self.dgmr.tau_lag + 1 if self.kind == "DGMR" else 1

    @classmethod
    def from_dict(cls, spec: dict) -> "StepRule":
        spec = dict(spec)
        kind = spec.pop("method", None) or spec.pop("kind")
        dgmr = None
        if str(kind).upper() == "DGMR":
            rho = spec.pop("rho", 0)
            rho = tuple(rho) if isinstance(rho, (list, tuple)) else (rho,)
            dgmr = DGMRParams(tuple(int(r) for r in rho), int(spec.pop("tau", 0)),
                              int(spec.pop("upsilon", 1)))
        else:
            for k in ("rho", "tau", "upsilon"):
                spec.pop(k, None)
        alpha = spec.pop("alpha", None)
        if alpha is None:
            alpha = spec.pop("const_alpha", None)
        kwargs = {k: spec[k] for k in ("d1", "d2", "theta") if spec.get(k) is not None}
        unknown = set(spec) - {"d1", "d2", "theta"}
        if unknown:
            raise StepConfigError(f"unknown step keys: {sorted(unknown)}")
        return cls(str(kind), const_alpha=alpha, dgmr=dgmr, **kwargs)

    def to_dict(self) -> dict:
        out = {"method": self.kind}
        if self.kind in SCHEDULES:
            out.update(d1=self.d1, d2=self.d2)
        if self.kind == "AOA":
            out["theta"] = self.theta
        if self.kind == "CONST":
            out["alpha"] = self.const_alpha
        if self.kind == "DGMR":
            out.update(rho=list(self.dgmr.rho_schedule), tau=self.dgmr.tau_lag,
                       upsilon=self.dgmr.upsilon)
        return out


@dataclass
class StepState:
    n: int
    qf_cur: QuadForms
    qf_prev: Optional[QuadForms] = None
    alpha_prev: Optional[float] = None
    # g'A^k g moment vectors of recent gradients, newest last (DGMR only)
    moments: deque = field(default_factory=lambda: deque(maxlen=1))

    def advance(self, qf: QuadForms, alpha: float, moments: Optional[np.ndarray] = None) -> "StepState":
        self.n += 1
        self.qf_prev, self.qf_cur = self.qf_cur, qf
        self.alpha_prev = alpha
        if moments is not None:
            self.moments.append(moments)
        return self

    @property
    def sd_cur(self) -> float:
        return _sd(self.qf_cur)

    @property
    def sd_prev(self) -> float:
        return _sd(self._prev())

    @property
    def mg_cur(self) -> float:
        return _mg(self.qf_cur)

    @property
    def mg_prev(self) -> float:
        return _mg(self._prev())

    @property
    def ao_cur(self) -> float:
        return _ao(self.qf_cur)

    @property
    def gAg_cur(self) -> float:
        return self.qf_cur.gAg

    @property
    def gAg_prev(self) -> float:
        return self._prev().gAg

    def _prev(self) -> QuadForms:
        if self.qf_prev is None:
            raise SequencingError(f"no previous gradient at n={self.n}")
        return self.qf_prev


def _sd(q: QuadForms) -> float:
    if q.gAg <= 0:
        raise IndefiniteOperatorError(f"g'Ag = {q.gAg:.3e} <= 0; operator is not positive definite")
    return q.gg / q.gAg


def _mg(q: QuadForms) -> float:
    if q.AgAg <= 0:
        raise SingularOperatorError("Ag = 0 with g != 0")
    return q.gAg / q.AgAg


def _ao(q: QuadForms) -> float:
    if q.norm_Ag <= 0:
        raise SingularOperatorError("Ag = 0 with g != 0")
    return q.norm_g / q.norm_Ag


def step_sd(s: StepState) -> float:
    return s.sd_cur


def step_mg(s: StepState) -> float:
    return s.mg_cur


def step_ao(s: StepState) -> float:
    return s.ao_cur


def step_bb(s: StepState) -> float:
    return s.sd_cur if s.qf_prev is None else s.sd_prev


def step_bb2(s: StepState) -> float:
    return s.mg_cur if s.qf_prev is None else s.mg_prev


def harmonic(prev: float, cur: float) -> float:
    return 1.0 / (1.0 / prev + 1.0 / cur)


def yuan_formula(prev: float, cur: float, ratio: float) -> float:
    """2 / (sqrt((1/prev - 1/cur)^2 + 4*ratio/prev^2) + 1/prev + 1/cur).

    ``ratio`` is ||g_n||^2/||g_{n-1}||^2 for Yuan and g_n'Ag_n/g_{n-1}'Ag_{n-1} for Y2.
    """
    ip, ic = 1.0 / prev, 1.0 / cur
    radicand = (ip - ic) ** 2 + 4.0 * ratio * ip * ip
    if radicand < 0:
        log.warning("Yuan-type radicand %.3e < 0 clamped to 0", radicand)
        radicand = 0.0
    return 2.0 / (math.sqrt(radicand) + ip + ic)


def step_yuan(s: StepState) -> float:
    q, qp = s.qf_cur, s._prev()
    return yuan_formula(s.sd_prev, s.sd_cur, q.gg / qp.gg)


def step_a(s: StepState) -> float:
    return harmonic(s.sd_prev, s.sd_cur)


def step_a2(s: StepState) -> float:
    return harmonic(s.mg_prev, s.mg_cur)


def y2_radicand(mg_prev: float, mg_cur: float, gAg_prev: float, gAg_cur: float) -> float:
    """1/(mg_prev*mg_cur) - gAg_cur/(mg_prev^2 * gAg_prev); tends to lam_1*lam_N along MG."""
    return 1.0 / (mg_prev * mg_cur) - gAg_cur / (mg_prev * mg_prev * gAg_prev)


def step_y2(s: StepState) -> float:
    return yuan_formula(s.mg_prev, s.mg_cur, s.gAg_cur / s.gAg_prev)


def step_dgmr(rule: StepRule, history, n: int) -> float:
    """((g_t'A^rho g_t)/(g_t'A^(rho+ups) g_t))^(1/ups) with t = max(0, n - tau_lag).

    ``history`` holds moment vectors m[k] = g'A^k g for the most recent gradients,
    newest last; its oldest entry stands in for g_0 while n < tau_lag.
    """
    p = rule.dgmr
    if p is None:
        raise StepConfigError("step_dgmr needs DGMR parameters")
    if not history:
        raise SequencingError("empty DGMR history")
    rho = p.rho_schedule[n % len(p.rho_schedule)]
    lag = min(p.tau_lag, n, len(history) - 1)
    m = history[-1 - lag]
    num, den = m[rho], m[rho + p.upsilon]
    if not (np.isfinite(num) and np.isfinite(den)):
        raise StepConfigError(f"moment g'A^{rho + p.upsilon}g not available")
    if den <= 0 or num <= 0:
        raise IndefiniteOperatorError("nonpositive DGMR moment")
    return (num / den) ** (1.0 / p.upsilon)


_BASE = {"SDA": step_sd, "SDC": step_sd, "AOA": step_ao, "MGA": step_mg, "MGC": step_mg}
_AUX = {"SDA": step_a, "SDC": step_yuan, "MGA": step_a2, "MGC": step_y2}
_SIMPLE = {"SD": step_sd, "MG": step_mg, "AO": step_ao, "BB": step_bb, "BB2": step_bb2}


def phase(rule: StepRule, n: int) -> str:
    """'base', 'aux' or 'hold' for schedule kinds."""
    r = n % rule.period
    if r < rule.d1:
        return "base"
    return "aux" if r == rule.d1 else "hold"


def schedule_next(rule: StepRule, s: StepState) -> float:
    kind = rule.kind
    if kind in _SIMPLE:
        return _SIMPLE[kind](s)
    if kind == "CONST":
        return rule.const_alpha
    if kind == "DY":
        return step_sd(s) if s.n % 4 in (0, 1) else step_yuan(s)
    if kind == "DGMR":
        return step_dgmr(rule, s.moments, s.n)
    ph = phase(rule, s.n)
    if ph == "base":
        return _BASE[kind](s)
    if ph == "aux":
        if kind == "AOA":
            return rule.theta * step_ao(s)
        return _AUX[kind](s)
    return s.alpha_prev
