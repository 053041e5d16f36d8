"""Command-line experiment runner.

    gradalign solve  --problem random --n 100 --kappa 1e3 --method MGC --seed 7 --out runs/
    gradalign table1 --kappas 1e2,1e4 --sizes 200 --reps 10 --out runs/
    gradalign sweep  --axis theta --method AOA --n 100 --kappa 1e2 --out runs/
    gradalign verify --out runs/

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .krylov import KrylovConfig, run_cg, run_gmres
from .linalg import MatrixFormatError
from .problems import Problem, from_matrix_market, gen_bvp, gen_perturbed, gen_random_spd, unit_scaled
from .solver import SolveConfig, run_gradient
from .steps import SCHEDULES, StepConfigError, StepRule

log = logging.getLogger("gradalign")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
FAMILIES = ("random", "bvp", "mm", "perturbed")
KRYLOV = ("CG", "GMRES")
TABLE1_METHODS = ("SDA", "SDC", "AOA", "MGA", "MGC")
TABLE1_KAPPAS = (1e2, 1e3, 1e4, 1e5)
TABLE1_SIZES = (200, 400, 600, 800, 1000)


class UsageError(Exception):
    pass


@dataclass
class ProblemSpec:
    family: str = "random"
    n: int = 100
    kappa: float = 1e2
    seed: int = 0
    delta: float = 1e-4
    path: Optional[str] = None
    rotate: bool = False

    def build(self, seed: Optional[int] = None) -> Problem:
        seed = self.seed if seed is None else seed
        if self.family == "random":
            return gen_random_spd(self.n, self.kappa, seed, self.rotate)
        if self.family == "bvp":
            return gen_bvp(self.n, seed)
        if self.family == "perturbed":
            base = unit_scaled(gen_random_spd(self.n, self.kappa, seed, self.rotate))
            return gen_perturbed(base, self.delta, seed)
        if self.family == "mm":
            if not self.path:
                raise UsageError("--problem mm needs --path")
            return from_matrix_market(self.path, seed)
        raise UsageError(f"unknown problem family '{self.family}'")


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    methods: list = field(default_factory=lambda: [{"method": "MGC"}])
    tol_rel: float = 1e-6
    max_iters: Optional[int] = None
    repetitions: int = 1
    output_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        for m in self.methods:
            method_label(m)  # resolvable names only

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        prob = ProblemSpec(**raw.pop("problem", {}))
        solve = raw.pop("solve", {})
        methods = [m if isinstance(m, dict) else {"method": m} for m in raw.pop("methods", ["MGC"])]
        return cls(problem=prob, methods=methods, tol_rel=solve.get("tol_rel", 1e-6),
                   max_iters=solve.get("max_iters"), **raw)


def method_label(spec: dict) -> str:
    name = str(spec.get("method", "")).upper()
    if name in KRYLOV:
        return f"GMRES{spec.get('restart_l', 20)}" if name == "GMRES" else "CG"
    try:
        rule = StepRule.from_dict({k: v for k, v in spec.items() if k != "restart_l"})
    except StepConfigError as exc:
        raise UsageError(str(exc)) from None
    if rule.kind in SCHEDULES:
        return f"{rule.kind}({rule.d1},{rule.d2})" + (f"t{rule.theta:g}" if rule.kind == "AOA" else "")
    return rule.kind


def run_method(p: Problem, spec: dict, tol_rel: float, max_iters: Optional[int]):
    name = str(spec["method"]).upper()
    if name in KRYLOV:
        kcfg = KrylovConfig(tol_rel=tol_rel, max_iters=max_iters or 10_000,
                            restart_l=int(spec.get("restart_l", 20)))
        return run_cg(p, kcfg) if name == "CG" else run_gmres(p, kcfg)
    rule = StepRule.from_dict({k: v for k, v in spec.items() if k != "restart_l"})
    return run_gradient(p, rule, SolveConfig(tol_rel=tol_rel, max_iters=max_iters))


def _task(args):
    prob, spec, tol_rel, max_iters, seed = args
    trace = run_method(prob.build(seed), spec, tol_rel, max_iters)
    trace.gradients, trace.iterates = [], []
    return trace


def run_tasks(tasks: list, workers: int = 1) -> list:
    """Run tasks, returning traces in task order regardless of scheduling."""
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# --- commands -------------------------------------------------------------------------

def cmd_solve(cfg: ExperimentConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks, names = [], []
    for rep in range(cfg.repetitions):
        seed = cfg.problem.seed + rep
        for spec in cfg.methods:
            tasks.append((cfg.problem, spec, cfg.tol_rel, cfg.max_iters, seed))
            names.append(f"{cfg.problem.family}-n{cfg.problem.n}-s{seed}__{_slug(method_label(spec))}")
    traces = run_tasks(tasks, cfg.workers)
    ok = True
    for name, tr in zip(names, traces):
        tr.write_csv(out / f"{name}.csv")
        tr.write_sidecar(out / f"{name}.json")
        ok &= tr.converged
        print(f"{name:<48} {tr.status:<16} iters={tr.iterations_used:<7} relres={tr.final_relres:.3e}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def table1_rows(kappas, sizes, methods, reps: int, base_seed: int = 0, d1: int = 4, d2: int = 4,
                theta: float = 0.5, tol_rel: float = 1e-6, max_iters: Optional[int] = None,
                workers: int = 1) -> list[dict]:
    for m in methods:
        if m.upper() not in TABLE1_METHODS:
            raise UsageError(f"table1 methods must be among {TABLE1_METHODS}, got {m}")
    tasks, keys = [], []
    for kappa in kappas:
        for n in sizes:
            prob = ProblemSpec("random", int(n), float(kappa))
            for m in methods:
                spec = {"method": m.upper(), "d1": d1, "d2": d2, "theta": theta}
                for r in range(reps):
                    tasks.append((prob, spec, tol_rel, max_iters, base_seed + r))
                    keys.append((float(kappa), int(n), m.upper()))
    traces = run_tasks(tasks, workers)
    cells: dict = {}
    for key, tr in zip(keys, traces):
        cells.setdefault(key, []).append(tr)
    rows = []
    for (kappa, n, m), trs in cells.items():
        assert len(trs) == reps, f"cell {(kappa, n, m)} ran {len(trs)} times, expected {reps}"
        its = np.array([t.iterations_used for t in trs], dtype=float)
        conv = sum(t.converged for t in trs)
        rows.append({"kappa": kappa, "n": n, "method": m, "mean_iters": int(round(its.mean())),
                     "mean_iters_exact": float(its.mean()), "std_iters": float(its.std(ddof=1)) if reps > 1 else 0.0,
                     "converged": conv, "runs": reps, "flag": "" if conv == reps else "NOT_CONVERGED"})
    return rows


def cmd_table1(args) -> int:
    rows = table1_rows(args.kappas, args.sizes, args.methods, args.reps, args.seed, args.d1, args.d2,
                       args.theta, args.tol, args.max_iters, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "table1.csv", rows)
    for r in rows:
        print(f"kappa={r['kappa']:<8g} N={r['n']:<5d} {r['method']:<4} {r['mean_iters']:>6d}"
              f"  ({r['converged']}/{r['runs']} converged) {r['flag']}")
    return EXIT_OK if all(not r["flag"] for r in rows) else EXIT_NUMERICAL


def sweep_rows(axis: str, method: str, n: int, kappa: float, reps: int, base_seed: int = 0,
               d1: int = 4, d2: int = 4, theta: float = 0.5, max_d: int = 12, tol_rel: float = 1e-6,
               max_iters: Optional[int] = None, workers: int = 1, thetas=None) -> list[dict]:
    prob = ProblemSpec("random", n, kappa)
    if axis == "theta":
        if method.upper() != "AOA":
            raise UsageError("theta sweep applies to AOA only")
        grid = [{"theta": round(t, 2)} for t in (thetas if thetas is not None else np.arange(1, 20) * 0.05)]
    elif axis == "d1d2":
        grid = [{"d1": a, "d2": b} for a in range(1, max_d + 1) for b in range(1, max_d + 1)]
    else:
        raise UsageError(f"unknown sweep axis '{axis}'")
    tasks = []
    for point in grid:
        spec = {"method": method.upper(), "d1": d1, "d2": d2, "theta": theta, **point}
        for r in range(reps):
            tasks.append((prob, spec, tol_rel, max_iters, base_seed + r))
    traces = run_tasks(tasks, workers)
    rows = []
    for i, point in enumerate(grid):
        trs = traces[i * reps:(i + 1) * reps]
        its = np.array([t.iterations_used for t in trs], dtype=float)
        rows.append({**point, "method": method.upper(), "n": n, "kappa": kappa,
                     "mean_iters": float(its.mean()), "std_iters": float(its.std(ddof=1)) if reps > 1 else 0.0,
                     "converged": sum(t.converged for t in trs), "runs": reps})
    return rows


def cmd_sweep(args) -> int:
    method = args.methods[0]
    rows = sweep_rows(args.axis, method, args.n, args.kappa, args.reps, args.seed, args.d1, args.d2,
                      args.theta, args.max_d, args.tol, args.max_iters, args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / f"sweep_{args.axis}_{method.upper()}.csv", rows)
    best = min(rows, key=lambda r: r["mean_iters"])
    print(f"{len(rows)} grid points; best {({k: best[k] for k in ('theta', 'd1', 'd2') if k in best})}"
          f" mean_iters={best['mean_iters']:.1f}")
    return EXIT_OK if all(r["converged"] == r["runs"] for r in rows) else EXIT_NUMERICAL


def cmd_verify(args) -> int:
    rows = analysis.run_verification(args.n, args.lam1, args.lamN, args.iters, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verdicts.json").write_text(analysis.verdicts_json(rows) + "\n")
    print(analysis.format_table(rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_NUMERICAL


# --- argument handling ----------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v]


def _ints(s: str) -> list[int]:
    return [int(float(v)) for v in s.split(",") if v]


def _names(s: str) -> list[str]:
    return [v.strip().upper() for v in s.split(",") if v.strip()]


def _slug(s: str) -> str:
    return s.replace("(", "_").replace(")", "").replace(",", "-")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--n", type=lambda v: int(float(v)), default=100)
    p.add_argument("--kappa", type=float, default=1e2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--d1", type=int, default=4)
    p.add_argument("--d2", type=int, default=4)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gradalign", description="Gradient methods with alignment: experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run methods on one problem family")
    _common(s)
    s.add_argument("--problem", choices=FAMILIES, default="random")
    s.add_argument("--method", dest="methods", type=_names, default=["MGC"])
    s.add_argument("--delta", type=float, default=1e-4)
    s.add_argument("--path")
    s.add_argument("--rotate", action="store_true")
    s.add_argument("--restart-l", type=int, default=20)
    s.add_argument("--alpha", type=float, help="steplength for CONST")
    s.add_argument("--rho", type=_ints, default=[0], help="DGMR rho schedule, comma list")
    s.add_argument("--tau", type=int, default=0, help="DGMR retard")
    s.add_argument("--upsilon", type=int, default=1)
    s.add_argument("--config", help="JSON ExperimentConfig; overrides the flags")
    s.add_argument("--verify-theorems", action="store_true", help="also run the theorem checks")

    t = sub.add_parser("table1", help="mean iteration counts over a kappa x N grid")
    _common(t)
    t.add_argument("--kappas", type=_floats, default=list(TABLE1_KAPPAS))
    t.add_argument("--sizes", type=_ints, default=list(TABLE1_SIZES))
    t.add_argument("--method", dest="methods", type=_names, default=list(TABLE1_METHODS))
    t.set_defaults(reps=10)

    w = sub.add_parser("sweep", help="theta or (d1, d2) parameter sweep")
    _common(w)
    w.add_argument("--axis", choices=("theta", "d1d2"), default="theta")
    w.add_argument("--method", dest="methods", type=_names, default=["AOA"])
    w.add_argument("--max-d", type=int, default=12)
    w.set_defaults(reps=10)

    v = sub.add_parser("verify", help="numerical checks of the MG and constant-step theorems")
    v.add_argument("--n", type=int, default=10)
    v.add_argument("--lam1", type=float, default=1.0)
    v.add_argument("--lamN", type=float, default=10.0)
    v.add_argument("--iters", type=int, default=300)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default="runs")
    return parser


def _solve_config(args) -> ExperimentConfig:
    if args.config:
        return ExperimentConfig.from_json(args.config)
    methods = []
    for m in args.methods:
        spec = {"method": m}
        if m in SCHEDULES:
            spec.update(d1=args.d1, d2=args.d2)
        if m == "AOA":
            spec["theta"] = args.theta
        if m == "CONST":
            spec["alpha"] = args.alpha
        if m == "DGMR":
            spec.update(rho=args.rho, tau=args.tau, upsilon=args.upsilon)
        if m == "GMRES":
            spec["restart_l"] = args.restart_l
        methods.append(spec)
    prob = ProblemSpec(args.problem, args.n, args.kappa, args.seed, args.delta, args.path, args.rotate)
    return ExperimentConfig(prob, methods, args.tol, args.max_iters, args.reps, args.out, args.workers)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "solve":
            cfg = _solve_config(args)
            code = cmd_solve(cfg)
            if args.verify_theorems:
                args.n, args.lam1, args.lamN, args.iters = 10, 1.0, 10.0, 300
                code = max(code, cmd_verify(args))
            return code
        if args.command == "table1":
            return cmd_table1(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_verify(args)
    except (UsageError, StepConfigError, FileNotFoundError, MatrixFormatError) as exc:
        print(f"gradalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _write_rows(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})


if __name__ == "__main__":
    sys.exit(main())
