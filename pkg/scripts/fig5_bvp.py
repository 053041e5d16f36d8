"""Residual histories of SDC, AOA and MGC on the finite-difference two-point BVP."""

import argparse
from pathlib import Path

from gradalign.problems import gen_bvp
from gradalign.solver import SolveConfig, run_gradient
from gradalign.steps import StepRule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="100,1000,10000")
    ap.add_argument("--out", default="results/bvp")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n in map(int, args.sizes.split(",")):
        p = gen_bvp(n)
        line = [f"N={n:<6d} kappa={p.spectrum.kappa:.3e}"]
        for m in ("SDC", "AOA", "MGC"):
            tr = run_gradient(p, StepRule(m), SolveConfig(max_iters=100_000))
            tr.write_csv(out / f"bvp-n{n}__{m}.csv")
            line.append(f"{m}={tr.iterations_used}{'' if tr.converged else '(not converged)'}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
