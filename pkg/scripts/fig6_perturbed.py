"""MGC against CG and GMRES(l) on nonsymmetric perturbations A + delta*V of a random SPD matrix."""

import argparse
from pathlib import Path

from gradalign.krylov import KrylovConfig, run_cg, run_gmres
from gradalign.problems import gen_perturbed, gen_random_spd, unit_scaled
from gradalign.solver import SolveConfig, run_gradient
from gradalign.steps import StepRule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--kappa", type=float, default=1e4)
    ap.add_argument("--delta", type=float, default=1e-4)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--budget", type=int, default=5000)
    ap.add_argument("--out", default="results/perturbed")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    wins = 0
    for seed in range(args.seeds):
        p = gen_perturbed(unit_scaled(gen_random_spd(args.n, args.kappa, seed)), args.delta, seed)
        traces = {"MGC": run_gradient(p, StepRule("MGC"), SolveConfig(max_iters=args.budget)),
                  "CG": run_cg(p, KrylovConfig(max_iters=args.budget))}
        for l in (10, 20, 30):
            traces[f"GMRES{l}"] = run_gmres(p, KrylovConfig(max_iters=args.budget, restart_l=l))
        for name, tr in traces.items():
            tr.write_csv(out / f"seed{seed}__{name}.csv")
        wins += traces["MGC"].converged and not traces["CG"].converged
        print(f"seed {seed}: " + "  ".join(f"{k}={t.iterations_used}/{t.final_relres:.1e}" for k, t in traces.items()))
    print(f"MGC converged while CG did not on {wins}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
