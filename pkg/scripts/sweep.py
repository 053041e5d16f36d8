"""AOA theta sweep and (d1, d2) grid for one alignment method."""

import argparse
from pathlib import Path

from gradalign.cli import _write_rows, sweep_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--kappa", type=float, default=1e2)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--grid-method", default="MGC")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    theta = sweep_rows("theta", "AOA", args.n, args.kappa, args.reps, workers=args.workers)
    _write_rows(out / "sweep_theta_AOA.csv", theta)
    for r in theta:
        print(f"theta={r['theta']:.2f}  mean={r['mean_iters']:7.1f}  std={r['std_iters']:6.1f}")
    best = min(theta, key=lambda r: r["mean_iters"])
    print(f"best theta {best['theta']:.2f}")

    grid = sweep_rows("d1d2", args.grid_method, args.n, args.kappa, args.reps, workers=args.workers)
    _write_rows(out / f"sweep_d1d2_{args.grid_method}.csv", grid)
    best = min(grid, key=lambda r: r["mean_iters"])
    print(f"best (d1, d2) for {args.grid_method}: ({best['d1']}, {best['d2']}) mean={best['mean_iters']:.1f}")


if __name__ == "__main__":
    main()
