"""Numerical checks of the MG asymptotics and constant-step alignment; writes verdicts.json."""

import argparse
from pathlib import Path

from gradalign.analysis import format_table, run_verification, verdicts_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--lam1", type=float, default=1.0)
    ap.add_argument("--lamN", type=float, default=10.0)
    ap.add_argument("--iters", type=int, default=300)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    rows = run_verification(args.n, args.lam1, args.lamN, args.iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verdicts.json").write_text(verdicts_json(rows) + "\n")
    print(format_table(rows))


if __name__ == "__main__":
    main()
