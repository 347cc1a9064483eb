"""Allen-Cahn: pitchforks off the trivial branch and the first point of each bifurcating branch."""

import argparse
from pathlib import Path

import numpy as np

from meshlessbif.continuation import write_branch_csv, write_events_json
from meshlessbif.presets import run_branch
from meshlessbif.problems import make_problem
from meshlessbif.reproduce import allen_cahn


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/allen_cahn")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    res = allen_cahn(seed=args.seed)
    for r in res.values["events"]:
        print(
            f"k={r['k']}: eps = {r['eps']:.6f} (2/(k pi) = {2 / (r['k'] * np.pi):.6f}), "
            f"switch {'ok' if r['switch_converged'] else 'FAILED'}, cos = {r['cos_solution']:.4f}"
        )
    br = run_branch(make_problem("allen_cahn", seed=args.seed))
    write_branch_csv(br, out / "trivial_branch.csv")
    write_events_json(br, out / "events.json")


if __name__ == "__main__":
    main()
