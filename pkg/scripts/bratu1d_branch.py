"""Bratu 1D: both branches through the fold, leading eigenvalues and the FD reference spectrum at p=3."""

import argparse
from pathlib import Path

import numpy as np

from meshlessbif.continuation import write_branch_csv, write_events_json
from meshlessbif.fdref import fd_solve, fd_spectrum, make_fd_problem
from meshlessbif.presets import run_branch, state_on_branch
from meshlessbif.problems import bratu1d_exact, make_problem
from meshlessbif.stability import shift_invert_eigs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/bratu1d")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    pr = make_problem("bratu1d", seed=args.seed)
    br = run_branch(pr)
    write_branch_csv(br, out / "branch.csv")
    write_events_json(br, out / "events.json")
    print(f"fold at p = {br.events_of('fold')[0]['mu']:.9f} ({len(br.points)} points)")

    fd = make_fd_problem("bratu1d")
    for branch in ("lower", "upper"):
        st = state_on_branch(pr, 3.0, branch)
        lam = shift_invert_eigs(pr, st.weights, 3.0, k=7, sigma=1.0).eigenvalues
        ref = fd_solve(fd, 3.0, bratu1d_exact(fd.nodes[:, 0], 3.0, branch))
        lam_fd = fd_spectrum(fd, 3.0, ref.values, k=3).eigenvalues
        print(f"{branch:5s}: lambda = {np.round(lam[:3].real, 4)}  FD: {np.round(lam_fd.real, 4)}")


if __name__ == "__main__":
    main()
