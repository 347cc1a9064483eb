"""FitzHugh-Nagumo in eps: fold and Hopf points, and the leading eigenvalues at eps=0.8."""

import argparse
from pathlib import Path

from meshlessbif.continuation import join_branches, write_branch_csv, write_events_json
from meshlessbif.presets import preset, run_branch, state_on_branch
from meshlessbif.problems import make_problem
from meshlessbif.stability import shift_invert_eigs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, default=0.8)
    ap.add_argument("--out", default="results/fhn")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    pr = make_problem("fhn", seed=args.seed)
    c = preset("fhn")
    up = run_branch(pr)
    down = run_branch(pr, {"mu_start": c["mu_second"], "mu_second": c["mu_start"]})
    br = join_branches(down, up)
    write_branch_csv(br, out / "branch.csv")
    write_events_json(br, out / "events.json")
    for e in br.events:
        extra = f", Im(lambda) = {e['imag']:.4f}" if e["type"] == "hopf" else ""
        print(f"{e['type']:9s} eps = {e['mu']:.6f}{extra}")
    for branch in ("upper", "lower"):
        st = state_on_branch(pr, args.eps, branch)
        lam = shift_invert_eigs(pr, st.weights, args.eps, k=c["k"], sigma=c["sigma"]).eigenvalues
        print(f"{branch:5s} at eps={args.eps}: lambda1 = {lam[0]:.5f}")


if __name__ == "__main__":
    main()
