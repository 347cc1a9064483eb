"""Run every acceptance criterion and print one PASS/FAIL line each."""

import argparse
import sys

from meshlessbif.reproduce import format_table, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", default="all")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    results = run_suite(args.suite, seed=args.seed, jobs=args.jobs)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
