"""Command-line front end: ``meshlessbif {solve,continue,eigs,svd-report,reproduce}``.

Exit codes: 0 success, 1 numerical failure, 2 usage error. Failures print a
one-line JSON object ``{"error", "message", "exit_code"}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import config as C
from .basis import eval_features
from .continuation import (
    ContinuationError,
    join_branches,
    trace_branch,
    write_branch_csv,
    write_events_json,
)
from .diagnostics import boundary_rank_check, svd_decay_report, write_report_json, write_singular_values_csv
from .fdref import fd_solve, fd_spectrum, make_fd_problem
from .presets import initial_guess, start_pair, state_on_branch
from .problems import make_problem
from .solver import NumericError, newton_solve, numerical_rank
from .stability import (
    PencilDegenerateError,
    arnoldi_eigs,
    build_pencil,
    classify_spectrum,
    dense_generalized_eigs,
    naive_physical_jacobian,
)

log = logging.getLogger("meshlessbif")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, (float, np.floating)) else v


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------- config


def build_config(args) -> C.RunConfig:
    cfg = C.load(args.config) if args.config else C.RunConfig()
    flat = {"problem": "problem", "seed": "seed", "mu": "mu", "branch": "branch",
            "n_neurons": "n_neurons", "n_points": "n_points", "out": "output_dir"}
    for a, key in flat.items():
        v = getattr(args, a, None)
        if v is not None:
            setattr(cfg, key, v)
    nested = {"sigma": ("eigs", "sigma"), "tau": ("eigs", "tau"), "k": ("eigs", "k"), "method": ("eigs", "method"),
              "ds": ("continuation", "ds"), "n_steps": ("continuation", "n_steps"),
              "direction": ("continuation", "direction")}
    for a, (sec, key) in nested.items():
        v = getattr(args, a, None)
        if v is not None:
            setattr(getattr(cfg, sec), key, v)
    return C.resolve(cfg)


def _problem(cfg: C.RunConfig):
    return make_problem(
        cfg.problem, n_neurons=cfg.n_neurons, n_points=cfg.n_points, seed=cfg.seed, fixed_params=cfg.fixed_params
    )


def _outdir(cfg: C.RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _steady(pr, cfg: C.RunConfig, trace=None):
    """Converged state on the configured branch, or NumericalFailure."""
    s = cfg.solver
    try:
        guess = initial_guess(pr, cfg.mu, cfg.branch)
    except ValueError:
        guess = None
    if guess is not None:
        st = newton_solve(pr, guess, cfg.mu, tol=s.tol, max_iter=s.max_iter, svd_tol=s.svd_tol, trace=trace)
        if st.converged:
            return st
    # no direct guess (or it failed): go around the fold by continuation
    try:
        st = state_on_branch(pr, cfg.mu, cfg.branch, _cont_overrides(cfg))
    except ContinuationError as exc:
        raise NumericalFailure(f"no converged {cfg.branch} state at mu={cfg.mu}: {exc}") from exc
    return newton_solve(pr, st.weights, cfg.mu, tol=s.tol, max_iter=s.max_iter, svd_tol=s.svd_tol, trace=trace)


def _cont_overrides(cfg: C.RunConfig) -> dict:
    c = cfg.continuation
    return dict(
        ds=c.ds, ds_min=c.ds_min, ds_max=c.ds_max, n_steps=c.n_steps, mu_start=c.mu_start,
        mu_second=c.mu_second, bounds=tuple(c.mu_bounds),
    )


def _eig_kw(cfg: C.RunConfig) -> dict:
    e = cfg.eigs
    kw = {"tol": e.tol}
    if e.krylov_dim is not None:
        kw["krylov_dim"] = e.krylov_dim
    return kw


def _shift_invert(pr, cfg: C.RunConfig):
    e = cfg.eigs

    def fn(problem, w, mu):
        op = build_pencil(problem.jacobian_w(w, mu), problem.psi_blocks, problem.constraint_mask(), e.sigma, cfg.solver.svd_tol)
        return arnoldi_eigs(op, k=e.k, **_eig_kw(cfg))

    return fn


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: C.RunConfig) -> int:
    pr = _problem(cfg)
    out = _outdir(cfg)
    C.write(cfg, out / "resolved_config.json")
    with open(out / "convergence.jsonl", "w") as trace:
        st = _steady(pr, cfg, trace)
    pts = pr.colloc.points
    cols = ["x", "y", "z"][: pts.shape[1]] + list(pr.field_names)
    _write_csv(out / "solution.csv", cols, np.column_stack([pts, pr.fields(st.weights).T]).tolist())
    summary = {
        "problem": cfg.problem, "mu": cfg.mu, "branch": cfg.branch, "converged": bool(st.converged),
        "residual_inf": st.residual_norm, "iterations": st.iterations,
    }
    print(json.dumps(summary))
    if not st.converged:
        raise NumericalFailure(f"Newton did not converge at mu={cfg.mu} (residual {st.residual_norm:.3e})")
    return EXIT_OK


def _trace(pr, cfg: C.RunConfig, eig_fn, reverse: bool):
    c = dict(_cont_overrides(cfg), branches=(cfg.branch,))
    if reverse:
        c["mu_start"], c["mu_second"] = c["mu_second"], c["mu_start"]
    s = cfg.solver
    a, b = start_pair(pr, c, tol=s.tol, svd_tol=s.svd_tol)
    return trace_branch(
        pr, a, b, c["ds"], c["n_steps"], eig_fn=eig_fn, ds_min=c["ds_min"], ds_max=c["ds_max"],
        mu_bounds=c["bounds"], tol=s.tol, svd_tol=s.svd_tol,
    )


def cmd_continue(cfg: C.RunConfig) -> int:
    if cfg.eigs.method != "shift_invert":
        raise UsageError("continue computes spectra with method=shift_invert only")
    pr = _problem(cfg)
    out = _outdir(cfg)
    C.write(cfg, out / "resolved_config.json")
    eig_fn = _shift_invert(pr, cfg)
    direction = cfg.continuation.direction
    try:
        if direction == "both":
            br = join_branches(_trace(pr, cfg, eig_fn, True), _trace(pr, cfg, eig_fn, False))
        else:
            br = _trace(pr, cfg, eig_fn, direction == "backward")
    except ContinuationError as exc:
        raise NumericalFailure(str(exc)) from exc
    write_branch_csv(br, out / "branch.csv", n_eigs=cfg.eigs.k)
    write_events_json(br, out / "events.json")
    print(json.dumps({"n_points": len(br.points), "events": [[e["type"], e["mu"]] for e in br.events], "error": br.error}))
    if br.error:
        raise NumericalFailure(f"continuation stopped early: {br.error}")
    return EXIT_OK


def _fd_spectrum(pr, cfg: C.RunConfig, st):
    fd = make_fd_problem(cfg.problem, n_points=cfg.n_points, params=cfg.fixed_params)
    if cfg.eigs.k > fd.n_unknowns:
        raise UsageError(f"k={cfg.eigs.k} exceeds the {fd.n_unknowns} grid unknowns")
    psi = eval_features(pr.basis, fd.nodes).psi
    guess = np.concatenate([psi @ w for w in st.weights.reshape(pr.n_fields, -1)])
    ref = fd_solve(fd, cfg.mu, guess, tol=cfg.solver.tol)
    if not ref.converged:
        raise NumericalFailure(f"finite-difference Newton did not converge at mu={cfg.mu}")
    return fd_spectrum(fd, cfg.mu, ref.values, k=cfg.eigs.k)


def cmd_eigs(cfg: C.RunConfig) -> int:
    pr = _problem(cfg)
    e = cfg.eigs
    if e.method != "fd" and e.k > pr.n_weights:
        raise UsageError(f"k={e.k} exceeds the number of weights N={pr.n_weights}")
    out = _outdir(cfg)
    C.write(cfg, out / "resolved_config.json")
    st = _steady(pr, cfg)
    if not st.converged:
        raise NumericalFailure(f"no converged steady state at mu={cfg.mu}")
    t0 = time.perf_counter()
    try:
        if e.method == "shift_invert":
            spec = _shift_invert(pr, cfg)(pr, st.weights, cfg.mu)
            rows_of = spec
        elif e.method == "naive":
            j_u = naive_physical_jacobian(pr.jacobian_w(st.weights, cfg.mu), pr.psi_blocks, e.tau)
            spec = classify_spectrum(dense_generalized_eigs(j_u, pr.constraint_mask()), pr.psi_blocks, e.tau)
            phys = np.flatnonzero(spec.groups == "physical")
            phys = phys[np.argsort(-spec.eigenvalues[phys].real, kind="stable")][: e.k]
            rows_of = spec.select(np.concatenate([phys, np.flatnonzero(spec.groups != "physical")]))
        else:
            spec = rows_of = _fd_spectrum(pr, cfg, st)
    except PencilDegenerateError as exc:
        raise NumericalFailure(str(exc)) from exc
    seconds = time.perf_counter() - t0
    rows = [
        [i, float(l.real), float(l.imag), float(r), g]
        for i, (l, r, g) in enumerate(zip(rows_of.eigenvalues, rows_of.residuals, rows_of.groups))
    ]
    _write_csv(out / "spectrum.csv", ["index", "re_lambda", "im_lambda", "residual", "group"], rows)
    counts = {g: int(np.sum(spec.groups == g)) for g in sorted(set(spec.groups))}
    info = {"method": e.method, "mu": cfg.mu, "branch": cfg.branch, "seconds": seconds, "groups": counts,
            "steady_residual_inf": st.residual_norm}
    with open(out / "spectrum_info.json", "w") as fh:
        json.dump(info, fh, indent=2)
    print(json.dumps(info))
    return EXIT_OK


def cmd_svd_report(cfg: C.RunConfig) -> int:
    pr = _problem(cfg)
    out = _outdir(cfg)
    C.write(cfg, out / "resolved_config.json")
    rep = svd_decay_report(pr.features.psi)
    d = rep.to_dict()
    d["rank_at_tau"] = {"tau": cfg.eigs.tau, "rank": numerical_rank(pr.features.psi, cfg.eigs.tau)}
    d["boundary"] = boundary_rank_check(pr.psi_blocks, pr.constraint_mask())
    write_report_json(d, out / "svd_report.json")
    write_singular_values_csv(rep, out / "singular_values.csv")
    print(json.dumps({k: d[k] for k in ("fit_r2", "estimated_R", "fit_unreliable", "rank_at_tau")}))
    return EXIT_OK


def cmd_reproduce(suite: str, seed: int, jobs: int, out: str | None) -> int:
    from .reproduce import SUITES, format_table, run_suite

    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    results = run_suite(suite, seed=seed, jobs=jobs)
    print(format_table(results))
    for r in results:
        if r.cid == 10:
            print(f"timing ratio naive:shift_invert = {r.values['ratio']:.2f}")
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        with open(Path(out) / f"reproduce_{suite}.json", "w") as fh:
            json.dump(
                [{"id": r.cid, "name": r.name, "passed": r.passed, "seconds": r.seconds, "values": r.values} for r in results],
                fh, indent=2, default=lambda o: repr(o),
            )
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# ---------------------------------------------------------------- parsing


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON (or .toml) run configuration")
    common.add_argument("--problem", help="bratu1d, bratu2d, fhn or allen_cahn")
    common.add_argument("--seed", type=int)
    common.add_argument("--mu", type=float, help="bifurcation parameter value")
    common.add_argument("--branch")
    common.add_argument("--n-neurons", dest="n_neurons", type=int)
    common.add_argument("--n-points", dest="n_points", type=int, help="collocation points per dimension")
    common.add_argument("--sigma", type=float, help="shift for shift-invert")
    common.add_argument("--tau", type=float, help="rank tolerance for Psi")
    common.add_argument("--k", type=int, help="number of eigenvalues")
    common.add_argument("--ds", type=float, help="initial arclength step")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="meshlessbif", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve", parents=[common], help="steady state at one parameter value")
    pc = sub.add_parser("continue", parents=[common], help="pseudo-arclength continuation with stability")
    pc.add_argument("--n-steps", dest="n_steps", type=int)
    pc.add_argument("--direction", choices=C.DIRECTIONS)
    pe = sub.add_parser("eigs", parents=[common], help="leading eigenvalues at a steady state")
    pe.add_argument("--method", choices=C.EIG_METHODS)
    sub.add_parser("svd-report", parents=[common], help="singular-value decay and boundary rank of Psi")
    pr = sub.add_parser("reproduce", help="run the acceptance suite")
    pr.add_argument("suite", help="bratu1d, bratu2d, fhn, allen_cahn, properties or all")
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--jobs", type=int, default=1)
    pr.add_argument("--out")
    pr.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def _thread_limit():
    n = os.environ.get("MESHLESSBIF_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    try:
        return threadpool_limits(limits=int(n))
    except ValueError as exc:
        raise UsageError(f"MESHLESSBIF_THREADS must be an integer, got {n!r}") from exc


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
        with _thread_limit():
            if args.command == "reproduce":
                return cmd_reproduce(args.suite, args.seed, args.jobs, args.out)
            cfg = build_config(args)
            run = {"solve": cmd_solve, "continue": cmd_continue, "eigs": cmd_eigs, "svd-report": cmd_svd_report}
            return run[args.command](cfg)
    except (UsageError, C.ConfigError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except (NumericalFailure, NumericError, ContinuationError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", str(exc), EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
