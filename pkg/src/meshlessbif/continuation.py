"""Pseudo-arclength continuation of steady states and detection of bifurcations.

The arclength condition is measured on the physical field values at the
collocation points, not on the raw weights (weights need not vary smoothly
along a branch). A problem only needs ``residual``, ``jacobian_w``,
``jacobian_mu``, ``field_values``, ``fields`` and ``psi_blocks``; the
finite-difference reference exposes the same surface with ``Psi = I``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .solver import SteadyState, newton_solve, pinv_apply, truncated_svd

logger = logging.getLogger(__name__)


class ContinuationError(RuntimeError):
    def __init__(self, msg, branch=None):
        super().__init__(msg)
        self.branch = branch


def summarize(problem, w) -> dict:
    """Scalar summaries of a state: field means, max of u, RMS of u over the points."""
    f = problem.fields(w)
    out = {"mean_u": float(f[0].mean()), "max_u": float(f[0].max()), "l2_u": float(np.sqrt(np.mean(f[0] ** 2)))}
    if f.shape[0] > 1:
        out["mean_v"] = float(f[1].mean())
    return out


@dataclass
class BranchPoint:
    s: float
    mu: float
    weights: np.ndarray
    summary: dict
    leading_eigs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    n_unstable: int = 0
    tags: set = field(default_factory=set)
    residual_norm: float = 0.0
    constraint: float = 0.0
    spectrum: object = field(default=None, repr=False)


@dataclass
class Branch:
    points: list
    events: list = field(default_factory=list)
    error: str | None = None
    problem: object = field(default=None, repr=False)
    eig_fn: object = field(default=None, repr=False)
    settings: dict = field(default_factory=dict)

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    def column(self, key) -> np.ndarray:
        return np.array([p.summary[key] for p in self.points])

    def events_of(self, kind) -> list:
        return [e for e in self.events if e["type"] == kind]


def _point(problem, w, mu, s, eig_fn, zero_tol, res=0.0, cons=0.0) -> BranchPoint:
    bp = BranchPoint(s, float(mu), np.asarray(w, dtype=float), summarize(problem, w), residual_norm=res, constraint=cons)
    if eig_fn is not None:
        attach_spectrum(bp, eig_fn(problem, w, mu), zero_tol)
    return bp


def attach_spectrum(bp: BranchPoint, spec, zero_tol: float = 1e-6):
    lam = spec.eigenvalues[spec.groups == "physical"]
    lam = lam[np.argsort(-lam.real, kind="stable")]
    bp.leading_eigs = lam
    bp.n_unstable = int(np.sum(lam.real > zero_tol))
    bp.spectrum = spec


def _secant(problem, prev2: BranchPoint, prev1: BranchPoint):
    du = problem.field_values(prev1.weights) - problem.field_values(prev2.weights)
    dmu = prev1.mu - prev2.mu
    norm = np.sqrt(du @ du + dmu**2)
    if norm == 0:
        raise ValueError("previous points coincide; cannot form a secant")
    return du / norm, dmu / norm, (prev1.weights - prev2.weights) / norm


def _correct(problem, w, mu, u1, mu1, t_u, t_mu, ds, tol, max_iter, svd_tol, floor_tol, stall_iters=2):
    """Newton on ``[F; C] = 0`` with truncated-SVD least-squares steps.

    Converged when both residuals are below ``tol``. If instead ``||F||_inf``
    stops halving for ``stall_iters`` iterations while below ``floor_tol``
    (the discrete system sits on its least-squares floor), the best iterate
    is accepted.
    """
    psi = problem.psi_blocks
    grad_c = np.concatenate([psi.T @ t_u, [t_mu]])
    c_tol = max(tol, 1e-2 * floor_tol)
    best = None
    stalled = 0
    for it in range(max_iter + 1):
        F = problem.residual(w, mu)
        C = t_u @ (problem.field_values(w) - u1) + t_mu * (mu - mu1) - ds
        res = float(np.max(np.abs(F)))
        if not np.isfinite(res):
            return None
        if res <= tol and abs(C) <= tol:
            return w, mu, res, abs(C), it
        if best is not None and res >= 0.5 * best[0]:
            stalled += 1
        else:
            stalled = 0
        if abs(C) <= c_tol and (best is None or res < best[0]):
            best = (res, abs(C), w, mu)
        if best is not None and stalled >= stall_iters and best[0] <= floor_tol:
            return best[2], best[3], best[0], best[1], it
        if it == max_iter:
            break
        jac = np.vstack([np.column_stack([problem.jacobian_w(w, mu), problem.jacobian_mu(w, mu)]), grad_c])
        dz = -pinv_apply(truncated_svd(jac, svd_tol), np.concatenate([F, [C]]))
        w = w + dz[:-1]
        mu = mu + dz[-1]
    if best is not None and best[0] <= floor_tol:
        return best[2], best[3], best[0], best[1], max_iter
    return None


def arclength_step(
    problem,
    prev2: BranchPoint,
    prev1: BranchPoint,
    ds: float,
    tol: float = 1e-10,
    max_iter: int = 12,
    svd_tol: float = 1e-14,
    max_retries: int = 5,
    floor_tol: float = 1e-6,
    eig_fn=None,
    stability_zero_tol: float = 1e-6,
) -> BranchPoint:
    """One secant-predictor / pseudo-arclength-corrector step of length ``ds``.

    On corrector failure the step is retried with half the length, at most
    ``max_retries`` times. The accepted step length is stored in the
    returned point's ``s`` increment.
    """
    if ds == 0 or not np.isfinite(ds):
        raise ValueError("ds must be a finite non-zero number")
    t_u, t_mu, t_w = _secant(problem, prev2, prev1)
    u1 = problem.field_values(prev1.weights)
    h = ds
    for attempt in range(max_retries + 1):
        w_pred = prev1.weights + h * t_w
        mu_pred = prev1.mu + h * t_mu
        out = _correct(problem, w_pred, mu_pred, u1, prev1.mu, t_u, t_mu, h, tol, max_iter, svd_tol, floor_tol)
        if out is not None:
            w, mu, res, cons, _ = out
            return _point(problem, w, mu, prev1.s + abs(h), eig_fn, stability_zero_tol, res, cons)
        logger.debug("corrector failed with ds=%.3e, halving", h)
        h *= 0.5
    raise ContinuationError(f"corrector failed after {max_retries} step halvings (last ds={h * 2:.3e})")


def trace_branch(
    problem,
    start: SteadyState,
    second: SteadyState,
    ds: float,
    n_steps: int,
    eig_fn=None,
    ds_min: float | None = None,
    ds_max: float | None = None,
    mu_bounds: tuple | None = None,
    tol: float = 1e-10,
    floor_tol: float = 1e-6,
    svd_tol: float = 1e-14,
    stability_zero_tol: float = 1e-6,
    imag_tol: float = 1e-6,
    refine: bool = True,
    grow_after: int = 4,
    grow_factor: float = 1.3,
) -> Branch:
    """Follow a branch from two nearby converged states for ``n_steps`` steps.

    ``ds`` keeps its sign (direction relative to ``start -> second``); its
    magnitude halves on corrector failure and grows by ``grow_factor`` after
    ``grow_after`` consecutive successes, clamped to ``[ds_min, ds_max]``.
    Tracing stops early when ``mu`` leaves ``mu_bounds``. ``eig_fn(problem,
    w, mu)`` returns a SpectrumResult for each accepted point. A failure
    mid-branch returns the partial branch with ``error`` set.
    """
    ds_min = abs(ds) / 64 if ds_min is None else ds_min
    ds_max = abs(ds) * 4 if ds_max is None else ds_max
    p0 = _point(problem, start.weights, start.mu, 0.0, eig_fn, stability_zero_tol, start.residual_norm)
    d01 = np.sqrt(
        np.sum((problem.field_values(second.weights) - problem.field_values(start.weights)) ** 2)
        + (second.mu - start.mu) ** 2
    )
    p1 = _point(problem, second.weights, second.mu, d01, eig_fn, stability_zero_tol, second.residual_norm)
    branch = Branch(
        [p0, p1],
        problem=problem,
        eig_fn=eig_fn,
        settings=dict(tol=tol, floor_tol=floor_tol, svd_tol=svd_tol, stability_zero_tol=stability_zero_tol, imag_tol=imag_tol),
    )
    sign = np.sign(ds)
    h = abs(ds)
    streak = 0
    for step in range(n_steps):
        try:
            bp = arclength_step(
                problem, branch.points[-2], branch.points[-1], sign * h, tol=tol, svd_tol=svd_tol, floor_tol=floor_tol,
                eig_fn=eig_fn, stability_zero_tol=stability_zero_tol,
            )
        except ContinuationError as exc:
            branch.error = str(exc)
            logger.warning("branch stopped at step %d: %s", step, exc)
            break
        taken = bp.s - branch.points[-1].s
        if taken < h * (1 - 1e-12):
            h = max(taken, ds_min)
            streak = 0
        else:
            streak += 1
            if streak >= grow_after:
                h = min(h * grow_factor, ds_max)
                streak = 0
        branch.points.append(bp)
        if mu_bounds is not None and not (mu_bounds[0] <= bp.mu <= mu_bounds[1]):
            break
    return detect_events(branch, stability_zero_tol, imag_tol=imag_tol, refine=refine)


def _signature(bp: BranchPoint, zero_tol: float, imag_tol: float):
    lam = bp.leading_eigs
    real = np.abs(lam.imag) <= imag_tol
    return int(np.sum(real & (lam.real > zero_tol))), int(np.sum(~real & (lam.real > zero_tol)))


def _crossing_value(bp: BranchPoint, kind: str, imag_tol: float) -> float:
    """Real part of the eigenvalue nearest the imaginary axis among the relevant kind."""
    lam = bp.leading_eigs
    sel = np.abs(lam.imag) > imag_tol if kind == "hopf" else np.abs(lam.imag) <= imag_tol
    if not sel.any():
        return np.nan
    re = lam.real[sel]
    return float(re[np.argmin(np.abs(re))])


def detect_events(
    branch: Branch,
    stability_zero_tol: float = 1e-6,
    imag_tol: float = 1e-6,
    refine: bool = True,
    mu_tol: float = 1e-4,
    max_bisections: int = 20,
) -> Branch:
    """Tag folds, Hopf points and pitchforks along ``branch`` and locate them.

    * fold: ``dmu/ds`` changes sign at a point;
    * hopf: the number of unstable complex eigenvalues changes;
    * pitchfork: the number of unstable real eigenvalues changes away from a fold.

    With ``refine`` (and the branch's problem/eig_fn available) each
    eigenvalue crossing is bisected in arclength until the bracketing
    parameter values are within ``mu_tol``; folds are located at the vertex
    of a parabola through the extremal points.
    """
    pts = branch.points
    events = []
    for p in pts:
        p.tags = set()
    fold_at = set()
    for i in range(1, len(pts) - 1):
        if (pts[i + 1].mu - pts[i].mu) * (pts[i].mu - pts[i - 1].mu) < 0:
            pts[i].tags.add("fold")
            fold_at.add(i)
    have_eigs = all(p.leading_eigs.size for p in pts) and len(pts) > 1
    can_refine = refine and branch.problem is not None and branch.eig_fn is not None

    for i in sorted(fold_at):
        trio = [pts[i - 1], pts[i], pts[i + 1]]
        if can_refine:
            trio = _refine_fold(branch, i, mu_tol, max_bisections)
        mu_c = _parabola_vertex([p.s for p in trio], [p.mu for p in trio])
        events.append(
            {
                "type": "fold",
                "mu": mu_c,
                "interval": [min(p.mu for p in trio), max(p.mu for p in trio)],
                "index": i,
                "bracket": [i - 1, i + 1],
            }
        )

    if have_eigs:
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            sa = _signature(a, stability_zero_tol, imag_tol)
            sb = _signature(b, stability_zero_tol, imag_tol)
            if sa == sb:
                continue
            near_fold = bool(fold_at & {i - 1, i, i + 1, i + 2})
            kinds = []
            if sa[1] != sb[1]:
                kinds.append("hopf")
            if sa[0] != sb[0] and not near_fold:
                kinds.append("pitchfork")
            for kind in kinds:
                lo, hi = a, b
                if can_refine and i >= 1:
                    lo, hi = _bisect_crossing(branch, i, kind, stability_zero_tol, imag_tol, mu_tol, max_bisections)
                ra, rb = _crossing_value(lo, kind, imag_tol), _crossing_value(hi, kind, imag_tol)
                mu_c = 0.5 * (lo.mu + hi.mu)
                if np.isfinite(ra) and np.isfinite(rb) and ra * rb < 0:
                    mu_c = lo.mu + (hi.mu - lo.mu) * ra / (ra - rb)
                (a if abs(a.mu - mu_c) <= abs(b.mu - mu_c) else b).tags.add(kind)
                ev = {"type": kind, "mu": float(mu_c), "interval": sorted([lo.mu, hi.mu]), "index": i, "bracket": [i, i + 1]}
                if kind == "hopf":
                    lam = hi.leading_eigs if abs(hi.mu - mu_c) < abs(lo.mu - mu_c) else lo.leading_eigs
                    cplx = lam[np.abs(lam.imag) > imag_tol]
                    ev["imag"] = float(np.abs(cplx[np.argmin(np.abs(cplx.real))].imag)) if cplx.size else 0.0
                if kind == "pitchfork":
                    ev["weights_lo"] = lo
                    ev["weights_hi"] = hi
                events.append(ev)
    events.sort(key=lambda e: e["index"])
    branch.events = events
    return branch


def _parabola_vertex(s, mu) -> float:
    s = np.asarray(s, dtype=float)
    mu = np.asarray(mu, dtype=float)
    c = np.polyfit(s - s[1], mu, 2)
    if c[0] == 0:
        return float(mu.max() if abs(mu.max() - mu[1]) < abs(mu.min() - mu[1]) else mu.min())
    sv = -c[1] / (2 * c[0])
    if not (s[0] - s[1] <= sv <= s[2] - s[1]):
        return float(mu[1])
    return float(np.polyval(c, sv))


def _point_between(branch: Branch, i: int, t: float) -> BranchPoint:
    """Point at arclength ``t`` beyond ``points[i]`` on the hyperplane family of step ``i -> i+1``."""
    st = branch.settings
    prev2, prev1 = branch.points[i - 1], branch.points[i]
    direction = np.sign(branch.points[i + 1].s - prev1.s) or 1.0
    # the step that produced points[i+1] moved along the secant in the same orientation
    sign = 1.0 if _moves_forward(branch, i) else -1.0
    bp = arclength_step(
        branch.problem, prev2, prev1, sign * direction * t, tol=st["tol"], svd_tol=st["svd_tol"], floor_tol=st["floor_tol"],
        eig_fn=branch.eig_fn, stability_zero_tol=st["stability_zero_tol"], max_retries=0,
    )
    return bp


def _moves_forward(branch: Branch, i: int) -> bool:
    """Whether ``points[i+1]`` lies ahead of ``points[i]`` along the secant ``i-1 -> i``."""
    pr = branch.problem
    a, b, c = branch.points[i - 1], branch.points[i], branch.points[i + 1]
    t_u, t_mu, _ = _secant(pr, a, b)
    du = pr.field_values(c.weights) - pr.field_values(b.weights)
    return float(t_u @ du + t_mu * (c.mu - b.mu)) >= 0


def _step_length(branch: Branch, i: int) -> float:
    pr = branch.problem
    a, b, c = branch.points[i - 1], branch.points[i], branch.points[i + 1]
    t_u, t_mu, _ = _secant(pr, a, b)
    du = pr.field_values(c.weights) - pr.field_values(b.weights)
    return abs(float(t_u @ du + t_mu * (c.mu - b.mu)))


def _bisect_crossing(branch, i, kind, zero_tol, imag_tol, mu_tol, max_bisections):
    pts = branch.points
    lo, hi = pts[i], pts[i + 1]
    idx = 1 if kind == "hopf" else 0
    sig_lo = _signature(lo, zero_tol, imag_tol)[idx]
    t_lo, t_hi = 0.0, _step_length(branch, i)
    for _ in range(max_bisections):
        if abs(hi.mu - lo.mu) <= mu_tol:
            break
        t_mid = 0.5 * (t_lo + t_hi)
        try:
            mid = _point_between(branch, i, t_mid)
        except ContinuationError:
            break
        if _signature(mid, zero_tol, imag_tol)[idx] == sig_lo:
            lo, t_lo = mid, t_mid
        else:
            hi, t_hi = mid, t_mid
    return lo, hi


def _refine_fold(branch, i, mu_tol, max_bisections):
    """Golden-section search for the extremum of ``mu`` over the two steps around a fold."""
    pts = branch.points
    if i < 2:
        return [pts[i - 1], pts[i], pts[i + 1]]
    is_max = pts[i].mu > pts[i - 1].mu
    key = (lambda p: p.mu) if is_max else (lambda p: -p.mu)
    # parametrize by arclength beyond points[i-1] on the step family (i-2 -> i-1)
    j = i - 1
    try:
        total = _step_length(branch, j) + _step_length(branch, i)
    except ValueError:
        return [pts[i - 1], pts[i], pts[i + 1]]
    cache = {}

    def at(t):
        if t not in cache:
            cache[t] = _point_between(branch, j, t)
        return cache[t]

    gr = (np.sqrt(5) - 1) / 2
    a, b = 0.0, total
    try:
        c, d = b - gr * (b - a), a + gr * (b - a)
        for _ in range(max_bisections):
            pc, pd = at(c), at(d)
            if abs(pc.mu - pd.mu) <= mu_tol * 1e-2 and (b - a) < 1e-3 * total:
                break
            if key(pc) > key(pd):
                b, d = d, c
                c = b - gr * (b - a)
            else:
                a, c = c, d
                d = a + gr * (b - a)
        pa = at(a) if a > 0 else pts[j]
        pb = at(b)
        pm = at(0.5 * (a + b))
    except ContinuationError:
        return [pts[i - 1], pts[i], pts[i + 1]]
    return [pa, pm, pb]


@dataclass
class SwitchResult(SteadyState):
    switch_failed: bool = False
    reason: str = ""


def switch_branch(
    problem,
    at: BranchPoint,
    eig_vector_w,
    amplitude: float,
    mu: float | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    svd_tol: float = 1e-14,
    noise_floor: float = 1e-6,
) -> SwitchResult:
    """Newton from ``w + amplitude * v`` to leave a symmetric branch at a pitchfork.

    ``mu`` is where the new state is sought, normally slightly past the
    bifurcation (default: the point's own parameter). The result carries
    ``switch_failed=True`` when Newton does not converge or the state falls
    back onto the original branch (field change below ``noise_floor``).
    """
    v = np.real_if_close(np.asarray(eig_vector_w))
    if np.iscomplexobj(v):
        raise ValueError("branch switching needs a real eigenvector")
    mu = at.mu if mu is None else mu
    st = newton_solve(problem, at.weights + amplitude * v, mu, tol=tol, max_iter=max_iter, svd_tol=svd_tol)
    diff = problem.field_values(st.weights) - problem.field_values(at.weights)
    reason = ""
    if not st.converged:
        reason = "newton did not converge"
    elif np.max(np.abs(diff)) <= noise_floor:
        reason = "fell back onto the original branch"
    return SwitchResult(**vars(st), switch_failed=bool(reason), reason=reason)


def natural_sweep(problem, w0, mus, tol=1e-10, svd_tol=1e-14, eig_fn=None, stability_zero_tol=1e-6) -> Branch:
    """Branch through a prescribed parameter sequence, warm-starting each Newton solve."""
    pts = []
    w = np.asarray(w0, dtype=float)
    s = 0.0
    prev_u = None
    for mu in mus:
        st = newton_solve(problem, w, mu, tol=tol, svd_tol=svd_tol)
        if not st.converged:
            raise ContinuationError(f"Newton failed at mu={mu}")
        w = st.weights
        u = problem.field_values(w)
        if prev_u is not None:
            s += float(np.sqrt(np.sum((u - prev_u) ** 2) + (mu - pts[-1].mu) ** 2))
        prev_u = u
        pts.append(_point(problem, w, mu, s, eig_fn, stability_zero_tol, st.residual_norm))
    return Branch(pts, problem=problem, eig_fn=eig_fn)


def join_branches(backward: Branch, forward: Branch) -> Branch:
    """One branch from two traces started on the same pair of states in opposite directions.

    ``backward`` starts at ``forward``'s second state and runs through its
    first, so its first two points are dropped. Arclength is measured from
    ``forward``'s start, negative on the backward side.
    """
    s0 = forward.points[0].s
    back = backward.points[2:]
    off = backward.points[1].s if len(backward.points) > 1 else 0.0
    pts = [replace(p, s=s0 - (p.s - off)) for p in reversed(back)] + list(forward.points)
    shift = len(back)
    events = [dict(e, index=e["index"] + shift, bracket=[e["index"] + shift, e["index"] + shift + 1]) for e in forward.events]
    # backward point j lands at joined position len(back) + 1 - j
    for e in backward.events:
        i = max(len(back) - e["index"], 0)
        events.append(dict(e, index=i, bracket=[i, i + 1]))
    events.sort(key=lambda e: e["index"])
    return Branch(
        pts, events, forward.error or backward.error, forward.problem, forward.eig_fn,
        dict(forward.settings, joined=True),
    )


# ---------------------------------------------------------------- file output

def branch_rows(branch: Branch, n_eigs: int | None = None) -> tuple[list, list]:
    if n_eigs is None:
        n_eigs = max((p.leading_eigs.size for p in branch.points), default=0)
    header = ["s", "mu", "mean_u", "mean_v", "max_u", "l2_u"]
    header += [f"re_lambda{i + 1}" for i in range(n_eigs)] + [f"im_lambda{i + 1}" for i in range(n_eigs)]
    header += ["n_unstable", "tag"]
    rows = []
    for p in branch.points:
        lam = np.full(n_eigs, np.nan, dtype=complex)
        lam[: min(n_eigs, p.leading_eigs.size)] = p.leading_eigs[:n_eigs]
        row = [p.s, p.mu, p.summary["mean_u"], p.summary.get("mean_v", np.nan), p.summary["max_u"], p.summary["l2_u"]]
        row += list(lam.real) + list(lam.imag) + [p.n_unstable, ";".join(sorted(p.tags))]
        rows.append(row)
    return header, rows


def write_branch_csv(branch: Branch, path, n_eigs: int | None = None, source: str | None = None):
    header, rows = branch_rows(branch, n_eigs)
    if source is not None:
        header = header + ["source"]
        rows = [r + [source] for r in rows]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in r])


def events_json(branch: Branch) -> list:
    return [{"type": e["type"], "mu": float(e["mu"]), "interval": [float(x) for x in e["interval"]]} for e in branch.events]


def write_events_json(branch: Branch, path):
    with open(path, "w") as fh:
        json.dump(events_json(branch), fh, indent=2)
