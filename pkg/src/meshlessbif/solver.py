"""Truncated-SVD least squares and Gauss-Newton iterations for the collocation system."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


class NumericError(ArithmeticError):
    """Non-finite values appeared in a numerical computation."""


@dataclass(frozen=True, eq=False)
class SvdFactors:
    u_mat: np.ndarray  # (M, r)
    s_vals: np.ndarray  # (r,)
    v_mat: np.ndarray  # (N, r)
    tol: float
    mode: str
    rank_full: int
    s_all: np.ndarray  # every singular value before truncation

    @property
    def rank(self) -> int:
        return self.s_vals.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.u_mat.shape[0], self.v_mat.shape[0]


def cutoff(s_max: float, tol: float, mode: str) -> float:
    if mode == "relative":
        return tol * s_max
    if mode == "absolute":
        return tol
    raise ValueError(f"unknown truncation mode {mode!r}")


def truncated_svd(a, tol: float = 1e-8, mode: str = "relative") -> SvdFactors:
    """Thin SVD of ``a`` keeping singular values ``>= tol * s_max`` (or ``>= tol``)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2D matrix")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    thresh = cutoff(s[0] if s.size else 0.0, tol, mode)
    keep = (s >= thresh) & (s > 0)
    r = int(keep.sum())
    return SvdFactors(u[:, :r], s[:r], vt[:r].T, tol, mode, min(a.shape), s)


def pinv_apply(f: SvdFactors, rhs) -> np.ndarray:
    """``V S^-1 U^T rhs`` without forming the pseudo-inverse."""
    rhs = np.asarray(rhs)
    if rhs.shape[0] != f.u_mat.shape[0]:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, factors expect {f.u_mat.shape[0]}")
    coef = f.u_mat.T @ rhs
    coef = coef / (f.s_vals if rhs.ndim == 1 else f.s_vals[:, None])
    return f.v_mat @ coef


def numerical_rank(a, tol: float = 1e-8) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0


@dataclass
class SteadyState:
    weights: np.ndarray
    mu: float
    residual_norm: float  # infinity norm
    iterations: int
    converged: bool
    step_norm: float = np.inf
    initial_residual_norm: float = np.inf


def newton_solve(
    problem,
    w0,
    mu: float,
    tol: float = 1e-10,
    max_iter: int = 50,
    svd_tol: float = 1e-14,
    max_halvings: int = 10,
    trace=None,
    floor_tol: float = 1e-7,
    stall_iters: int = 3,
) -> SteadyState:
    """Gauss-Newton with truncated-SVD steps ``dw = -J_w^+ F``.

    Converged when the successive-solution change ``||u(w_new) - u(w_old)||_2``
    or ``||F||_inf`` drops to ``tol``. After three consecutive iterations with
    a growing residual the step is halved (at most ``max_halvings`` times)
    until the residual decreases. ``trace``, if given, is a writable text
    stream receiving one JSON line per iteration.

    Overdetermined or badly conditioned systems reach a residual floor above
    ``tol``; when the best residual has not halved for ``stall_iters``
    iterations and is below ``floor_tol`` the best iterate is returned as
    converged.
    """
    w = problem.check_weights(w0).copy()
    F = problem.residual(w, mu)
    if not np.all(np.isfinite(F)):
        raise NumericError("residual is not finite at the initial guess")
    res0 = res = float(np.max(np.abs(F)))
    u_old = problem.field_values(w)
    step = np.inf
    increases = 0
    best = (res, w.copy())
    stalled = 0

    for it in range(1, max_iter + 1):
        if res <= tol:
            return SteadyState(w, mu, res, it - 1, True, 0.0, res0)
        fac = truncated_svd(problem.jacobian_w(w, mu), svd_tol)
        dw = -pinv_apply(fac, F)
        w_new = w + dw
        F_new = problem.residual(w_new, mu)
        res_new = float(np.max(np.abs(F_new))) if np.all(np.isfinite(F_new)) else np.inf
        if res_new > res:
            increases += 1
            if increases >= 3 or not np.isfinite(res_new):
                t = 1.0
                for _ in range(max_halvings):
                    t *= 0.5
                    w_new = w + t * dw
                    F_new = problem.residual(w_new, mu)
                    res_new = float(np.max(np.abs(F_new))) if np.all(np.isfinite(F_new)) else np.inf
                    if res_new < res:
                        break
        else:
            increases = 0
        if not np.isfinite(res_new):
            raise NumericError(f"residual became non-finite at iteration {it}")
        w, F, res = w_new, F_new, res_new
        u_new = problem.field_values(w)
        step = float(np.linalg.norm(u_new - u_old))
        u_old = u_new
        if res < 0.5 * best[0]:
            stalled = 0
        else:
            stalled += 1
        if res < best[0]:
            best = (res, w.copy())
        if trace is not None:
            trace.write(json.dumps({"iter": it, "res_norm": res, "step_norm": step, "rank": fac.rank}) + "\n")
        logger.debug("newton it=%d res=%.3e step=%.3e rank=%d", it, res, step, fac.rank)
        if step <= tol or res <= tol:
            if res > res0:
                # never report convergence to a worse state than we started from
                return SteadyState(best[1], mu, best[0], it, best[0] <= res0, step, res0)
            return SteadyState(w, mu, res, it, True, step, res0)
        if stalled >= stall_iters and best[0] <= floor_tol:
            return SteadyState(best[1], mu, best[0], it, True, step, res0)
    return SteadyState(w, mu, res, max_iter, False, step, res0)
