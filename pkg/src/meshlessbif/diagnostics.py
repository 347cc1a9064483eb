"""Checks on the collocation matrices: singular-value decay, boundary-row rank, chain rule."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

RANK_TOLS = (1e-4, 1e-6, 1e-8, 1e-10, 1e-12)


@dataclass
class DecayReport:
    singular_values: np.ndarray
    fit_log10_slope: float
    fit_intercept: float
    fit_r2: float
    fit_range: tuple
    numerical_rank_at: dict
    estimated_R: float
    fit_unreliable: bool = False
    shape: tuple = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["singular_values"] = [float(s) for s in self.singular_values]
        d["numerical_rank_at"] = {f"{k:g}": int(v) for k, v in self.numerical_rank_at.items()}
        d["fit_range"] = list(self.fit_range)
        d["shape"] = list(self.shape)
        return d


def svd_decay_report(psi, fit_range: tuple | None = None, floor: float = 1e-13, rank_tols=RANK_TOLS) -> DecayReport:
    """Fit ``log10 sigma_j = a + b j`` (``j`` 1-based) and report ``R = 10**(-2 b)``.

    ``fit_range = (j0, j1)`` is inclusive; by default it covers every singular
    value above ``floor * sigma_1``. Indices at or below the floor are always
    dropped. With fewer than four points left the report is flagged
    ``fit_unreliable``.
    """
    psi = np.asarray(psi, dtype=float)
    s = np.linalg.svd(psi, compute_uv=False)
    n = s.size
    ranks = {tol: int(np.sum(s > tol * s[0])) for tol in rank_tols} if n and s[0] > 0 else {t: 0 for t in rank_tols}
    j0, j1 = (1, n) if fit_range is None else (int(fit_range[0]), int(fit_range[1]))
    if not 1 <= j0 <= j1 <= n:
        raise ValueError(f"fit_range must lie within [1, {n}], got {fit_range}")
    j = np.arange(j0, j1 + 1)
    sv = s[j0 - 1 : j1]
    ok = sv > floor * s[0]
    j, sv = j[ok], sv[ok]
    if j.size < 2:
        return DecayReport(s, np.nan, np.nan, np.nan, (j0, j1), ranks, np.nan, True, psi.shape)
    y = np.log10(sv)
    if np.ptp(y) == 0:
        slope, icpt, r2 = 0.0, float(y[0]), 1.0
    else:
        fit = stats.linregress(j, y)
        slope, icpt, r2 = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    used = (int(j[0]), int(j[-1]))
    return DecayReport(s, slope, icpt, r2, used, ranks, float(10 ** (-2 * slope)), j.size < 4, psi.shape)


def boundary_rank_check(psi, mask, rel_tol: float = 1e-10) -> dict:
    """Rank of the rows of ``Psi`` where the mask is zero (the constraint rows)."""
    psi = np.asarray(psi, dtype=float)
    b = np.asarray(getattr(mask, "b_diag", mask), dtype=float)
    rows = psi[b == 0]
    if rows.shape[0] == 0:
        raise ValueError("mask has no constraint rows")
    s = np.linalg.svd(rows, compute_uv=False)
    full = rows.shape[0] <= rows.shape[1] and s[-1] > rel_tol * s[0]
    return {"full_row_rank": bool(full), "smallest_sv": float(s[-1]), "largest_sv": float(s[0]), "n_rows": int(rows.shape[0])}


def chain_rule_check(problem, weights, mu, j_w=None) -> dict:
    """``||J_w - J_u Psi||_F / ||J_w||_F`` with ``J_u Psi`` assembled from the pointwise linearization.

    ``j_w`` may be passed to check a Jacobian from another source.
    """
    j_w = problem.jacobian_w(weights, mu) if j_w is None else np.asarray(j_w, dtype=float)
    assembled = problem.linearization(weights, mu).apply_to_features(problem.features)
    err = np.linalg.norm(j_w - assembled) / max(np.linalg.norm(j_w), 1e-300)
    return {"rel_error": float(err)}


def write_report_json(report: DecayReport | dict, path):
    d = report.to_dict() if isinstance(report, DecayReport) else report
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2)


def write_singular_values_csv(report: DecayReport, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["j", "sigma"])
        for j, s in enumerate(report.singular_values, start=1):
            wr.writerow([j, f"{s:.17g}"])
