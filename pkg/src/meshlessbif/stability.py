"""Leading eigenpairs of the physical Jacobian through the weight-space pencil.

The generalized problem ``J_u phi = lam B phi`` is never formed in physical
space. With ``phi = Psi v`` and ``J_w = J_u Psi`` it becomes the rectangular
pencil ``J_w v = lam (B Psi) v``; eigenvalues closest to a shift ``sigma``
are the largest-magnitude eigenvalues ``theta`` of
``T = (J_w - sigma B Psi)^+ (B Psi)``, with ``lam = sigma + 1/theta``.
``T`` is applied through the truncated SVD factors of ``J_w - sigma B Psi``.

For comparison the module also implements the naive route
``J_u = J_w Psi^+`` followed by a dense generalized eigensolve, plus the
three-way spectrum classification used to flag its artefacts.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy.linalg.blas import daxpy, ddot

from .solver import SvdFactors, pinv_apply, truncated_svd

logger = logging.getLogger(__name__)

GROUPS = ("physical", "spurious_near_zero", "boundary_infinite")


class ShiftDegenerateWarning(RuntimeWarning):
    pass


class ConvergenceWarning(RuntimeWarning):
    pass


class PencilDegenerateError(ArithmeticError):
    pass


@dataclass(eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray  # complex (k,)
    weight_vectors: np.ndarray  # (N_total, k), columns
    physical_vectors: np.ndarray  # (M_total, k), columns
    residuals: np.ndarray  # (k,)
    shift: float | None
    groups: np.ndarray  # (k,) labels from GROUPS
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.eigenvalues.size

    def select(self, idx) -> "SpectrumResult":
        idx = np.asarray(idx)
        return replace(
            self,
            eigenvalues=self.eigenvalues[idx],
            weight_vectors=self.weight_vectors[:, idx],
            physical_vectors=self.physical_vectors[:, idx],
            residuals=self.residuals[idx],
            groups=self.groups[idx],
        )

    def physical(self) -> "SpectrumResult":
        return self.select(np.flatnonzero(self.groups == "physical"))

    def leading(self) -> complex:
        """Physical eigenvalue with the largest real part."""
        phys = self.eigenvalues[self.groups == "physical"]
        return phys[np.argmax(phys.real)]


def normalize_vectors(vecs: np.ndarray, *others: np.ndarray):
    """Scale columns to unit max-norm with their first largest entry real and positive.

    ``others`` are rescaled by the same per-column factors (used to keep
    weight vectors consistent with their physical images).
    """
    vecs = np.array(vecs, dtype=complex if np.iscomplexobj(vecs) else float)
    if vecs.ndim == 1:
        vecs = vecs[:, None]
    idx = np.argmax(np.abs(vecs), axis=0)
    pivot = vecs[idx, np.arange(vecs.shape[1])]
    pivot = np.where(pivot == 0, 1.0, pivot)
    out = vecs / pivot
    if np.iscomplexobj(out) and np.all(np.abs(out.imag) <= 1e-14 * np.maximum(1.0, np.abs(out.real))):
        out = out.real
    if not others:
        return out
    scaled = []
    for o in others:
        o = np.asarray(o) / pivot
        if np.iscomplexobj(o) and not np.iscomplexobj(out):
            o = o.real
        scaled.append(o)
    return (out, *scaled)


@dataclass(frozen=True, eq=False)
class PencilOperator:
    """Factored shift-invert operator ``y -> V S^-1 U^T (B Psi) y``."""

    svd_a_sigma: SvdFactors
    b_psi: np.ndarray
    j_w: np.ndarray
    psi: np.ndarray
    sigma: float

    @property
    def dims(self) -> tuple[int, int]:
        return self.b_psi.shape

    def __call__(self, y):
        return apply(self, y)


def build_pencil(j_w, psi, mask, sigma: float = 1.0, svd_tol: float = 1e-14) -> PencilOperator:
    """Assemble ``B Psi`` and factor ``A_sigma = J_w - sigma B Psi``.

    ``psi`` maps stacked weights to stacked field values (block-diagonal for
    multi-field problems); ``mask`` is a ConstraintMask or its 0/1 diagonal.
    """
    j_w = np.asarray(j_w, dtype=float)
    psi = np.asarray(psi, dtype=float)
    b = np.asarray(getattr(mask, "b_diag", mask), dtype=float)
    if j_w.shape != psi.shape:
        raise ValueError(f"J_w {j_w.shape} and Psi {psi.shape} must have the same shape")
    if b.shape != (j_w.shape[0],):
        raise ValueError(f"mask length {b.shape} does not match {j_w.shape[0]} rows")
    if np.iscomplexobj(sigma) or np.imag(sigma) != 0:
        raise ValueError("only real shifts are supported")
    sigma = float(np.real(sigma))
    b_psi = b[:, None] * psi
    b_psi[b == 0] = 0.0
    fac = truncated_svd(j_w - sigma * b_psi, svd_tol)
    return PencilOperator(fac, b_psi, j_w, psi, sigma)


def apply(op: PencilOperator, y) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[0] != op.b_psi.shape[1]:
        raise ValueError(f"vector has length {y.shape[0]}, operator expects {op.b_psi.shape[1]}")
    return pinv_apply(op.svd_a_sigma, op.b_psi @ y)


def pencil_residuals(j_w, b_psi, lam, v) -> np.ndarray:
    """``||J_w v - lam B Psi v|| / ||J_w v||`` per column."""
    jv = j_w @ v
    r = jv - (b_psi @ v) * lam
    return np.linalg.norm(r, axis=0) / np.maximum(np.linalg.norm(jv, axis=0), 1e-300)


def _mgs(Vt, w, j):
    """Two passes of modified Gram-Schmidt of ``w`` against the rows ``Vt[:j]``."""
    h = np.zeros(j)
    w = np.array(w, dtype=float)
    for _ in range(2):
        for i in range(j):
            c = ddot(Vt[i], w)
            w = daxpy(Vt[i], w, a=-c)
            h[i] += c
    return w, h


def _ordered_schur(H, p):
    """Real Schur form of ``H`` with the ``p`` largest-|theta| eigenvalues leading."""
    ev = np.linalg.eigvals(H)
    mags = np.sort(np.abs(ev))[::-1]
    thresh = mags[min(p, mags.size) - 1]
    # the relative slack keeps conjugate partners (equal modulus) together
    T, Z, sdim = scipy.linalg.schur(
        H, output="real", sort=lambda re, im: np.hypot(re, im) >= thresh * (1 - 1e-12)
    )
    return T, Z, sdim


def arnoldi_eigs(
    op: PencilOperator,
    k: int = 6,
    krylov_dim: int | None = None,
    tol: float = 1e-12,
    max_restarts: int = 200,
    seed: int = 0,
    v0=None,
    residual_tol: float | None = None,
    shift_tol: float = 1e-5,
) -> SpectrumResult:
    """Thick-restarted (Krylov-Schur) Arnoldi for the ``k`` eigenvalues nearest the shift.

    The Krylov basis is orthogonalized with two passes of modified
    Gram-Schmidt. After every cycle the Hessenberg matrix is brought to an
    ordered real Schur form, so complex conjugate Ritz pairs live in 2x2
    blocks and the arithmetic stays real. Up to ``2k`` Schur vectors are
    kept on restart.

    A Ritz pair counts as converged when its Hessenberg residual estimate is
    below ``tol * |theta|``. Returned eigenvalues are ``sigma + 1/theta``
    sorted by decreasing real part; if the ``k``-th one has its complex
    conjugate just outside the selection, the partner is included too.

    A ``ShiftDegenerateWarning`` is raised when an eigenvalue comes back
    within ``shift_tol * max(1, |sigma|)`` of the shift.
    """
    n = op.dims[1]
    if k < 1:
        raise ValueError("k must be >= 1")
    if krylov_dim is None:
        krylov_dim = max(3 * k + 2, 20)
    krylov_dim = min(krylov_dim, n)
    if not k < krylov_dim <= n:
        raise ValueError(f"need k < krylov_dim <= N (k={k}, krylov_dim={krylov_dim}, N={n})")
    m = krylov_dim
    keep = min(2 * k, m - 2) if m - 2 >= k else k

    rng = np.random.default_rng(seed)
    # basis stored by rows so each Gram-Schmidt projection reads contiguous memory
    Vt = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    v = rng.standard_normal(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    # start inside the range of T so null directions (theta = 0) never enter
    v = apply(op, v)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("start vector is annihilated by the operator")
    Vt[0] = v / nv

    start = 0
    m_eff = m
    ortho_err = []
    converged = False
    n_restarts = 0
    breakdown = False
    for cycle in range(max_restarts + 1):
        m_eff = m
        for j in range(start, m):
            w = apply(op, Vt[j])
            w, h = _mgs(Vt, w, j + 1)
            H[: j + 1, j] += h
            beta = np.linalg.norm(w)
            H[j + 1, j] = beta
            if beta <= 1e-14 * max(1.0, np.abs(H[: j + 1, j]).max()):
                m_eff = j + 1
                breakdown = True
                break
            Vt[j + 1] = w / beta
        Q = Vt[: m_eff + (0 if breakdown else 1)]
        ortho_err.append(float(np.linalg.norm(Q @ Q.T - np.eye(Q.shape[0]))))

        Hm = H[:m_eff, :m_eff]
        theta, Y = np.linalg.eig(Hm)
        order = np.argsort(-np.abs(theta), kind="stable")
        theta, Y = theta[order], Y[:, order]
        beta_last = 0.0 if breakdown else H[m_eff, m_eff - 1]
        est = np.abs(beta_last * Y[-1, :]) / np.linalg.norm(Y, axis=0)
        n_want = min(k, m_eff)
        ok = est[:n_want] <= tol * np.maximum(np.abs(theta[:n_want]), 1e-300)
        if np.all(ok) or breakdown or cycle == max_restarts:
            converged = bool(np.all(ok))
            break

        # Krylov-Schur restart: keep the leading invariant-ish subspace
        n_restarts += 1
        T, Z, sdim = _ordered_schur(Hm, keep)
        p = max(min(sdim, m_eff - 1), 1)
        Vt[:p] = Z[:, :p].T @ Vt[:m_eff]
        Vt[p] = Vt[m_eff]
        Vt[p + 1:] = 0.0
        H[:] = 0.0
        H[:p, :p] = T[:p, :p]
        H[p, :p] = beta_last * Z[m_eff - 1, :p]
        start = p

    if not converged:
        warnings.warn(
            f"Arnoldi: only {int(np.sum(ok))} of {n_want} Ritz pairs converged after {n_restarts} restarts",
            ConvergenceWarning,
            stacklevel=2,
        )

    # conjugate partner of the last selected Ritz value
    sel = n_want
    if sel < theta.size and abs(theta[sel - 1].imag) > 0 and np.isclose(theta[sel], np.conj(theta[sel - 1])):
        sel += 1
    theta, Y, est = theta[:sel], Y[:, :sel], est[:sel]
    conv_mask = est <= tol * np.abs(theta)
    X = Vt[:m_eff].T @ Y  # weight-space Ritz vectors
    lam = op.sigma + 1.0 / theta
    # a shift on top of an eigenvalue drops that direction from the truncated
    # factorization; what comes back is a Ritz value stuck next to sigma
    if np.any(np.abs(lam - op.sigma) <= shift_tol * max(1.0, abs(op.sigma))):
        warnings.warn("shift coincides with an eigenvalue", ShiftDegenerateWarning, stacklevel=2)

    phys = op.psi @ X
    phys, X = normalize_vectors(phys, X)
    if not np.iscomplexobj(lam) or np.all(lam.imag == 0):
        lam = lam.astype(complex)
    res = pencil_residuals(op.j_w, op.b_psi, lam, X)
    order = np.argsort(-lam.real, kind="stable")
    info = {
        "converged": conv_mask[order],
        "ritz_estimates": est[order],
        "theta": theta[order],
        "n_restarts": n_restarts,
        "orthonormality": ortho_err,
        "krylov_dim": m,
        "svd_rank": op.svd_a_sigma.rank,
        "happy_breakdown": breakdown,
    }
    groups = np.array(["physical"] * lam.size, dtype=object)
    out = SpectrumResult(lam[order], X[:, order], phys[:, order], res[order], op.sigma, groups, info)
    if residual_tol is not None and np.any(out.residuals > residual_tol):
        warnings.warn(
            f"pencil residuals up to {out.residuals.max():.2e} exceed {residual_tol:.1e}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return out


def shift_invert_eigs(problem, weights, mu, k=6, sigma=1.0, svd_tol=1e-14, **kw) -> SpectrumResult:
    """Convenience wrapper: pencil at a steady state of ``problem`` followed by Arnoldi."""
    j_w = problem.jacobian_w(weights, mu)
    op = build_pencil(j_w, problem.psi_blocks, problem.constraint_mask(), sigma, svd_tol)
    return arnoldi_eigs(op, k=k, **kw)


def naive_physical_jacobian(j_w, psi, pinv_tol: float = 1e-8) -> np.ndarray:
    """``J_u = J_w Psi^+`` with a truncated (relative ``pinv_tol``) pseudo-inverse."""
    j_w = np.asarray(j_w, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if j_w.shape != psi.shape:
        raise ValueError("J_w and Psi must have the same shape")
    f = truncated_svd(psi, pinv_tol)
    return ((j_w @ f.v_mat) / f.s_vals) @ f.u_mat.T


def dense_generalized_eigs(j_u, mask, method: str = "condense", cond_limit: float = 1e12) -> SpectrumResult:
    """All eigenpairs of ``J_u phi = lam B phi`` for a 0/1 diagonal ``B``.

    ``method="condense"`` eliminates the constraint unknowns,
    ``phi_G = -J_GG^-1 J_GI phi_I``, and solves the standard eigenproblem of
    the interior Schur complement; each constraint row contributes one
    infinite eigenvalue. If ``J_GG`` is numerically singular the QZ path
    (``method="qz"``) is used instead.
    """
    j_u = np.asarray(j_u, dtype=float)
    b = np.asarray(getattr(mask, "b_diag", mask), dtype=float)
    if j_u.ndim != 2 or j_u.shape[0] != j_u.shape[1]:
        raise ValueError("J_u must be square")
    if b.shape != (j_u.shape[0],):
        raise ValueError("mask length must match J_u")
    inner = np.flatnonzero(b != 0)
    cons = np.flatnonzero(b == 0)
    m = j_u.shape[0]

    if method == "condense" and cons.size:
        j_gg = j_u[np.ix_(cons, cons)]
        if np.linalg.cond(j_gg) > cond_limit:
            logger.info("constraint block is singular, falling back to QZ")
            method = "qz"
    if method == "condense":
        if cons.size:
            j_gg = j_u[np.ix_(cons, cons)]
            elim = np.linalg.solve(j_gg, j_u[np.ix_(cons, inner)])
            schur = j_u[np.ix_(inner, inner)] - j_u[np.ix_(inner, cons)] @ elim
            # B is the identity on interior rows, so the pencil reduces to b_I * lam
            lam, y = scipy.linalg.eig(schur / b[inner][:, None])
            vec = np.zeros((m, lam.size), dtype=complex)
            vec[inner] = y
            vec[cons] = -elim @ y
        else:
            lam, vec = scipy.linalg.eig(j_u / b[:, None])
        inf_vec = np.zeros((m, cons.size))
        inf_vec[cons, np.arange(cons.size)] = 1.0
        lam = np.concatenate([lam, np.full(cons.size, np.inf + 0j)])
        vec = np.concatenate([vec, inf_vec], axis=1)
        finite = np.isfinite(lam)
    elif method == "qz":
        (alpha, beta), vec = scipy.linalg.eig(j_u, np.diag(b), homogeneous_eigvals=True)
        finite = np.abs(beta) > 1e-13 * np.maximum(np.abs(alpha), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(finite, alpha / np.where(finite, beta, 1.0), np.inf + 0j)
        if np.any((np.abs(alpha) < 1e-13 * np.abs(j_u).max()) & ~finite):
            raise PencilDegenerateError("pencil has an indeterminate 0/0 eigenvalue")
    else:
        raise ValueError(f"unknown method {method!r}")

    vec = normalize_vectors(vec)
    order = np.lexsort((-np.where(finite, lam.real, -np.inf), ~finite))
    lam, vec, finite = lam[order], vec[:, order], finite[order]
    jv = j_u @ vec
    res = np.where(
        finite,
        np.linalg.norm(jv - (b[:, None] * vec) * np.where(finite, lam, 0), axis=0)
        / np.maximum(np.linalg.norm(jv, axis=0), 1e-300),
        0.0,
    )
    groups = np.where(finite, "physical", "boundary_infinite").astype(object)
    return SpectrumResult(lam, vec, vec, res, None, groups, {"method": method})


def classify_spectrum(raw: SpectrumResult, psi, psi_tol: float = 1e-8, zero_tol: float | None = None) -> SpectrumResult:
    """Label each eigenpair ``physical``, ``spurious_near_zero`` or ``boundary_infinite``.

    Spurious: ``|lam| <= zero_tol`` and more than half of the eigenvector's
    norm lies outside the range of the truncated ``Psi``. ``zero_tol``
    defaults to ``1e-6 * max |lam|`` over finite eigenvalues.
    """
    lam = raw.eigenvalues
    finite = np.isfinite(lam)
    if zero_tol is None:
        zero_tol = 1e-6 * (np.abs(lam[finite]).max() if finite.any() else 0.0)
    f = truncated_svd(psi, psi_tol)
    phi = raw.physical_vectors
    outside = phi - f.u_mat @ (f.u_mat.T @ phi)
    frac = np.linalg.norm(outside, axis=0) / np.maximum(np.linalg.norm(phi, axis=0), 1e-300)
    groups = np.where(~finite, "boundary_infinite", "physical").astype(object)
    spurious = finite & (np.abs(lam) <= zero_tol) & (frac > 0.5)
    groups[spurious] = "spurious_near_zero"
    info = dict(raw.info, psi_rank=f.rank, zero_tol=zero_tol, outside_fraction=frac)
    return replace(raw, groups=groups, info=info)
