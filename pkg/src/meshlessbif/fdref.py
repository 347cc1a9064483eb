"""Second-order finite-difference reference for the three benchmarks.

Used only as an independent oracle: it shares no code with the network
discretization beyond the problem names and parameter values.

Unknown layout: Bratu keeps interior nodes only (Dirichlet values are
eliminated); FitzHugh-Nagumo and Allen-Cahn keep every node and close the
Laplacian with mirrored ghost points, stacking ``[u; v]`` for FHN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .problems import DEFAULTS


@dataclass(frozen=True, eq=False)
class FdProblem:
    name: str
    params: dict
    axes: tuple  # grid nodes per dimension, boundary included
    laplacian: np.ndarray = field(repr=False)  # acting on the unknown layout of one field
    n_fields: int = 1

    @property
    def n_unknowns(self) -> int:
        return self.n_fields * self.laplacian.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        """Coordinates of the unknowns of a single field, shape ``(n, d)``."""
        if self.name.startswith("bratu"):
            inner = [ax[1:-1] for ax in self.axes]
        else:
            inner = list(self.axes)
        mesh = np.meshgrid(*inner, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    # the continuation driver sees the grid values as "weights" with Psi = I
    @property
    def psi_blocks(self) -> np.ndarray:
        return np.eye(self.n_unknowns)

    def field_values(self, U) -> np.ndarray:
        return np.asarray(U, dtype=float)

    def fields(self, U) -> np.ndarray:
        return np.asarray(U, dtype=float).reshape(self.n_fields, -1)

    def jacobian_w(self, U, mu) -> np.ndarray:
        return self.jacobian(U, mu)

    def check_weights(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.shape != (self.n_unknowns,):
            raise ValueError(f"expected {self.n_unknowns} grid values")
        return U

    def residual(self, U, mu) -> np.ndarray:
        p = self.params
        L = self.laplacian
        if self.name.startswith("bratu"):
            return L @ U + mu * np.exp(U)
        if self.name == "allen_cahn":
            return mu * (L @ U) - (U**3 - U) / mu
        u, v = np.split(U, 2)
        fu = p["Du"] * (L @ u) + u - u**3 - v
        fv = p["Dv"] * (L @ v) + mu * (u - p["a1"] * v - p["a0"])
        return np.concatenate([fu, fv])

    def jacobian(self, U, mu) -> np.ndarray:
        p = self.params
        L = self.laplacian
        if self.name.startswith("bratu"):
            return L + np.diag(mu * np.exp(U))
        if self.name == "allen_cahn":
            return mu * L - np.diag((3.0 * U**2 - 1.0) / mu)
        u, _ = np.split(U, 2)
        n = u.size
        eye = np.eye(n)
        return np.block(
            [
                [p["Du"] * L + np.diag(1.0 - 3.0 * u**2), -eye],
                [mu * eye, p["Dv"] * L - mu * p["a1"] * eye],
            ]
        )

    def jacobian_mu(self, U, mu) -> np.ndarray:
        p = self.params
        if self.name.startswith("bratu"):
            return np.exp(U)
        if self.name == "allen_cahn":
            return self.laplacian @ U + (U**3 - U) / mu**2
        u, v = np.split(U, 2)
        return np.concatenate([np.zeros_like(u), u - p["a1"] * v - p["a0"]])


def second_difference_dirichlet(n_nodes: int, h: float) -> np.ndarray:
    """Interior 3-point Laplacian with zero Dirichlet values eliminated."""
    m = n_nodes - 2
    return (np.diag(-2.0 * np.ones(m)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / h**2


def second_difference_neumann(n_nodes: int, h: float) -> np.ndarray:
    """3-point Laplacian on all nodes with a mirrored ghost node at each end."""
    L = np.diag(-2.0 * np.ones(n_nodes)) + np.diag(np.ones(n_nodes - 1), 1) + np.diag(np.ones(n_nodes - 1), -1)
    L[0, 1] = 2.0
    L[-1, -2] = 2.0
    return L / h**2


def make_fd_problem(name: str, n_points: int | None = None, params: dict | None = None) -> FdProblem:
    if name not in DEFAULTS:
        raise ValueError(f"unknown problem {name!r}")
    _, bounds, m_def, _, p_def = DEFAULTS[name]
    n = m_def if n_points is None else int(n_points)
    prm = dict(p_def)
    prm.update(params or {})
    axes = tuple(np.linspace(a, b, n) for a, b in bounds)
    h = axes[0][1] - axes[0][0]
    if name == "bratu1d":
        L = second_difference_dirichlet(n, h)
    elif name == "bratu2d":
        L1 = second_difference_dirichlet(n, h)
        eye = np.eye(n - 2)
        L = np.kron(L1, eye) + np.kron(eye, L1)
    else:
        L = second_difference_neumann(n, h)
    return FdProblem(name, prm, axes, L, 2 if name == "fhn" else 1)


@dataclass
class FdSolution:
    problem: FdProblem
    values: np.ndarray
    mu: float
    residual_norm: float
    iterations: int
    converged: bool

    def full_field(self, k: int = 0) -> np.ndarray:
        """Field ``k`` on every grid node, Dirichlet zeros re-inserted for Bratu."""
        pr = self.problem
        if pr.name == "bratu1d":
            return np.concatenate([[0.0], self.values, [0.0]])
        if pr.name == "bratu2d":
            n = pr.axes[0].size
            full = np.zeros((n, n))
            full[1:-1, 1:-1] = self.values.reshape(n - 2, n - 2)
            return full.ravel()
        return np.split(self.values, pr.n_fields)[k]


def fd_solve(
    problem: FdProblem | str,
    mu: float,
    u0=None,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 20,
) -> FdSolution:
    """Damped Newton on the finite-difference system until ``||F||_inf <= tol``."""
    pr = make_fd_problem(problem) if isinstance(problem, str) else problem
    U = np.zeros(pr.n_unknowns) if u0 is None else np.array(u0, dtype=float)
    if U.shape != (pr.n_unknowns,):
        raise ValueError(f"u0 must have {pr.n_unknowns} entries")
    F = pr.residual(U, mu)
    res = float(np.max(np.abs(F)))
    for it in range(max_iter + 1):
        if res <= tol:
            return FdSolution(pr, U, mu, res, it, True)
        if it == max_iter:
            break
        dU = -np.linalg.solve(pr.jacobian(U, mu), F)
        t = 1.0
        for _ in range(max_halvings):
            U_new = U + t * dU
            F_new = pr.residual(U_new, mu)
            res_new = float(np.max(np.abs(F_new)))
            if np.isfinite(res_new) and res_new < res:
                break
            t *= 0.5
        else:
            return FdSolution(pr, U, mu, res, it, False)
        U, F, res = U_new, F_new, res_new
    return FdSolution(pr, U, mu, res, max_iter, False)


def fd_spectrum(problem: FdProblem | str, mu: float, u_star, k: int = 6):
    """Leading ``k`` eigenpairs (by real part) of the finite-difference Jacobian."""
    from .stability import SpectrumResult, normalize_vectors

    pr = make_fd_problem(problem) if isinstance(problem, str) else problem
    J = pr.jacobian(np.asarray(u_star, dtype=float), mu)
    lam, vec = scipy.linalg.eig(J)
    order = np.argsort(-lam.real, kind="stable")[:k]
    lam, vec = lam[order], normalize_vectors(vec[:, order])
    res = np.linalg.norm(J @ vec - vec * lam, axis=0) / np.maximum(np.linalg.norm(J @ vec, axis=0), 1e-300)
    return SpectrumResult(
        eigenvalues=lam,
        weight_vectors=vec,
        physical_vectors=vec,
        residuals=res,
        shift=None,
        groups=np.array(["physical"] * lam.size, dtype=object),
    )
