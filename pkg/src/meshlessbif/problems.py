"""Benchmark PDEs written as collocation residuals over the network output weights.

Every problem stacks its unknown fields into one weight vector ``[w_u; w_v]``
(one block of ``N`` weights per field, all fields share the same hidden
layer) and its residual into ``[F_u; F_v]`` (one block of ``M`` rows per
field). Within a block, rows follow the collocation point order; boundary
points carry the boundary condition instead of the PDE.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar

import numpy as np

from .basis import Domain, FeatureMatrices, RpnnBasis, eval_features, sample_basis

PROBLEM_NAMES = ("bratu1d", "bratu2d", "fhn", "allen_cahn")


@dataclass(frozen=True, eq=False)
class CollocationSet:
    points: np.ndarray  # (M, d)
    is_boundary: np.ndarray  # (M,) bool

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def m_bc(self) -> int:
        return int(self.is_boundary.sum())

    @property
    def m_pde(self) -> int:
        return self.n_points - self.m_bc


def grid_collocation(domain: Domain, n_per_dim, random_interior: bool = False, seed: int = 0) -> CollocationSet:
    """Equispaced tensor grid on ``domain`` with its boundary nodes flagged.

    With ``random_interior`` the interior nodes are redrawn uniformly at random
    (boundary nodes stay on the grid).
    """
    counts = np.broadcast_to(np.asarray(n_per_dim, dtype=int), (domain.dim,))
    axes = [np.linspace(a, b, int(n)) for (a, b), n in zip(domain.bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    on_edge = np.zeros(points.shape[0], dtype=bool)
    for q, ax in enumerate(axes):
        on_edge |= (points[:, q] == ax[0]) | (points[:, q] == ax[-1])
    if random_interior:
        rng = np.random.default_rng(seed)
        n_int = int((~on_edge).sum())
        points = points.copy()
        points[~on_edge] = domain.lower + rng.uniform(size=(n_int, domain.dim)) * domain.lengths
    points.setflags(write=False)
    on_edge.setflags(write=False)
    return CollocationSet(points, on_edge)


@dataclass(frozen=True)
class ConstraintMask:
    b_diag: np.ndarray

    @property
    def n_zeros(self) -> int:
        return int(np.sum(self.b_diag == 0))


@dataclass(frozen=True, eq=False)
class Linearization:
    """Pointwise linearized operator ``J_u`` at the collocation points.

    ``(J_u phi)_a = sum_b c0[a][b] * phi_b + sum_q c1[a][b][q] * d_q phi_b
    + sum_q c2[a][b][q] * d_qq phi_b`` evaluated row by row, with ``a`` the
    residual block and ``b`` the field. Each coefficient is a length-``M``
    array (or ``None`` when absent).
    """

    c0: list
    c1: list
    c2: list

    def apply_to_features(self, feats: FeatureMatrices) -> np.ndarray:
        """Return ``J_u`` applied to every basis column of every field, i.e. ``J_u Psi``."""
        nf = len(self.c0)
        m, n = feats.shape
        out = np.zeros((nf * m, nf * n))
        for a in range(nf):
            for b in range(nf):
                blk = np.zeros((m, n))
                if self.c0[a][b] is not None:
                    blk += self.c0[a][b][:, None] * feats.psi
                for q, dq in enumerate(feats.dpsi):
                    c = self.c1[a][b]
                    if c is not None and c[q] is not None:
                        blk += c[q][:, None] * dq
                for q, d2q in enumerate(feats.d2psi):
                    c = self.c2[a][b]
                    if c is not None and c[q] is not None:
                        blk += c[q][:, None] * d2q
                out[a * m:(a + 1) * m, b * n:(b + 1) * n] = blk
        return out


@dataclass(frozen=True, eq=False)
class ProblemDef:
    """A PDE instance discretized on a collocation set in a random basis.

    Subclasses define the residual rows and their derivatives. ``fixed_params``
    holds every scalar the problem needs other than the continuation parameter.
    """

    name: str
    domain: Domain
    colloc: CollocationSet
    basis: RpnnBasis
    fixed_params: dict = field(default_factory=dict)

    n_fields: ClassVar[int] = 1
    bifurcation_param_name: ClassVar[str] = "mu"
    required_params: ClassVar[tuple] = ()
    field_names: ClassVar[tuple] = ("u",)

    def __post_init__(self):
        missing = set(self.required_params) - set(self.fixed_params)
        extra = set(self.fixed_params) - set(self.required_params)
        if missing or extra:
            raise ValueError(
                f"{self.name}: fixed_params must be exactly {sorted(self.required_params)}; "
                f"missing={sorted(missing)} unknown={sorted(extra)}"
            )

    @cached_property
    def features(self) -> FeatureMatrices:
        return eval_features(self.basis, self.colloc.points)

    @property
    def n_neurons(self) -> int:
        return self.basis.n_neurons

    @property
    def n_points(self) -> int:
        return self.colloc.n_points

    @property
    def n_weights(self) -> int:
        return self.n_fields * self.n_neurons

    @property
    def n_rows(self) -> int:
        return self.n_fields * self.n_points

    @cached_property
    def psi_blocks(self) -> np.ndarray:
        """Block-diagonal ``Psi`` mapping stacked weights to stacked field values."""
        return np.kron(np.eye(self.n_fields), self.features.psi)

    def check_weights(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_weights,):
            raise ValueError(f"{self.name}: expected {self.n_weights} weights, got shape {w.shape}")
        return w

    def fields(self, w) -> np.ndarray:
        """Field values at the collocation points, shape ``(n_fields, M)``."""
        w = self.check_weights(w)
        return (self.features.psi @ w.reshape(self.n_fields, self.n_neurons).T).T

    def field_values(self, w) -> np.ndarray:
        return self.fields(w).ravel()

    def fit_weights(self, values, svd_tol: float = 1e-12) -> np.ndarray:
        """Least-squares weights reproducing given field values at the collocation points."""
        from .solver import pinv_apply, truncated_svd

        values = np.asarray(values, dtype=float).reshape(self.n_fields, self.n_points)
        f = truncated_svd(self.features.psi, svd_tol)
        return np.concatenate([pinv_apply(f, values[i]) for i in range(self.n_fields)])

    def constraint_mask(self) -> ConstraintMask:
        b = np.tile(np.where(self.colloc.is_boundary, 0.0, 1.0), self.n_fields)
        return ConstraintMask(b)

    def _blocks(self, w):
        """Per-field (value, first-derivative list, laplacian) arrays at the points."""
        w = self.check_weights(w).reshape(self.n_fields, self.n_neurons)
        f = self.features
        out = []
        for wf in w:
            out.append((f.psi @ wf, [d @ wf for d in f.dpsi], f.laplacian @ wf))
        return out

    # subclasses implement these three
    def residual(self, w, mu) -> np.ndarray:
        raise NotImplementedError

    def jacobian_w(self, w, mu) -> np.ndarray:
        raise NotImplementedError

    def jacobian_mu(self, w, mu) -> np.ndarray:
        raise NotImplementedError

    def linearization(self, w, mu) -> Linearization:
        raise NotImplementedError


class Bratu(ProblemDef):
    """``Laplace(u) + p exp(u) = 0`` on the unit interval/square, ``u = 0`` on the boundary."""

    bifurcation_param_name = "p"

    def residual(self, w, mu):
        (u, _, lap), = self._blocks(w)
        bnd = self.colloc.is_boundary
        return np.where(bnd, u, lap + mu * np.exp(u))

    def jacobian_w(self, w, mu):
        (u, _, _), = self._blocks(w)
        f = self.features
        bnd = self.colloc.is_boundary[:, None]
        interior = f.laplacian + (mu * np.exp(u))[:, None] * f.psi
        return np.where(bnd, f.psi, interior)

    def jacobian_mu(self, w, mu):
        (u, _, _), = self._blocks(w)
        return np.where(self.colloc.is_boundary, 0.0, np.exp(u))

    def linearization(self, w, mu):
        (u, _, _), = self._blocks(w)
        bnd = self.colloc.is_boundary
        d = self.domain.dim
        c0 = np.where(bnd, 1.0, mu * np.exp(u))
        c2 = [np.where(bnd, 0.0, 1.0)] * d
        return Linearization([[c0]], [[None]], [[c2]])


class FitzHughNagumo(ProblemDef):
    """Steady FitzHugh-Nagumo system with homogeneous Neumann conditions on both fields.

    ``Du u'' + u - u^3 - v = 0`` and ``Dv v'' + eps (u - a1 v - a0) = 0``.
    """

    n_fields = 2
    bifurcation_param_name = "eps"
    required_params = ("Du", "Dv", "a0", "a1")
    field_names = ("u", "v")

    def residual(self, w, mu):
        (u, du, uxx), (v, dv, vxx) = self._blocks(w)
        p = self.fixed_params
        bnd = self.colloc.is_boundary
        fu = np.where(bnd, du[0], p["Du"] * uxx + u - u**3 - v)
        fv = np.where(bnd, dv[0], p["Dv"] * vxx + mu * (u - p["a1"] * v - p["a0"]))
        return np.concatenate([fu, fv])

    def jacobian_w(self, w, mu):
        (u, _, _), _ = self._blocks(w)
        p = self.fixed_params
        f = self.features
        bnd = self.colloc.is_boundary[:, None]
        zero = np.zeros_like(f.psi)
        j_uu = np.where(bnd, f.dpsi[0], p["Du"] * f.d2psi[0] + (1.0 - 3.0 * u**2)[:, None] * f.psi)
        j_uv = np.where(bnd, zero, -f.psi)
        j_vu = np.where(bnd, zero, mu * f.psi)
        j_vv = np.where(bnd, f.dpsi[0], p["Dv"] * f.d2psi[0] - mu * p["a1"] * f.psi)
        return np.block([[j_uu, j_uv], [j_vu, j_vv]])

    def jacobian_mu(self, w, mu):
        (u, _, _), (v, _, _) = self._blocks(w)
        p = self.fixed_params
        bnd = self.colloc.is_boundary
        return np.concatenate([np.zeros(self.n_points), np.where(bnd, 0.0, u - p["a1"] * v - p["a0"])])

    def linearization(self, w, mu):
        (u, _, _), _ = self._blocks(w)
        p = self.fixed_params
        bnd = self.colloc.is_boundary
        inner = np.where(bnd, 0.0, 1.0)
        edge = 1.0 - inner
        c0 = [
            [inner * (1.0 - 3.0 * u**2), -inner],
            [inner * mu, -inner * mu * p["a1"]],
        ]
        c1 = [[[edge], None], [None, [edge]]]
        c2 = [[[inner * p["Du"]], None], [None, [inner * p["Dv"]]]]
        return Linearization(c0, c1, c2)


class AllenCahn(ProblemDef):
    """Steady Allen-Cahn ``eps u'' - (u^3 - u)/eps = 0`` on ``[-1, 1]`` with ``u' = 0`` at both ends."""

    bifurcation_param_name = "eps"
    min_eps = 1e-4

    def _check_eps(self, mu):
        if mu < self.min_eps:
            raise ValueError(f"allen_cahn requires eps >= {self.min_eps}, got {mu}")

    def residual(self, w, mu):
        self._check_eps(mu)
        (u, du, uxx), = self._blocks(w)
        bnd = self.colloc.is_boundary
        return np.where(bnd, du[0], mu * uxx - (u**3 - u) / mu)

    def jacobian_w(self, w, mu):
        self._check_eps(mu)
        (u, _, _), = self._blocks(w)
        f = self.features
        bnd = self.colloc.is_boundary[:, None]
        interior = mu * f.d2psi[0] - ((3.0 * u**2 - 1.0) / mu)[:, None] * f.psi
        return np.where(bnd, f.dpsi[0], interior)

    def jacobian_mu(self, w, mu):
        self._check_eps(mu)
        (u, _, uxx), = self._blocks(w)
        return np.where(self.colloc.is_boundary, 0.0, uxx + (u**3 - u) / mu**2)

    def linearization(self, w, mu):
        (u, _, _), = self._blocks(w)
        bnd = self.colloc.is_boundary
        inner = np.where(bnd, 0.0, 1.0)
        c0 = -inner * (3.0 * u**2 - 1.0) / mu
        return Linearization([[c0]], [[[1.0 - inner]]], [[[inner * mu]]])


# name -> (class, domain bounds, collocation points per dim, neurons, default fixed params)
DEFAULTS = {
    "bratu1d": (Bratu, ((0.0, 1.0),), 101, 50, {}),
    "bratu2d": (Bratu, ((0.0, 1.0), (0.0, 1.0)), 21, 800, {}),
    "fhn": (FitzHughNagumo, ((0.0, 20.0),), 201, 200, {"Du": 1.0, "Dv": 4.0, "a0": -0.03, "a1": 2.0}),
    "allen_cahn": (AllenCahn, ((-1.0, 1.0),), 201, 200, {}),
}


def make_problem(
    name: str,
    n_neurons: int | None = None,
    n_points=None,
    seed: int = 0,
    fixed_params: dict | None = None,
    centers: str = "uniform",
    alpha_upper=None,
    random_points: bool = False,
) -> ProblemDef:
    """Build one of the named benchmark problems with its default discretization.

    ``n_points`` is the number of collocation points per dimension. In 2D the
    slope bound uses the per-dimension count, i.e. the 1D rule applied along
    each axis.
    """
    if name not in DEFAULTS:
        raise ValueError(f"unknown problem {name!r}; expected one of {PROBLEM_NAMES}")
    cls, bounds, m_def, n_def, p_def = DEFAULTS[name]
    n_neurons = n_def if n_neurons is None else int(n_neurons)
    n_points = m_def if n_points is None else int(n_points)
    params = dict(p_def)
    if fixed_params:
        unknown = set(fixed_params) - set(p_def)
        if unknown:
            raise ValueError(f"{name}: unknown parameters {sorted(unknown)}")
        params.update({k: float(v) for k, v in fixed_params.items()})
    domain = Domain(bounds)
    colloc = grid_collocation(domain, n_points, random_interior=random_points, seed=seed)
    basis = sample_basis(domain, n_neurons, n_points, seed, centers=centers, alpha_upper=alpha_upper)
    return cls(name, domain, colloc, basis, params)


def residual(problem: ProblemDef, weights, mu) -> np.ndarray:
    return problem.residual(weights, mu)


def jacobian_w(problem: ProblemDef, weights, mu) -> np.ndarray:
    return problem.jacobian_w(weights, mu)


def jacobian_mu(problem: ProblemDef, weights, mu) -> np.ndarray:
    return problem.jacobian_mu(weights, mu)


def constraint_mask(problem: ProblemDef) -> ConstraintMask:
    return problem.constraint_mask()


def bratu1d_exact(x, p: float, branch: str = "lower") -> np.ndarray:
    """Closed-form 1D Bratu solution ``2 ln(cosh t / cosh(t (1 - 2x)))``.

    ``t`` solves ``cosh t = 4 t / sqrt(2 p)``; the smaller root gives the lower
    (stable) branch, the larger one the upper branch.
    """
    from scipy.optimize import brentq, minimize_scalar

    if p <= 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    g = lambda t: np.cosh(t) - 4.0 * t / np.sqrt(2.0 * p)
    # g is convex with g(0) = 1 > 0; its minimizer separates the two roots
    t_min = minimize_scalar(g, bounds=(1e-12, 20.0), method="bounded").x
    if g(t_min) > 0:
        raise ValueError(f"no Bratu solution for p={p} (beyond the fold)")
    if branch == "lower":
        t = brentq(g, 1e-14, t_min)
    elif branch == "upper":
        t = brentq(g, t_min, 50.0)
    else:
        raise ValueError("branch must be 'lower' or 'upper'")
    x = np.asarray(x, dtype=float)
    return 2.0 * np.log(np.cosh(t) / np.cosh(t * (1.0 - 2.0 * x)))
