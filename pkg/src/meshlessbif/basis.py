"""Random logistic-sigmoid feature basis and its closed-form spatial derivatives."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

# exp() overflows just past 709.78 in double precision
Z_CLAMP = 709.0


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[a_1, b_1] x ... x [a_d, b_d]`` with ``d`` in {1, 2}."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(a), float(b)) for a, b in self.bounds)
        if len(bounds) not in (1, 2):
            raise ValueError(f"only 1D and 2D domains are supported, got dim={len(bounds)}")
        for a, b in bounds:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"invalid interval [{a}, {b}]")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def interval(cls, a: float, b: float) -> "Domain":
        return cls(((a, b),))

    @classmethod
    def box(cls, *intervals) -> "Domain":
        return cls(tuple(intervals))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.bounds])

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, points: np.ndarray, margin: float = 1e-12) -> np.ndarray:
        points = np.atleast_2d(points)
        scale = margin * np.maximum(1.0, np.abs(self.lengths))
        return np.all((points >= self.lower - scale) & (points <= self.upper + scale), axis=1)


@dataclass(frozen=True, eq=False)
class RpnnBasis:
    """Fixed hidden layer of a random projection network.

    Neuron ``j`` is ``psi_j(x) = sigmoid(alphas[j] . x + betas[j])`` with its
    inflection hyperplane passing through ``centers[j]``. The output bias is
    fixed to zero, so a field is represented purely as ``Psi @ w``.
    """

    domain: Domain
    alphas: np.ndarray  # (N, d)
    betas: np.ndarray  # (N,)
    centers: np.ndarray  # (N, d)
    seed: int
    alpha_upper: np.ndarray  # (d,) per-dimension bound

    def __post_init__(self):
        for name in ("alphas", "betas", "centers", "alpha_upper"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_neurons(self) -> int:
        return self.alphas.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim

    def to_json(self) -> str:
        payload = {
            "seed": int(self.seed),
            "N": self.n_neurons,
            "domain": [list(b) for b in self.domain.bounds],
            "alphas": self.alphas.tolist(),
            "betas": self.betas.tolist(),
            "centers": self.centers.tolist(),
            "alpha_upper": self.alpha_upper.tolist(),
        }
        # Python's float repr is shortest round-trip, i.e. at most 17 significant digits.
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "RpnnBasis":
        payload = json.loads(text)
        domain = Domain(tuple(tuple(b) for b in payload["domain"]))
        alphas = np.array(payload["alphas"], dtype=float).reshape(payload["N"], domain.dim)
        betas = np.array(payload["betas"], dtype=float)
        if "centers" in payload:
            centers = np.array(payload["centers"], dtype=float).reshape(alphas.shape)
        else:
            # 1D only: recover the inflection point from the bias
            centers = -betas[:, None] / alphas
        alpha_upper = np.array(payload.get("alpha_upper", np.abs(alphas).max(axis=0)), dtype=float)
        return cls(domain, alphas, betas, centers, int(payload["seed"]), alpha_upper)


@dataclass(frozen=True, eq=False)
class FeatureMatrices:
    """Basis values and derivatives at a point set; rows are points, columns neurons."""

    psi: np.ndarray  # (M, N)
    dpsi: tuple[np.ndarray, ...]  # d entries, each (M, N)
    d2psi: tuple[np.ndarray, ...]  # d entries, each (M, N)
    points: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.psi.shape

    @property
    def laplacian(self) -> np.ndarray:
        return sum(self.d2psi)


def default_alpha_upper(n_neurons: int, n_points: int, length: float) -> float:
    """Slope bound ``(min(N, M)/5 + 4) / |I|``."""
    return (min(n_neurons, n_points) / 5.0 + 4.0) / length


def sample_basis(
    domain: Domain,
    n_neurons: int,
    n_points,
    seed: int,
    centers: str = "uniform",
    alpha_upper=None,
) -> RpnnBasis:
    """Draw slopes uniformly in ``(-alpha_U, alpha_U)`` and centers inside ``domain``.

    ``n_points`` is the collocation count entering the slope bound. It may be a
    single integer (used for every dimension) or one count per dimension; the
    bound for dimension ``q`` uses ``min(N, n_points[q])`` and the length of
    that dimension, multiplied by ``sqrt(d)`` when ``d > 1``. Without that
    factor the plane waves are too flat for a 21 x 21 square: the 80
    boundary rows of ``Psi`` lose numerical full row rank.

    Randomness comes from ``numpy.random.SeedSequence(seed)`` spawned into two
    child streams (PCG64): child 0 draws the slopes, child 1 the centers.
    Changing the center placement therefore never perturbs the slopes.
    """
    if not isinstance(domain, Domain):
        raise TypeError("domain must be a Domain")
    n_neurons = int(n_neurons)
    if n_neurons < 1:
        raise ValueError("n_neurons must be >= 1")
    pts = np.broadcast_to(np.asarray(n_points, dtype=int), (domain.dim,))
    if np.any(pts < 2):
        raise ValueError("n_points must be >= 2")
    if seed is None or int(seed) < 0 or int(seed) >= 2**64:
        raise ValueError("seed must be a non-negative 64-bit integer")
    seed = int(seed)

    d = domain.dim
    if alpha_upper is None:
        a_up = np.array(
            [default_alpha_upper(n_neurons, int(pts[q]), domain.lengths[q]) for q in range(d)]
        ) * np.sqrt(d)
    else:
        a_up = np.broadcast_to(np.asarray(alpha_upper, dtype=float), (d,)).copy()
        if np.any(a_up <= 0):
            raise ValueError("alpha_upper must be positive")

    alpha_ss, center_ss = np.random.SeedSequence(seed).spawn(2)
    alpha_rng = np.random.Generator(np.random.PCG64(alpha_ss))
    center_rng = np.random.Generator(np.random.PCG64(center_ss))

    alphas = alpha_rng.uniform(-1.0, 1.0, size=(n_neurons, d)) * a_up
    if centers == "uniform":
        c = domain.lower + center_rng.uniform(0.0, 1.0, size=(n_neurons, d)) * domain.lengths
    elif centers == "equispaced":
        if d != 1:
            raise ValueError("equispaced centers are only defined for 1D domains")
        c = np.linspace(domain.lower[0], domain.upper[0], n_neurons)[:, None]
    else:
        raise ValueError(f"unknown center placement {centers!r}")
    betas = -np.sum(alphas * c, axis=1)
    return RpnnBasis(domain, alphas, betas, c, seed, a_up)


def eval_features(basis: RpnnBasis, points) -> FeatureMatrices:
    """Evaluate ``psi_j`` and its first/second partial derivatives at ``points``.

    With ``s = sigmoid(z)``: ``d psi/dx_q = alpha_q s (1 - s)`` and
    ``d2 psi/dx_q^2 = alpha_q^2 s (1 - s) (1 - 2 s)``. ``1 - s`` is evaluated
    as ``sigmoid(-z)`` so saturated neurons give tiny, not cancelled, values.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None] if basis.dim == 1 else points[None, :]
    if points.ndim != 2 or points.shape[1] != basis.dim:
        raise ValueError(f"points must have shape (M, {basis.dim}), got {points.shape}")

    z = points @ basis.alphas.T + basis.betas
    np.clip(z, -Z_CLAMP, Z_CLAMP, out=z)
    s = expit(z)
    one_minus_s = expit(-z)
    ds = s * one_minus_s
    d2s = ds * (one_minus_s - s)

    dpsi = tuple(ds * basis.alphas[:, q] for q in range(basis.dim))
    d2psi = tuple(d2s * basis.alphas[:, q] ** 2 for q in range(basis.dim))
    for arr in (s, *dpsi, *d2psi):
        arr.setflags(write=False)
    return FeatureMatrices(s, dpsi, d2psi, points)
