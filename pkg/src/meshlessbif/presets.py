"""Per-problem defaults, starting guesses and helpers to land on a named branch."""

from __future__ import annotations

import numpy as np

from .continuation import Branch, ContinuationError, trace_branch
from .solver import SteadyState, newton_solve
from .stability import shift_invert_eigs

# mu: default parameter for solve/eigs; start/second: first two continuation
# states; bounds: continuation stops once mu leaves them
PRESETS = {
    "bratu1d": dict(
        mu=3.0, mu_start=0.1, mu_second=0.2, ds=0.1, ds_max=0.4, n_steps=80, bounds=(0.05, 4.0),
        sigma=1.0, k=6, branches=("lower", "upper"),
    ),
    "bratu2d": dict(
        mu=6.0, mu_start=1.0, mu_second=1.2, ds=0.5, ds_max=1.0, n_steps=34, bounds=(0.5, 8.0),
        sigma=1.0, k=4, branches=("lower", "upper"),
    ),
    "fhn": dict(
        mu=0.8, mu_start=0.5, mu_second=0.51, ds=0.05, ds_max=0.2, n_steps=150, bounds=(0.01, 2.0),
        sigma=0.1, k=6, branches=("upper", "lower"),
    ),
    "allen_cahn": dict(
        mu=0.5, mu_start=0.8, mu_second=0.795, ds=0.005, ds_max=0.01, n_steps=200, bounds=(0.1, 0.85),
        sigma=1.0, k=10, branches=("trivial",),
    ),
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}")
    return dict(PRESETS[name])


def initial_guess(problem, mu: float, branch: str | None = None) -> np.ndarray:
    """Weights whose field starts Newton on the requested branch (the first named branch by default).

    Bratu 1D uses the closed-form profile, Bratu 2D a zero or a large
    bump, FitzHugh-Nagumo a front near the right boundary and Allen-Cahn
    the trivial state.
    """
    from .problems import bratu1d_exact

    name = problem.name
    branch = branch or preset(name)["branches"][0]
    x = problem.colloc.points
    if name == "bratu1d":
        if branch not in ("lower", "upper"):
            raise ValueError("bratu1d branches are 'lower' and 'upper'")
        return problem.fit_weights(bratu1d_exact(x[:, 0], mu, branch))
    if name == "bratu2d":
        if branch == "lower":
            return np.zeros(problem.n_weights)
        if branch == "upper":
            bump = 16 * x[:, 0] * (1 - x[:, 0]) * x[:, 1] * (1 - x[:, 1])
            return problem.fit_weights(3.0 * bump)
        raise ValueError("bratu2d branches are 'lower' and 'upper'")
    if name == "fhn":
        if branch != "upper":
            raise ValueError("fhn: only the upper branch has a direct guess; reach 'lower' by continuation")
        front = np.tanh(x[:, 0] - 10.0)
        return problem.fit_weights(np.concatenate([front, 0.5 * front]))
    if name == "allen_cahn":
        if branch != "trivial":
            raise ValueError("allen_cahn: the direct guess is the trivial branch")
        return np.zeros(problem.n_weights)
    raise ValueError(f"no initial guess for {name!r}")


def eig_function(sigma: float, k: int, **kw):
    def fn(problem, w, mu):
        return shift_invert_eigs(problem, w, mu, k=k, sigma=sigma, **kw)

    return fn


def start_pair(problem, cfg: dict, tol: float = 1e-10, svd_tol: float = 1e-14) -> tuple[SteadyState, SteadyState]:
    branch = cfg.get("branches", (None,))[0]
    a = newton_solve(problem, initial_guess(problem, cfg["mu_start"], branch), cfg["mu_start"], tol=tol, svd_tol=svd_tol)
    if not a.converged:
        raise ContinuationError(f"no converged start state at mu={cfg['mu_start']}")
    b = newton_solve(problem, a.weights, cfg["mu_second"], tol=tol, svd_tol=svd_tol)
    if not b.converged:
        raise ContinuationError(f"no converged second state at mu={cfg['mu_second']}")
    return a, b


def run_branch(problem, cfg: dict | None = None, eig_fn=None, **kw) -> Branch:
    """Continuation with the preset settings of ``problem`` (``cfg`` entries override)."""
    c = preset(problem.name)
    c.update(cfg or {})
    a, b = start_pair(problem, c)
    if eig_fn is None and c.get("k"):
        eig_fn = eig_function(c["sigma"], c["k"])
    return trace_branch(
        problem, a, b, c["ds"], c["n_steps"], eig_fn=eig_fn, ds_max=c["ds_max"],
        ds_min=c.get("ds_min"), mu_bounds=c["bounds"], **kw,
    )


def state_on_branch(problem, mu: float, branch: str, cfg: dict | None = None) -> SteadyState:
    """Converged state at ``mu`` on a named branch.

    Branches with a direct guess are solved immediately. The unstable side
    of a fold ("upper" for Bratu 2D if the guess fails, "lower" for
    FitzHugh-Nagumo) is reached by continuing around the fold without
    eigenvalues and polishing the nearest point beyond it.
    """
    try:
        st = newton_solve(problem, initial_guess(problem, mu, branch), mu)
        if st.converged:
            return st
    except ValueError:
        pass
    c = preset(problem.name)
    c.update(cfg or {})
    br = run_branch(problem, c, eig_fn=None, refine=False)
    folds = [e["index"] for e in br.events if e["type"] == "fold"]
    if not folds:
        raise ContinuationError(f"{problem.name}: no fold found while looking for the {branch} branch")
    beyond = br.points[folds[0] + 1 :]
    if not beyond:
        raise ContinuationError("branch ends at the fold")
    near = min(beyond, key=lambda p: abs(p.mu - mu))
    st = newton_solve(problem, near.weights, mu)
    if not st.converged:
        raise ContinuationError(f"could not converge on the {branch} branch at mu={mu}")
    return st
