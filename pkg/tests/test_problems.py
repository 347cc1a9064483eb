import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshlessbif.presets import preset
from meshlessbif.problems import DEFAULTS, bratu1d_exact, make_problem


def small(name, seed=0):
    n_pts = 7 if name == "bratu2d" else 31
    return make_problem(name, seed=seed, n_neurons=40, n_points=n_pts)


def test_bratu_residual_at_zero(bratu1d):
    w = np.zeros(bratu1d.n_weights)
    assert np.all(bratu1d.residual(w, 0.0) == 0)
    r = bratu1d.residual(w, 1.0)
    bnd = bratu1d.colloc.is_boundary
    assert np.all(r[~bnd] == 1.0) and np.all(r[bnd] == 0.0)
    jm = bratu1d.jacobian_mu(w, 0.7)
    assert np.all(jm[~bnd] == 1.0) and np.all(jm[bnd] == 0.0)


def test_bratu_jacobian_at_p0(bratu1d):
    j = bratu1d.jacobian_w(np.ones(bratu1d.n_weights), 0.0)
    bnd = bratu1d.colloc.is_boundary
    f = bratu1d.features
    np.testing.assert_array_equal(j[~bnd], f.laplacian[~bnd])
    np.testing.assert_array_equal(j[bnd], f.psi[bnd])


def test_allen_cahn_mu_derivative_vanishes_at_zero():
    pr = small("allen_cahn")
    jm = pr.jacobian_mu(np.zeros(pr.n_weights), 0.4)
    assert np.all(jm[~pr.colloc.is_boundary] == 0)


@pytest.mark.parametrize(
    "name, n_points, zeros",
    [("bratu1d", 101, 2), ("bratu2d", 21, 80), ("fhn", 201, 4), ("allen_cahn", 201, 2)],
)
def test_constraint_mask_counts(name, n_points, zeros):
    pr = make_problem(name, n_points=n_points, n_neurons=10)
    assert pr.constraint_mask().n_zeros == zeros


@pytest.mark.parametrize("name", list(DEFAULTS))
def test_jacobians_match_central_differences(name):
    pr = small(name)
    rng = np.random.default_rng(1)
    w = 0.1 * rng.standard_normal(pr.n_weights)
    mu = preset(name)["mu"]
    h = 1e-6
    j = pr.jacobian_w(w, mu)
    for c in rng.choice(pr.n_weights, 20, replace=False):
        e = np.zeros(pr.n_weights)
        e[c] = h
        fd = (pr.residual(w + e, mu) - pr.residual(w - e, mu)) / (2 * h)
        assert np.linalg.norm(fd - j[:, c]) <= 1e-6 * (1 + np.linalg.norm(j[:, c]))
    fd_mu = (pr.residual(w, mu + h) - pr.residual(w, mu - h)) / (2 * h)
    assert np.max(np.abs(fd_mu - pr.jacobian_mu(w, mu))) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), p=st.floats(0.0, 3.5))
def test_bratu_chain_rule(seed, p):
    pr = small("bratu1d", seed)
    w = np.random.default_rng(seed).standard_normal(pr.n_weights) * 0.05
    assembled = pr.linearization(w, p).apply_to_features(pr.features)
    j = pr.jacobian_w(w, p)
    assert np.linalg.norm(j - assembled) <= 1e-10 * np.linalg.norm(j)


@pytest.mark.parametrize(
    "p, branch, peak",
    [(1.0, "lower", 0.14053921440043535), (3.0, "lower", 0.640146696040754), (3.0, "upper", 1.975266971163739)],
)
def test_exact_bratu_profile(p, branch, peak):
    # peak values u(1/2) frozen from scipy.integrate.solve_bvp at tol 1e-10
    x = np.linspace(0, 1, 101)
    u = bratu1d_exact(x, p, branch)
    assert u[0] == pytest.approx(0, abs=1e-14) and u[-1] == pytest.approx(0, abs=1e-14)
    assert u[50] == pytest.approx(peak, abs=1e-8)


def test_exact_bratu_beyond_fold():
    with pytest.raises(ValueError):
        bratu1d_exact(np.linspace(0, 1, 5), 3.6)


def test_problem_validation():
    with pytest.raises(ValueError):
        make_problem("heat")
    with pytest.raises(ValueError):
        make_problem("fhn", fixed_params={"Dw": 1.0})
    pr = small("bratu1d")
    with pytest.raises(ValueError):
        pr.residual(np.zeros(pr.n_weights + 1), 1.0)
