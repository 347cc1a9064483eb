import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from meshlessbif.problems import bratu1d_exact, make_problem
from meshlessbif.solver import NumericError, newton_solve, numerical_rank, pinv_apply, truncated_svd


def test_identity_svd():
    f = truncated_svd(np.eye(3), 1e-8)
    assert f.rank == 3 and np.all(f.s_vals == 1)
    np.testing.assert_array_equal(pinv_apply(f, np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_rank_one():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(7), rng.standard_normal(4)
    f = truncated_svd(np.outer(x / np.linalg.norm(x), y / np.linalg.norm(y)), 1e-8)
    assert f.rank == 1 and f.s_vals[0] == pytest.approx(1.0, rel=1e-14)


def test_orthogonal_pinv_is_transpose():
    q, _ = np.linalg.qr(np.random.default_rng(2).standard_normal((9, 9)))
    rhs = np.arange(9.0)
    np.testing.assert_allclose(pinv_apply(truncated_svd(q), rhs), q.T @ rhs, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(x0=arrays(np.float64, 10, elements=st.floats(-10, 10)), seed=st.integers(0, 2**31))
def test_pinv_recovers_range_vectors(x0, seed):
    a = np.random.default_rng(seed).standard_normal((20, 10))
    x = pinv_apply(truncated_svd(a, 1e-12), a @ x0)
    assert np.linalg.norm(a @ x - a @ x0) <= 1e-10 * (1 + np.linalg.norm(a @ x0))


def test_absolute_mode_and_errors():
    f = truncated_svd(np.diag([1.0, 1e-3, 1e-9]), 1e-6, mode="absolute")
    assert f.rank == 2
    with pytest.raises(ValueError):
        truncated_svd(np.eye(2), mode="sideways")
    with pytest.raises(NumericError):
        truncated_svd(np.array([[np.nan, 1.0]]))


def test_bratu_psi_is_rank_deficient(bratu1d):
    # golden value at seed 0, cross-checked with numpy.linalg.matrix_rank
    assert numerical_rank(bratu1d.features.psi, 1e-8) == 24
    assert truncated_svd(bratu1d.features.psi, 1e-8).rank == 24 < bratu1d.n_neurons


def test_newton_bratu_lower_branch(bratu1d):
    st = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 1.0)
    assert st.converged and st.iterations <= 15 and st.residual_norm <= 1e-8
    x = bratu1d.colloc.points[:, 0]
    assert np.max(np.abs(bratu1d.field_values(st.weights) - bratu1d_exact(x, 1.0))) <= 1e-4


def test_newton_trivial_start(bratu1d):
    st = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 0.0)
    assert st.converged and st.iterations <= 1
    assert np.all(bratu1d.field_values(st.weights) == 0)


def test_newton_allen_cahn_constant_state():
    pr = make_problem("allen_cahn", seed=0)
    st = newton_solve(pr, pr.fit_weights(np.ones(pr.n_points)), 0.5)
    assert st.converged
    assert np.max(np.abs(pr.field_values(st.weights) - 1)) <= 1e-8


def test_newton_fails_beyond_fold(bratu1d):
    st = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 5.0, max_iter=30)
    assert not st.converged


def test_newton_trace_lines(bratu1d):
    import io
    import json

    buf = io.StringIO()
    newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 2.0, trace=buf)
    rows = [json.loads(s) for s in buf.getvalue().splitlines()]
    assert rows and {"iter", "res_norm", "step_norm", "rank"} <= set(rows[0])
