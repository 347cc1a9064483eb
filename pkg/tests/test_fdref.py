import numpy as np
import pytest

from meshlessbif.fdref import fd_solve, fd_spectrum, make_fd_problem
from meshlessbif.problems import bratu1d_exact


def test_bratu_second_order_accuracy():
    fd = make_fd_problem("bratu1d")
    sol = fd_solve(fd, 1.0)
    x = fd.axes[0]
    assert sol.converged
    assert np.max(np.abs(sol.full_field() - bratu1d_exact(x, 1.0))) <= 1e-3


def test_trivial_states():
    assert np.all(fd_solve("bratu1d", 0.0).values == 0)
    fd = make_fd_problem("allen_cahn")
    sol = fd_solve(fd, 0.5, np.ones(fd.n_unknowns))
    assert sol.converged and np.all(sol.values == 1.0)


def test_bratu_laplacian_spectrum():
    p = 1e-3
    sol = fd_solve("bratu1d", p)
    lam = fd_spectrum("bratu1d", p, sol.values, k=1).eigenvalues[0].real
    assert lam == pytest.approx(-np.pi**2 + p, abs=1e-2)


@pytest.mark.parametrize("eps", [0.7, 0.5, 0.3])
def test_allen_cahn_trivial_spectrum(eps):
    fd = make_fd_problem("allen_cahn", n_points=401)
    lam = np.sort(fd_spectrum(fd, eps, np.zeros(fd.n_unknowns), k=4).eigenvalues.real)[::-1]
    exact = np.sort([1 / eps - eps * (k * np.pi / 2) ** 2 for k in range(4)])[::-1]
    np.testing.assert_allclose(lam, exact, atol=2e-3 * np.abs(exact).max())


def test_fhn_complex_pair_at_small_eps():
    fd = make_fd_problem("fhn")
    x = fd.axes[0]
    front = np.tanh(x - 10.0)
    sol = fd_solve(fd, 0.5, np.concatenate([front, 0.5 * front]))
    # walk down in eps on the upper branch
    for eps in np.linspace(0.5, 0.03, 25):
        sol = fd_solve(fd, eps, sol.values)
        assert sol.converged
    lam = fd_spectrum(fd, 0.03, sol.values, k=2).eigenvalues
    assert abs(lam[0].imag) > 0 and lam[0].real < 0


def test_grid_shape_errors():
    with pytest.raises(ValueError):
        make_fd_problem("nope")
    with pytest.raises(ValueError):
        fd_solve("bratu1d", 1.0, np.zeros(3))
