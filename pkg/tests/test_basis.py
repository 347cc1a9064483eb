import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshlessbif.basis import Domain, RpnnBasis, default_alpha_upper, eval_features, sample_basis


@pytest.mark.parametrize(
    "bounds, n, m, expected",
    [
        ((0.0, 1.0), 50, 101, 14.0),
        ((0.0, 2.0), 10, 10, 3.0),
    ],
)
def test_alpha_upper_formula(bounds, n, m, expected):
    basis = sample_basis(Domain.interval(*bounds), n, m, seed=3)
    assert basis.alpha_upper[0] == pytest.approx(expected, rel=1e-15)
    assert default_alpha_upper(n, m, bounds[1] - bounds[0]) == pytest.approx(expected, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    n=st.integers(1, 80),
    dim=st.sampled_from([1, 2]),
    a=st.floats(-5, 5),
    width=st.floats(0.1, 20),
)
def test_sampling_invariants(seed, n, dim, a, width):
    dom = Domain(((a, a + width),) * dim)
    b = sample_basis(dom, n, 21, seed)
    # inflection hyperplane passes through the center
    np.testing.assert_allclose(b.betas, -np.sum(b.alphas * b.centers, axis=1), rtol=0, atol=1e-12 * (1 + np.abs(b.betas).max()))
    assert np.all(dom.contains(b.centers))
    assert np.all(np.abs(b.alphas) <= b.alpha_upper)
    again = sample_basis(dom, n, 21, seed)
    assert np.array_equal(b.alphas, again.alphas) and np.array_equal(b.betas, again.betas)


def test_json_round_trip_is_bitwise():
    b = sample_basis(Domain.box((0, 1), (0, 2)), 30, 11, seed=7)
    c = RpnnBasis.from_json(b.to_json())
    for name in ("alphas", "betas", "centers", "alpha_upper"):
        assert np.array_equal(getattr(b, name), getattr(c, name))


def test_feature_values_at_center():
    b = RpnnBasis(Domain.interval(0, 1), [[3.0]], [-1.5], [[0.5]], 0, [14.0])
    f = eval_features(b, np.array([0.5]))
    assert f.psi[0, 0] == 0.5
    assert f.dpsi[0][0, 0] == pytest.approx(3.0 / 4)
    assert f.d2psi[0][0, 0] == 0.0


@pytest.mark.parametrize("z", [40.0, -40.0, 800.0, -800.0])
def test_saturation_is_finite(z):
    b = RpnnBasis(Domain.interval(0, 1), [[1.0]], [z], [[-z]], 0, [1.0])
    f = eval_features(b, np.array([0.0]))
    assert f.psi[0, 0] == pytest.approx(1.0 if z > 0 else 0.0, abs=1e-15)
    for arr in (f.dpsi[0], f.d2psi[0]):
        assert np.all(np.isfinite(arr)) and abs(arr[0, 0]) < 1e-15


@pytest.mark.parametrize("dim", [1, 2])
def test_derivatives_against_central_differences(dim):
    dom = Domain(((0.0, 1.0),) * dim)
    b = sample_basis(dom, 100, 21, seed=11)
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(100, dim))
    h = 1e-5
    f = eval_features(b, x)
    for q in range(dim):
        e = np.zeros(dim)
        e[q] = h
        fp, fm = eval_features(b, x + e), eval_features(b, x - e)
        d1 = (fp.psi - fm.psi) / (2 * h)
        # second derivative as the central difference of the first
        d2 = (fp.dpsi[q] - fm.dpsi[q]) / (2 * h)
        assert np.max(np.abs(d1 - f.dpsi[q]) / (np.abs(b.alphas[:, q]) / 4)) < 1e-6
        assert np.max(np.abs(d2 - f.d2psi[q]) / (b.alphas[:, q] ** 2 / 10)) < 1e-6


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        Domain(((1.0, 0.0),))
    with pytest.raises(ValueError):
        sample_basis(Domain.interval(0, 1), 0, 10, 0)
    with pytest.raises(ValueError):
        sample_basis(Domain.interval(0, 1), 5, 10, -1)
    with pytest.raises(ValueError):
        eval_features(sample_basis(Domain.interval(0, 1), 5, 10, 0), np.zeros((3, 2)))
