import csv
import json

import numpy as np
import pytest

from meshlessbif.continuation import (
    Branch,
    BranchPoint,
    arclength_step,
    detect_events,
    join_branches,
    natural_sweep,
    summarize,
    switch_branch,
    trace_branch,
    write_branch_csv,
    write_events_json,
)
from meshlessbif.fdref import fd_solve, make_fd_problem
from meshlessbif.presets import eig_function, run_branch
from meshlessbif.problems import make_problem
from meshlessbif.solver import newton_solve
from meshlessbif.stability import shift_invert_eigs


def point(problem, w, mu, s=0.0):
    return BranchPoint(s, mu, w, summarize(problem, w))


@pytest.fixture(scope="module")
def bratu_pair(bratu1d):
    a = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 0.1)
    b = newton_solve(bratu1d, a.weights, 0.2)
    return point(bratu1d, a.weights, 0.1), point(bratu1d, b.weights, 0.2, 0.1)


@pytest.fixture(scope="module")
def bratu_branch(bratu1d):
    return run_branch(bratu1d)


def test_step_moves_forward_and_stays_stable(bratu1d, bratu_pair):
    nxt = arclength_step(bratu1d, *bratu_pair, 0.1, eig_fn=eig_function(1.0, 4))
    assert nxt.mu > 0.2 and nxt.n_unstable == 0
    # finite-difference oracle at the same parameter
    fd = make_fd_problem("bratu1d")
    ref = fd_solve(fd, nxt.mu)
    assert abs(nxt.summary["mean_u"] - ref.full_field().mean()) <= 1e-3


@pytest.mark.parametrize("ds", [0.0, np.nan])
def test_step_rejects_degenerate_ds(bratu1d, bratu_pair, ds):
    with pytest.raises(ValueError):
        arclength_step(bratu1d, *bratu_pair, ds)


def test_branch_goes_around_the_fold(bratu_branch):
    mu = bratu_branch.mu
    assert 3.51 <= mu.max() <= 3.52
    dmu = np.diff(mu)
    assert np.any(dmu > 0) and np.any(dmu < 0)
    folds = bratu_branch.events_of("fold")
    assert len(folds) == 1 and folds[0]["mu"] == pytest.approx(3.513830719, abs=1e-4)
    # one unstable direction past the fold
    assert bratu_branch.points[0].n_unstable == 0 and bratu_branch.points[-1].n_unstable == 1


def test_stable_branch_has_no_events(bratu1d, bratu_pair):
    a = newton_solve(bratu1d, bratu_pair[0].weights, 0.1)
    b = newton_solve(bratu1d, a.weights, 0.2)
    br = trace_branch(bratu1d, a, b, 0.2, 8, eig_fn=eig_function(1.0, 4), mu_bounds=(0.05, 2.0))
    assert br.events == [] and br.error is None
    assert detect_events(br).events == []


def test_csv_and_events_files(tmp_path, bratu_branch):
    write_branch_csv(bratu_branch, tmp_path / "b.csv", n_eigs=3)
    write_events_json(bratu_branch, tmp_path / "e.json")
    with open(tmp_path / "b.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:6] == ["s", "mu", "mean_u", "mean_v", "max_u", "l2_u"]
    assert rows[0][-2:] == ["n_unstable", "tag"] and "im_lambda3" in rows[0]
    assert float(rows[1][1]) == bratu_branch.points[0].mu  # 17 digits round-trip
    ev = json.loads((tmp_path / "e.json").read_text())
    assert ev[0]["type"] == "fold" and set(ev[0]) == {"type", "mu", "interval"}


def test_join_branches(bratu1d):
    fwd = run_branch(bratu1d, {"n_steps": 5}, eig_fn=None)
    back = run_branch(bratu1d, {"n_steps": 5, "mu_start": 0.2, "mu_second": 0.1}, eig_fn=None)
    both = join_branches(back, fwd)
    assert len(both.points) == len(fwd.points) + len(back.points) - 2
    assert np.all(np.diff(both.s) > 0)
    assert np.all(np.diff(both.mu[: len(back.points)]) > 0)


def test_natural_sweep_matches_newton(bratu1d):
    br = natural_sweep(bratu1d, np.zeros(bratu1d.n_weights), [0.5, 1.0, 1.5])
    st = newton_solve(bratu1d, np.zeros(bratu1d.n_weights), 1.5)
    np.testing.assert_allclose(bratu1d.field_values(br.points[-1].weights), bratu1d.field_values(st.weights), atol=1e-9)


class TestAllenCahnSwitch:
    @pytest.fixture(scope="class")
    @classmethod
    def setup(cls):
        pr = make_problem("allen_cahn", seed=0)
        mu = 0.62
        at = point(pr, np.zeros(pr.n_weights), mu)
        spec = shift_invert_eigs(pr, at.weights, mu, k=4)
        # the constant mode has lambda = 1/eps; the crossing one is nearest zero
        v = np.real(spec.weight_vectors[:, np.argmin(np.abs(spec.eigenvalues))])
        v = v / np.max(np.abs(pr.psi_blocks @ v)) * 0.5
        return pr, at, v

    def test_switch_finds_the_first_mode(self, setup):
        pr, at, v = setup
        sw = switch_branch(pr, at, v, 1.0)
        assert sw.converged and not sw.switch_failed
        x = pr.colloc.points[:, 0]
        u = pr.field_values(sw.weights)
        mode = np.sin(np.pi * x / 2)
        assert abs(u @ mode) / (np.linalg.norm(u) * np.linalg.norm(mode)) > 0.9

    def test_negated_amplitude_gives_mirror(self, setup):
        pr, at, v = setup
        up = pr.field_values(switch_branch(pr, at, v, 1.0).weights)
        down = pr.field_values(switch_branch(pr, at, v, -1.0).weights)
        assert np.max(np.abs(up + down)) <= 1e-3

    def test_zero_amplitude_is_flagged(self, setup):
        pr, at, v = setup
        sw = switch_branch(pr, at, v, 0.0)
        assert sw.switch_failed and np.max(np.abs(pr.field_values(sw.weights))) <= 1e-8


def test_branch_container_helpers(bratu1d):
    pts = [point(bratu1d, np.zeros(bratu1d.n_weights), m, s) for s, m in enumerate([0.0, 0.1])]
    br = Branch(pts, events=[{"type": "fold", "mu": 0.1, "interval": [0, 0.1], "index": 0}])
    assert br.mu.tolist() == [0.0, 0.1] and br.s.tolist() == [0, 1]
    assert br.column("max_u").tolist() == [0.0, 0.0]
    assert br.events_of("hopf") == [] and len(br.events_of("fold")) == 1
