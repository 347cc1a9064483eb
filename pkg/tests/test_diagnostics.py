import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshlessbif.diagnostics import (
    boundary_rank_check,
    chain_rule_check,
    svd_decay_report,
    write_report_json,
    write_singular_values_csv,
)
from meshlessbif.presets import initial_guess
from meshlessbif.problems import make_problem


def test_bratu_decay(bratu1d):
    rep = svd_decay_report(bratu1d.features.psi)
    assert rep.fit_r2 >= 0.97 and 3 <= rep.estimated_R <= 8
    assert not rep.fit_unreliable and rep.shape == (101, 50)
    assert rep.numerical_rank_at[1e-8] == 24


def test_flat_spectrum():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((15, 15)))
    rep = svd_decay_report(q)
    assert abs(rep.fit_log10_slope) < 1e-12 and rep.estimated_R == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(rate=st.floats(1.2, 6.0), n=st.integers(6, 30))
def test_constructed_decay(rate, n):
    # sigma_j = rate**(-j/2) gives R = rate
    rep = svd_decay_report(np.diag(rate ** (-np.arange(1, n + 1) / 2)))
    assert rep.estimated_R == pytest.approx(rate, rel=1e-6)
    assert rep.fit_r2 == pytest.approx(1.0, abs=1e-12)


def test_decay_range_validation_and_floor():
    s = np.r_[1.0, 1e-1, 1e-2, 1e-20, 1e-21]
    rep = svd_decay_report(np.diag(s))
    assert rep.fit_range == (1, 3) and rep.fit_unreliable
    with pytest.raises(ValueError):
        svd_decay_report(np.eye(4), fit_range=(0, 9))


@pytest.mark.parametrize("name", ["bratu1d", "bratu2d", "fhn", "allen_cahn"])
def test_boundary_rows_full_rank(name):
    pr = make_problem(name, seed=0)
    assert boundary_rank_check(pr.psi_blocks, pr.constraint_mask())["full_row_rank"]


def test_duplicated_boundary_row():
    psi = np.random.default_rng(1).standard_normal((6, 5))
    psi[5] = psi[0]
    mask = np.r_[0.0, 1, 1, 1, 1, 0]
    out = boundary_rank_check(psi, mask)
    assert not out["full_row_rank"] and out["n_rows"] == 2


@pytest.mark.parametrize("name", ["bratu1d", "fhn"])
def test_chain_rule(name):
    pr = make_problem(name, seed=0)
    w = initial_guess(pr, 0.8 if name == "fhn" else 2.0)
    mu = 0.8 if name == "fhn" else 2.0
    assert chain_rule_check(pr, w, mu)["rel_error"] <= 1e-12
    bad = pr.jacobian_w(w, mu)
    bad[3, 4] += 1.0
    assert chain_rule_check(pr, w, mu, j_w=bad)["rel_error"] > 0


def test_report_files(tmp_path, bratu1d):
    rep = svd_decay_report(bratu1d.features.psi)
    write_report_json(rep, tmp_path / "r.json")
    write_singular_values_csv(rep, tmp_path / "s.csv")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["estimated_R"] == rep.estimated_R and len(d["singular_values"]) == 50
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "j,sigma" and float(lines[1].split(",")[1]) == rep.singular_values[0]
