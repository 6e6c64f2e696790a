"""Every shipped recipe runs end to end and its curves obey the protocol invariants."""

import math

import numpy as np
import pytest

from pulsedopto.cli import recipe_names, recipe_text
from pulsedopto.config import load_text, serialize
from pulsedopto.output import write_output
from pulsedopto.sweep import run_all


@pytest.fixture(scope="module")
def tables():
    out = {}
    for name in recipe_names():
        cfg = load_text(recipe_text(name), environ={})
        out.update({t.name: t for t in run_all(cfg, jobs=1)})
    return out


def test_recipes_round_trip():
    for name in recipe_names():
        cfg = load_text(recipe_text(name), environ={})
        assert load_text(serialize(cfg), environ={}) == cfg


def test_no_errors_and_write(tables, tmp_path):
    for t in tables.values():
        assert not t.has_errors, t.name
        paths = write_output(t, tmp_path, ("csv",), plot=True)
        assert all(p.stat().st_size > 0 for p in paths)


def test_gamma_sweeps_monotone(tables):
    for t in tables.values():
        if t.swept_var == "Gamma":
            S = t.column("S_db")
            assert np.all(np.diff(S) <= 1e-12), t.name
            assert np.all(np.diff(t.column("E_N")) <= 1e-12), t.name


def test_entanglement_implies_squeezing(tables):
    for t in tables.values():
        E, lam = t.column("E_N"), t.column("lambda_min")
        assert np.all((E <= 0) | (lam < 1)), t.name


def test_readout_adds_noise(tables):
    for eta in ("08", "04"):
        pm = tables[f"fig3a_pm_eta{eta}"].column("S_db")
        pp = tables[f"fig3a_pp_eta{eta}"].column("S_db")
        assert np.all(pp <= pm)


def test_ensemble_error_bars(tables):
    t = tables["fig2a_rwa"]
    assert np.all(t.column("std_S_db") > 0)
    assert np.all(np.abs(t.column("mean_S_db") - t.column("S_db")) < 3 * t.column("std_S_db") + 0.1)


def test_full_and_adiabatic_agree_at_weak_coupling(tables):
    full = tables["fig2b_full"].column("S_db")
    adia = tables["fig2b_adiabatic"].column("S_db")
    # same sign everywhere, close at the weakest couplings
    assert np.all(np.sign(full) == np.sign(adia))
    assert abs(full[0] - adia[0]) < 0.1


def test_angle_windows(tables):
    widths, peaks = [], []
    for name in ("fig3b_n0_1", "fig3b_n0_100"):
        S = tables[name].column("S_db")
        widths.append(2 * math.pi * np.mean(S[:-1] > 0))
        peaks.append(S.max())
    assert widths[0] > widths[1] > 0
    assert abs(peaks[0] - peaks[1]) < 0.1
