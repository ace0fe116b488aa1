import dataclasses

import numpy as np
import pytest

from axon_backstepping.config import (
    PROFILE_HEADER,
    TIMESERIES_HEADER,
    BioParams,
    ConfigError,
    ControlParams,
    RunRecord,
    ScenarioConfig,
    load_config,
    read_timeseries,
    validate_control,
    write_config,
    write_plot_script,
    write_profiles,
    write_timeseries,
)


def test_defaults_are_the_parameter_table():
    bio = BioParams()
    assert (bio.D, bio.a, bio.g, bio.r_g, bio.rtilde_g, bio.l_c, bio.c_inf) == (
        1e-5, 1e-8, 5e-7, 1.783e-5, 0.053, 4e-6, 0.0119)
    ctrl = ControlParams()
    assert (ctrl.gamma, ctrl.k1, ctrl.k2, ctrl.mode) == (1e4, -0.1, 1e13, "closed_loop")
    scen = ScenarioConfig()
    assert (scen.l_s, scen.l_0, scen.c0_multiple) == (12e-6, 1e-6, 2.0)
    assert (scen.t_final, scen.n_grid, scen.dt, scen.theta) == (300.0, 201, 1e-3, 1.0)


@pytest.mark.parametrize("kw,name", [
    ({"D": 0.0}, "bio.D"),
    ({"D": -1.0}, "bio.D"),
    ({"g": 0.0}, "bio.g"),
    ({"a": -1e-9}, "bio.a"),
    ({"c_inf": float("nan")}, "bio.c_inf"),
])
def test_bio_bounds(kw, name):
    with pytest.raises(ConfigError, match=name):
        BioParams(**kw)


@pytest.mark.parametrize("kw,name", [
    ({"n_grid": 10}, "n_grid"),
    ({"theta": 1.5}, "theta"),
    ({"dt": 0.0}, "dt"),
    ({"l_0": 0.0}, "l_0"),
    ({"c0_multiple": -1.0}, "c0"),
])
def test_scenario_bounds(kw, name):
    with pytest.raises(ConfigError, match=name):
        ScenarioConfig(**kw)


def test_mode_enum():
    with pytest.raises(ConfigError, match="mode"):
        ControlParams(mode="feedforward")


def test_gamma_below_advection_ratio():
    bio = BioParams(a=1e-3)  # a/D = 100
    validate_control(bio, ControlParams(gamma=100.0))
    with pytest.raises(ConfigError, match="stability hypothesis"):
        validate_control(bio, ControlParams(gamma=99.0))


def test_config_round_trip(tmp_path):
    bio = BioParams(D=2e-5)
    ctrl = ControlParams(gamma=2e4, k1=1.0, k2=3.0, mode="zero_input")
    scen = ScenarioConfig(t_final=5.0, n_grid=51, output_dir="o", output_prefix="p")
    path = tmp_path / "c.ini"
    write_config(path, bio, ctrl, scen)
    assert load_config(path) == (bio, ctrl, scen)


def test_partial_config_uses_defaults(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[scenario]\nt_final = 7  # seconds\n")
    bio, ctrl, scen = load_config(path)
    assert bio == BioParams() and ctrl == ControlParams()
    assert scen.t_final == 7.0


@pytest.mark.parametrize("text,match", [
    ("[bio]\nDD = 1\n", "bio.DD"),
    ("[nope]\nx = 1\n", "unknown config sections"),
    ("[scenario]\nn_grid = 10.5\n", "n_grid"),
    ("[bio]\nD = fast\n", "D"),
    ("[control]\ngamma = 1e-4\n", "gamma"),
])
def test_bad_config(tmp_path, text, match):
    path = tmp_path / "c.ini"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.ini")


def test_tabulated_initial_profile(tmp_path):
    table = tmp_path / "c0.csv"
    table.write_text("sigma,c\n0,1\n1,3\n")
    scen = ScenarioConfig(c0_table=str(table))
    assert np.allclose(scen.initial_profile(1.0, np.array([0.0, 0.5, 1.0])), [1, 2, 3])
    table.write_text("sigma,c\n0,1\n1,-3\n")
    with pytest.raises(ConfigError, match="c0 > 0"):
        ScenarioConfig(c0_table=str(table)).initial_profile(1.0, np.linspace(0, 1, 5))


def test_timeseries_round_trip(tmp_path):
    recs = [RunRecord(*(np.random.default_rng(i).normal(size=10))) for i in range(3)]
    path = tmp_path / "ts.csv"
    write_timeseries(recs, path)
    assert path.read_text().splitlines()[0] == ",".join(TIMESERIES_HEADER)
    assert TIMESERIES_HEADER == ("t", "l", "c_c", "q_s", "U", "Z", "V", "w0", "wx_l", "bc_residual")
    assert read_timeseries(path) == recs
    with pytest.raises(ValueError):
        write_timeseries([], path)


def test_profiles_and_plot_script(tmp_path):
    Snap = dataclasses.make_dataclass("Snap", ["t", "sigma", "x", "c", "u", "w"])
    s = np.linspace(0, 1, 3)
    path = tmp_path / "p.csv"
    write_profiles([Snap(0.5, s, 2 * s, s, s, s)], path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(PROFILE_HEADER) and len(lines) == 4
    gp = tmp_path / "run.gp"
    write_plot_script(tmp_path / "ts.csv", gp, path, 12e-6)
    text = gp.read_text()
    assert "plot 'ts.csv'" in text and "p.csv" in text and "separator ','" in text
