"""Parameter ingestion, validation and file output.

Config files are INI-style with four sections (``bio``, ``control``,
``scenario``, ``output``). Every quantity is in SI base units; omitted keys
take the defaults below, which reproduce the published parameter table.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MODES = ("closed_loop", "open_loop_constant", "zero_input")


class ConfigError(ValueError):
    """Raised for unparseable config files and violated parameter bounds."""


@dataclass(frozen=True)
class BioParams:
    D: float = 1e-5  # m^2/s
    a: float = 1e-8  # m/s
    g: float = 5e-7  # 1/s
    r_g: float = 1.783e-5  # m^4/(mol s)
    rtilde_g: float = 0.053  # unit not given in the source table; see README
    l_c: float = 4e-6  # m
    c_inf: float = 0.0119  # mol/m^3

    def __post_init__(self):
        _check_finite(self, "bio")
        for name in ("D", "g", "r_g", "l_c", "c_inf"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"bio.{name} = {getattr(self, name)!r} violates {name} > 0")
        if self.a < 0:
            raise ConfigError(f"bio.a = {self.a!r} violates a >= 0")


@dataclass(frozen=True)
class ControlParams:
    """Backstepping design parameters.

    ``gamma`` must satisfy ``gamma >= a/D``, which is checked against the
    biological parameters in :func:`validate_control`. The default gains are
    the published ones; they are generally *not* Hurwitz for the derived
    linearization (see :func:`axon_backstepping.linsys.fallback_gains`).
    """

    gamma: float = 1e4  # 1/m
    k1: float = -0.1
    k2: float = 1e13
    mode: str = "closed_loop"
    quadrature: str = "simpson"
    l_bar_factor: float = 2.0
    q_open: Optional[float] = None  # constant flux for open_loop_constant; None -> q_s*

    def __post_init__(self):
        _check_finite(self, "control")
        if self.mode not in MODES:
            raise ConfigError(f"control.mode = {self.mode!r} is not one of {MODES}")
        if self.quadrature not in ("simpson", "trapezoid"):
            raise ConfigError(
                f"control.quadrature = {self.quadrature!r} is not 'simpson' or 'trapezoid'"
            )
        if not self.gamma > 0:
            raise ConfigError(f"control.gamma = {self.gamma!r} violates gamma > 0")
        if not self.l_bar_factor > 1:
            raise ConfigError(
                f"control.l_bar_factor = {self.l_bar_factor!r} violates l_bar_factor > 1"
            )


@dataclass(frozen=True)
class ScenarioConfig:
    l_s: float = 12e-6
    l_0: float = 1e-6
    c0_multiple: float = 2.0
    c0_table: Optional[str] = None  # CSV with columns sigma,c (mol/m^3)
    t_final: float = 300.0
    n_grid: int = 201
    dt: float = 1e-3
    theta: float = 1.0
    snapshot_every: int = 1000
    record_every: int = 1
    output_dir: str = "output"
    output_prefix: str = "run"

    def __post_init__(self):
        _check_finite(self, "scenario")
        checks = [
            ("l_0", self.l_0 > 0, "l_0 > 0"),
            ("l_s", self.l_s > 0, "l_s > 0"),
            ("n_grid", self.n_grid >= 11, "n_grid >= 11"),
            ("theta", 0 <= self.theta <= 1, "0 <= theta <= 1"),
            ("dt", self.dt > 0, "dt > 0"),
            ("t_final", self.t_final > 0, "t_final > 0"),
            ("snapshot_every", self.snapshot_every >= 1, "snapshot_every >= 1"),
            ("record_every", self.record_every >= 1, "record_every >= 1"),
        ]
        for key, ok, bound in checks:
            if not ok:
                raise ConfigError(f"scenario.{key} = {getattr(self, key)!r} violates {bound}")
        if self.c0_table is None and not self.c0_multiple > 0:
            raise ConfigError(
                f"scenario.c0_multiple = {self.c0_multiple!r} violates c0 > 0 everywhere"
            )

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def initial_profile(self, c_inf, sigma):
        """Initial concentration on the front-fixed grid ``sigma``."""
        if self.c0_table is None:
            return np.full(len(sigma), self.c0_multiple * c_inf)
        table = np.loadtxt(self.c0_table, delimiter=",", skiprows=1, ndmin=2)
        c0 = np.interp(sigma, table[:, 0], table[:, 1])
        if np.any(c0 <= 0) or not np.all(np.isfinite(c0)):
            raise ConfigError(f"scenario.c0_table {self.c0_table!r} violates c0 > 0 everywhere")
        return c0


def _check_finite(obj, section):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f"{section}.{f.name} = {v!r} is not finite")


def validate_control(bio: BioParams, ctrl: ControlParams):
    """Cross-check control parameters against the plant.

    Raises ``ConfigError`` when ``gamma < a/D``, the stability hypothesis of
    the closed-loop result.
    """
    bound = bio.a / bio.D
    if ctrl.gamma < bound:
        raise ConfigError(
            f"control.gamma = {ctrl.gamma!r} violates gamma >= a/D = {bound!r} "
            "(closed-loop stability hypothesis)"
        )


_SECTIONS = {"bio": BioParams, "control": ControlParams, "scenario": ScenarioConfig}


def _coerce(cls, key, raw):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    raw = raw.strip()
    if "Optional" in str(ftype) and raw.lower() in ("", "none"):
        return None
    try:
        if "int" in str(ftype):
            as_float = float(raw)
            if not as_float.is_integer():
                raise ValueError(raw)
            return int(as_float)
        if "float" in str(ftype):
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {ftype}") from None
    return raw


def load_config(path):
    """Parse and validate a config file.

    Returns
    -------
    (BioParams, ControlParams, ScenarioConfig)

    Raises
    ------
    ConfigError
        On a missing file, a parse failure, an unknown key, or a violated
        bound. The message names the offending ``section.key``.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    unknown = set(parser.sections()) - set(_SECTIONS) - {"output"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    values = {}
    for section, cls in _SECTIONS.items():
        kw = {}
        if parser.has_section(section):
            names = {f.name for f in fields(cls)}
            for key, raw in parser.items(section):
                if key not in names:
                    raise ConfigError(f"unknown key {section}.{key}")
                kw[key] = _coerce(cls, key, raw)
        values[section] = kw
    if parser.has_section("output"):
        for key, raw in parser.items("output"):
            if key not in ("dir", "prefix"):
                raise ConfigError(f"unknown key output.{key}")
            values["scenario"]["output_" + key] = raw.strip()

    bio = BioParams(**values["bio"])
    ctrl = ControlParams(**values["control"])
    scen = ScenarioConfig(**values["scenario"])
    validate_control(bio, ctrl)
    return bio, ctrl, scen


def write_config(path, bio, ctrl, scen):
    """Write a config file that :func:`load_config` reads back unchanged."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, obj in (("bio", bio), ("control", ctrl), ("scenario", scen)):
        parser[section] = {}
        for f in fields(obj):
            if f.name in ("output_dir", "output_prefix"):
                continue
            v = getattr(obj, f.name)
            parser[section][f.name] = "none" if v is None else repr(v) if isinstance(v, float) else str(v)
    parser["output"] = {"dir": scen.output_dir, "prefix": scen.output_prefix}
    with open(path, "w") as fh:
        parser.write(fh)


@dataclass(frozen=True)
class RunRecord:
    t: float
    l: float
    c_c: float
    q_s: float
    U: float
    Z: float
    V: float
    w0: float
    wx_l: float
    bc_residual: float


TIMESERIES_HEADER = tuple(f.name for f in fields(RunRecord))
PROFILE_HEADER = ("t", "sigma", "x", "c", "u", "w")


def write_timeseries(records: Sequence[RunRecord], path):
    """Write run records as CSV with the fixed ``TIMESERIES_HEADER``.

    Floats are written with ``repr`` so they round-trip bit-exactly.
    """
    if len(records) == 0:
        raise ValueError("write_timeseries needs at least one record")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_HEADER)
        for rec in records:
            writer.writerow([repr(float(v)) for v in dataclasses.astuple(rec)])


def read_timeseries(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TIMESERIES_HEADER:
            raise ValueError(f"unexpected time-series header {header}")
        return [RunRecord(*map(float, row)) for row in reader]


def write_profiles(snapshots, path):
    """Write profile snapshots (objects with t, sigma, x, c, u, w) as CSV."""
    if len(snapshots) == 0:
        raise ValueError("write_profiles needs at least one snapshot")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_HEADER)
        for snap in snapshots:
            for row in zip(np.full(len(snap.sigma), snap.t), snap.sigma, snap.x, snap.c, snap.u, snap.w):
                writer.writerow([repr(float(v)) for v in row])


def write_plot_script(timeseries_csv, path, profiles_csv=None, l_s=None):
    """Emit a gnuplot script that plots length, cone concentration and Z."""
    ts = Path(timeseries_csv).name
    lines = [
        "# gnuplot script; run with: gnuplot -p " + Path(path).name,
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set multiplot layout 3,1",
        "set xlabel 't [s]'",
        "set ylabel 'l [um]'",
    ]
    target = f", {l_s * 1e6!r} title 'l_s' dt 2" if l_s is not None else ""
    lines.append(f"plot '{ts}' using 1:($2*1e6) with lines title 'l(t)'{target}")
    lines += [
        "set ylabel 'c_c [mol/m^3]'",
        f"plot '{ts}' using 1:3 with lines title 'c_c(t)'",
        "set ylabel 'Z'",
        "set logscale y",
        f"plot '{ts}' using 1:6 with lines title 'Z(t)'",
        "unset logscale y",
        "unset multiplot",
    ]
    if profiles_csv is not None:
        lines += [
            "pause -1",
            "set xlabel 'x [um]'",
            "set ylabel 'c [mol/m^3]'",
            f"plot '{Path(profiles_csv).name}' using ($3*1e6):4:1 with points palette pt 7 ps 0.3 title 'c(x,t)'",
        ]
    Path(path).write_text("\n".join(lines) + "\n")
