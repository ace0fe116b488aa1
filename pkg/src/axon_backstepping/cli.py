"""Command-line entry point: ``axon-bs {steady,kernel,verify,run,sweep}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (
    BioParams,
    ConfigError,
    ControlParams,
    ScenarioConfig,
    load_config,
    write_plot_script,
    write_profiles,
    write_timeseries,
)
from .diagnostics import decay_fit
from .kernel import build_tables, kernel_residuals
from .simulator import SimulationFault, build_plant, run
from .steady import build_steady_state, c_eq, c_eq_prime, steady_residual
from .verification import verify_suite


def _load(path):
    if path is None:
        return BioParams(), ControlParams(), ScenarioConfig()
    return load_config(path)


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def cmd_steady(args):
    bio, _, scen = _load(args.config)
    l_s = args.l_s if args.l_s is not None else scen.l_s
    ss = build_steady_state(bio, l_s)
    x_max = args.x_max if args.x_max is not None else l_s
    x = np.linspace(args.x_min, x_max, args.n)
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow(["x", "c_eq", "c_eq_prime"])
    for row in zip(x, c_eq(ss, x), c_eq_prime(ss, x)):
        w.writerow([repr(float(v)) for v in row])
    if fh is not sys.stdout:
        fh.close()
    print(
        f"# lambda+ = {ss.lambda_plus:.9g} 1/m, lambda- = {ss.lambda_minus:.9g} 1/m, "
        f"K+ = {ss.K_plus:.9g}, K- = {ss.K_minus:.9g}, q_s* = {ss.q_s_star:.9g} mol/m^4, "
        f"residual = {steady_residual(ss, bio, 101):.3e}",
        file=sys.stderr,
    )
    return 0


def cmd_kernel(args):
    bio, ctrl, scen = _load(args.config)
    l = args.l if args.l is not None else scen.l_s
    plant = build_plant(bio, ctrl, scen.l_s, convention=args.convention)
    tables = build_tables(plant.aug, l, args.n, plant.ctrl.gamma)
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow(["x", "phi1", "phi2", "dphi1", "dphi2", "p1", "p2"])
    # row m holds phi(-x_m) and p(x_m)
    for x, phi, dphi, p in zip(tables.nodes, tables.phi, tables.phi_prime, tables.p):
        w.writerow([repr(float(v)) for v in (x, *phi, *dphi, *p)])
    if fh is not sys.stdout:
        fh.close()
    res = kernel_residuals(plant.aug, plant.ls, l, args.n)
    report = [f"convention: {args.convention}", f"gains: k1 = {plant.ctrl.k1!r}, k2 = {plant.ctrl.k2!r}"
              + (" (fallback)" if plant.used_fallback else "")]
    report += [f"{k}: {v:.3e}" for k, v in res.as_dict().items()]
    report.append(f"worst: {res.worst():.3e}")
    text = "\n".join(report) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stderr.write(text)
    return 0


def _fmt(name, M):
    return f"{name} =\n" + np.array2string(np.atleast_1d(M), precision=6, separator=", ") + "\n"


def cmd_verify(args):
    bio, ctrl, scen = _load(args.config)
    plant, checks = verify_suite(bio, ctrl, scen.l_s, args.n)
    ls, w = plant.ls, plant.weights
    out = []
    if plant.used_fallback:
        out.append(
            f"configured gains k1 = {ctrl.k1!r}, k2 = {ctrl.k2!r} are not Hurwitz; "
            f"using fallback k1 = {plant.ctrl.k1!r}, k2 = {plant.ctrl.k2!r}\n"
        )
    out += [_fmt("A", ls.A), _fmt("B", ls.B), _fmt("C", ls.C), _fmt("K", ls.K)]
    out.append(f"a_tilde = {ls.a_tilde:.9g}\nbeta = {ls.beta:.9g}\n")
    out.append(_fmt("eig(A + B K^T)", ls.eigenvalues))
    out.append(_fmt("P", plant.lp.P))
    out.append(
        f"d1 = {w.d1:.6g}\nd2 = {w.d2:.6g}\nalpha = {w.alpha:.6g} 1/s\n"
        f"v_bar = {w.v_bar:.6g} m/s\nl_bar = {w.l_bar:.6g} m\n"
    )
    print("".join(out))
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 1 if failed else 0


def _summary(result, plant, scen):
    t = np.array([r.t for r in result.records])
    Z = np.array([r.Z for r in result.records])
    last = result.records[-1]
    try:
        kappa = decay_fit(t, Z).kappa
    except ValueError:
        kappa = float("nan")
    return {
        "final_rel_length_error": float(abs(last.l - scen.l_s) / scen.l_s),
        "kappa": float(kappa),
        "steps": result.steps,
        "fault": str(result.fault) if result.fault else "",
    }


def cmd_run(args):
    bio, ctrl, scen = _load(args.config)
    if args.t_final is not None:
        scen = dataclasses.replace(scen, t_final=args.t_final)
    if args.mode is not None:
        ctrl = dataclasses.replace(ctrl, mode=args.mode)
    plant = build_plant(bio, ctrl, scen.l_s, scen.l_0)
    if plant.used_fallback:
        print(f"note: configured gains not Hurwitz; using k1 = {plant.ctrl.k1!r}, k2 = {plant.ctrl.k2!r}",
              file=sys.stderr)
    out_dir = Path(args.out_dir or scen.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run(plant, scen)
    elapsed = time.perf_counter() - t0
    ts = out_dir / f"{scen.output_prefix}_timeseries.csv"
    pr = out_dir / f"{scen.output_prefix}_profiles.csv"
    gp = out_dir / f"{scen.output_prefix}.gp"
    write_timeseries(result.records, ts)
    write_profiles(result.snapshots, pr)
    write_plot_script(ts, gp, pr, scen.l_s)
    s = _summary(result, plant, scen)
    print(f"wrote {ts}, {pr}, {gp}")
    print(f"steps = {s['steps']}, wall = {elapsed:.1f} s, |l - l_s|/l_s = {s['final_rel_length_error']:.3e}, "
          f"kappa = {s['kappa']:.4g} 1/s")
    if result.fault:
        print(f"fault: {result.fault}", file=sys.stderr)
        return 2
    return 0


def _sweep_one(job):
    bio, ctrl, scen, section, key, value = job
    obj = {"bio": bio, "control": ctrl, "scenario": scen}[section]
    if isinstance(getattr(obj, key), int):
        value = int(round(value))
    try:
        obj = dataclasses.replace(obj, **{key: value})
        bio, ctrl, scen = (obj if section == "bio" else bio, obj if section == "control" else ctrl,
                           obj if section == "scenario" else scen)
        plant = build_plant(bio, ctrl, scen.l_s, scen.l_0)
        result = run(plant, scen)
        s = _summary(result, plant, scen)
    except (ConfigError, ValueError, SimulationFault) as exc:
        s = {"final_rel_length_error": float("nan"), "kappa": float("nan"), "steps": 0, "fault": str(exc)}
    return value, s


def cmd_sweep(args):
    bio, ctrl, scen = _load(args.config)
    if args.t_final is not None:
        scen = dataclasses.replace(scen, t_final=args.t_final)
    section, _, key = args.param.partition(".")
    classes = {"bio": BioParams, "control": ControlParams, "scenario": ScenarioConfig}
    if section not in classes or key not in {f.name for f in dataclasses.fields(classes[section])}:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; use section.key, e.g. control.gamma")
    if args.values:
        values = [float(v) for v in args.values.split(",")]
    else:
        start, stop, num = args.range
        space = np.geomspace if args.log else np.linspace
        values = list(space(float(start), float(stop), int(num)))
    jobs = [(bio, ctrl, scen, section, key, v) for v in values]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    fh = _open_out(args.out)
    w = csv.writer(fh)
    w.writerow([args.param, "final_rel_length_error", "kappa", "steps", "fault"])
    for value, s in results:
        w.writerow([repr(float(value)), repr(s["final_rel_length_error"]), repr(s["kappa"]), s["steps"], s["fault"]])
    if fh is not sys.stdout:
        fh.close()
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="axon-bs", description="Backstepping control of axonal growth.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("steady", help="dump the steady profile as CSV")
    s.add_argument("--config")
    s.add_argument("--l-s", type=float, help="set-point length in m (default: scenario.l_s)")
    s.add_argument("--x-min", type=float, default=0.0)
    s.add_argument("--x-max", type=float, help="default: l_s")
    s.add_argument("--n", type=int, default=101)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.set_defaults(func=cmd_steady)

    k = sub.add_parser("kernel", help="dump gain kernels and the residual report")
    k.add_argument("--config")
    k.add_argument("--l", type=float, help="length in m (default: scenario.l_s)")
    k.add_argument("--n", type=int, default=201)
    k.add_argument("--convention", choices=("derived", "printed"), default="derived")
    k.add_argument("--out", help="CSV path (default stdout)")
    k.add_argument("--report", help="residual report path (default stderr)")
    k.set_defaults(func=cmd_kernel)

    v = sub.add_parser("verify", help="print the design and run the invariant checks")
    v.add_argument("--config")
    v.add_argument("--n", type=int, default=201)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", help="simulate one scenario and write CSV and gnuplot output")
    r.add_argument("--config")
    r.add_argument("--t-final", type=float)
    r.add_argument("--mode", choices=("closed_loop", "open_loop_constant", "zero_input"))
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_run)

    w = sub.add_parser("sweep", help="vary one parameter and summarize each run")
    w.add_argument("--config")
    w.add_argument("--param", required=True, help="section.key, e.g. control.gamma")
    g = w.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated values")
    g.add_argument("--range", nargs=3, metavar=("START", "STOP", "NUM"))
    w.add_argument("--log", action="store_true", help="geometric spacing for --range")
    w.add_argument("--t-final", type=float)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out", help="CSV path (default stdout)")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
