"""Closed loop against the open-loop and zero-input baselines from the parameter-table start.

Writes one time series per mode plus a gnuplot script, and prints final errors.
"""
import argparse
import dataclasses
from pathlib import Path

import numpy as np

from axon_backstepping.config import load_config, write_plot_script, write_profiles, write_timeseries
from axon_backstepping.simulator import build_plant, run
from axon_backstepping.steady import c_eq


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).parent.parent / "configs" / "table1.ini"))
    ap.add_argument("--t-final", type=float, default=60.0)
    ap.add_argument("--out-dir", default="output/growth")
    args = ap.parse_args()
    bio, ctrl, scen = load_config(args.config)
    scen = dataclasses.replace(scen, t_final=args.t_final)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'mode':>20} {'|l-l_s|/l_s':>12} {'max|c-c_eq|/c_inf':>18} {'fault':>6}")
    for mode in ("closed_loop", "open_loop_constant", "zero_input"):
        plant = build_plant(bio, dataclasses.replace(ctrl, mode=mode), scen.l_s, scen.l_0)
        res = run(plant, scen)
        f = res.final
        dl = abs(f.l - scen.l_s) / scen.l_s
        dc = np.abs(f.c - c_eq(plant.ss, f.sigma * f.l)).max() / bio.c_inf
        ts, pr = out / f"{mode}_timeseries.csv", out / f"{mode}_profiles.csv"
        write_timeseries(res.records, ts)
        write_profiles(res.snapshots, pr)
        write_plot_script(ts, out / f"{mode}.gp", pr, scen.l_s)
        print(f"{mode:>20} {dl:12.3e} {dc:18.3e} {'yes' if res.fault else 'no':>6}")


if __name__ == "__main__":
    main()
