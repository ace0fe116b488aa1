"""Fitted H1 decay rate of small perturbations as gamma and k1 vary."""
import argparse
import dataclasses

import numpy as np

from axon_backstepping.config import BioParams, ControlParams, ScenarioConfig
from axon_backstepping.diagnostics import decay_fit
from axon_backstepping.linsys import fallback_gains
from axon_backstepping.simulator import build_plant, run


def fit_run(bio, ctrl, scen):
    plant = build_plant(bio, ctrl, scen.l_s, scen.l_0)
    res = run(plant, scen)
    t = np.array([r.t for r in res.records])
    Z = np.array([r.Z for r in res.records])
    return plant, decay_fit(t, Z)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-final", type=float, default=10.0)
    ap.add_argument("--gammas", default="1e4,3e4,1e5")
    ap.add_argument("--k1s", default="0.5,1,2")
    args = ap.parse_args()
    bio = BioParams()
    scen = ScenarioConfig(l_0=0.9 * 12e-6, c0_multiple=1.05, t_final=args.t_final, record_every=10,
                          snapshot_every=10 ** 9)
    print(f"{'gamma':>10} {'k1':>6} {'k2':>10} {'kappa':>8} {'R^2':>7} {'alpha':>10}")
    for gamma in map(float, args.gammas.split(",")):
        for k1 in map(float, args.k1s.split(",")):
            _, k2 = fallback_gains(bio, k1)
            ctrl = dataclasses.replace(ControlParams(), gamma=gamma, k1=k1, k2=k2)
            plant, fit = fit_run(bio, ctrl, scen)
            print(f"{gamma:10.3g} {k1:6.2f} {k2:10.4g} {fit.kappa:8.3f} {fit.r2:7.4f} {plant.weights.alpha:10.3g}")


if __name__ == "__main__":
    main()
