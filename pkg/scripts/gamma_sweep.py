"""Obstacle clearance and recovery distance of the static-obstacle run per repulsion exponent."""
import argparse

import numpy as np

from nvpnav.geometry import polyline_station
from nvpnav.harness import summarize
from nvpnav.sim.episode import run_episode
from nvpnav.sim.library import static_obstacle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gammas", default="1,2,3")
    ap.add_argument("--seeds", default="0")
    ap.add_argument("--obstacle-y", type=float, default=0.3)
    ap.add_argument("--width", type=float, default=10.0)
    a = ap.parse_args()
    print("seed  gamma_r  min_clearance_m  recovery_m  mean_dev_m  status")
    for seed in (int(s) for s in a.seeds.split(",")):
        for g in (float(x) for x in a.gammas.split(",")):
            scn = static_obstacle(gamma_r=g, obstacle_y=a.obstacle_y, width=a.width, seed=seed)
            st = float(polyline_station(np.array([scn.world.discs[0].center]),
                                        scn.world.centerline)[0])
            log = run_episode(scn, seed=seed)
            m = summarize(log, scn.world.centerline, st)
            rec = "none" if m.recovery_distance is None else f"{m.recovery_distance:.2f}"
            print(f"{seed:4d}  {g:7.1f}  {m.min_clearance:15.3f}  {rec:>10}  "
                  f"{m.mean_deviation:10.3f}  {m.status}")


if __name__ == "__main__":
    main()
