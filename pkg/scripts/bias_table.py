"""Mean lateral deviation in the walled corridor for a range of injected map offsets."""
import argparse

from nvpnav.harness import summarize
from nvpnav.sim.episode import run_episode
from nvpnav.sim.library import corridor
from nvpnav.sim.scenario import pipeline_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--biases", default="0,0.5,1.0,1.5")
    ap.add_argument("--rings", type=int, default=4)
    a = ap.parse_args()
    print("bias_m  mean_dev_m  max_dev_m  status")
    for b in (float(x) for x in a.biases.split(",")):
        scn = corridor(bias=b)
        log = run_episode(scn, pipeline_config(scn, ring_count=a.rings))
        m = summarize(log, scn.world.centerline)
        print(f"{b:6.2f}  {m.mean_deviation:10.3f}  {m.max_deviation:9.3f}  {m.status}")


if __name__ == "__main__":
    main()
