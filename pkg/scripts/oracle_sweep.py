"""Agreement between ring valleys and the dense valley mask on seeded random scenes."""
import argparse

import numpy as np

from nvpnav.control import VehicleParams
from nvpnav.harness import oracle_distances, scene_free_space
from nvpnav.pipeline import PipelineConfig
from nvpnav.sim.library import random_static_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--xis", default="0.015,0.02,0.022,0.025,0.027,0.03")
    ap.add_argument("--scenes", type=int, default=20)
    ap.add_argument("--within", type=float, default=0.4)
    a = ap.parse_args()
    vp = VehicleParams()
    specs = {n: PipelineConfig(ring_count=n).ring_spec(vp) for n in (4, 8, 16)}
    scenes = [random_static_scene(s) for s in range(a.scenes)]
    polys = [(scene_free_space(w), g) for w, g in scenes]
    print("xi      " + "  ".join(f"N={n}: within / mean" for n in specs))
    for xi in (float(x) for x in a.xis.split(",")):
        acc = {n: [] for n in specs}
        for poly, goal in polys:
            for n, d in oracle_distances(poly, goal, specs, xi).items():
                acc[n].append(d)
        cells = []
        for n in specs:
            d = np.concatenate(acc[n])
            cells.append(f"{100 * np.mean(d <= a.within + 1e-9):6.1f}% / {d.mean():.3f}")
        print(f"{xi:<7.3f} " + "  ".join(cells))


if __name__ == "__main__":
    main()
