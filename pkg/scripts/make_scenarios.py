"""Write the stock scenarios as YAML files under scenarios/."""
import argparse
import os

from nvpnav.sim.library import BUILDERS, static_obstacle
from nvpnav.sim.scenario import dump_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "scenarios")))
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    built = {name: build() for name, build in BUILDERS.items()}
    for g in (1, 3):
        built[f"static_obstacle_gamma{g}"] = static_obstacle(gamma_r=float(g))
    for name, scn in built.items():
        path = os.path.join(a.out, f"{name}.yaml")
        dump_scenario(scn, path)
        print(path)


if __name__ == "__main__":
    main()
