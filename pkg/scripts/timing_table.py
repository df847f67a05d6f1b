"""Per-scan planner timing of NVP ring counts against the dense grid baseline."""
import argparse

from nvpnav.harness import benchmark, estimate_upper_speed, format_timing_table
from nvpnav.sim.library import BUILDERS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="static_obstacle", choices=sorted(BUILDERS))
    ap.add_argument("--configs", default="nvp4,nvp8,nvp16,dense")
    ap.add_argument("--scans", type=int, default=1000)
    ap.add_argument("--closed-loop", action="store_true")
    a = ap.parse_args()
    rows, _ = benchmark(BUILDERS[a.scenario](), a.configs.split(","), scans=a.scans,
                        closed_loop=a.closed_loop)
    print(format_timing_table(rows), end="")
    for r in rows:
        print(f"{r.name}: {estimate_upper_speed(r.mean_ms / 1e3, 1.0):.1f} m/s for a 1 m margin")


if __name__ == "__main__":
    main()
