"""Command line: run a scenario, benchmark planners, or re-render a saved log."""
from __future__ import annotations

import argparse
import os
import sys

from .errors import NavError, ScenarioError

EXIT_OK, EXIT_COLLISION, EXIT_STALL, EXIT_CONFIG = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvpnav", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one closed-loop episode")
    r.add_argument("scenario")
    r.add_argument("--rings", type=int, help="ring count N")
    r.add_argument("--xi", type=float, help="valley gradient threshold")
    r.add_argument("--gamma-r", type=float)
    r.add_argument("--gamma-a", type=float)
    r.add_argument("--wr", type=float)
    r.add_argument("--wa", type=float)
    r.add_argument("--planner", choices=("nvp", "dense"))
    r.add_argument("--seed", type=int)
    r.add_argument("--obstacle-station", type=float,
                   help="centerline station used for the recovery metric")
    r.add_argument("--out", default="out")

    b = sub.add_parser("bench", help="time planners on identical inputs")
    b.add_argument("scenario")
    b.add_argument("--configs", default="nvp4,nvp8,dense")
    b.add_argument("--scans", type=int, help="planner calls per config (inputs are cycled)")
    b.add_argument("--seed", type=int)
    b.add_argument("--no-closed-loop", action="store_true")
    b.add_argument("--out", default="out")

    rp = sub.add_parser("replay", help="re-render artifacts from a saved episode log")
    rp.add_argument("log")
    rp.add_argument("--scenario", help="scenario file for world geometry")
    rp.add_argument("--out", required=True)
    return p


def _writable(path: str) -> None:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ScenarioError(f"output directory {path} is not writable")


def _status_code(status: str) -> int:
    return {"finished": EXIT_OK, "collision": EXIT_COLLISION}.get(status, EXIT_STALL)


def cmd_run(a) -> int:
    from .harness import render_artifacts, summarize
    from .sim.episode import run_episode
    from .sim.scenario import load_scenario, pipeline_config

    scn = load_scenario(a.scenario)
    over = {"ring_count": a.rings, "xi": a.xi, "gamma_r": a.gamma_r, "gamma_a": a.gamma_a,
            "w_r": a.wr, "w_a": a.wa, "planner": a.planner}
    try:
        cfg = pipeline_config(scn, **over)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    _writable(a.out)
    last = {}

    def keep(k, poly, path):
        last["poly"] = poly

    log = run_episode(scn, cfg, seed=a.seed, on_step=keep)
    log.save(os.path.join(a.out, "episode.json"))
    goal = log.steps[-1].goal if log.steps else None
    local_goal = None
    if goal is not None:
        from .geometry import Pose2
        local_goal = Pose2(*log.steps[-1].est_pose).to_local(goal)
    render_artifacts(log, a.out, world=scn.world, polygon=last.get("poly"), goal=local_goal,
                     cfg=cfg, spec=cfg.ring_spec(scn.vehicle), obstacle_station=a.obstacle_station)
    m = summarize(log, scn.world.centerline, a.obstacle_station)
    sys.stdout.write(m.to_text())
    if m.recovery_distance is None and a.obstacle_station is not None:
        print("recovery: none (deviation never settled)")
        return EXIT_STALL if log.status == "finished" else _status_code(log.status)
    return _status_code(log.status)


def cmd_bench(a) -> int:
    from .harness import benchmark, estimate_upper_speed, format_timing_table
    from .sim.scenario import load_scenario

    scn = load_scenario(a.scenario)
    names = [n.strip() for n in a.configs.split(",") if n.strip()]
    _writable(a.out)
    try:
        rows, ref = benchmark(scn, names, scans=a.scans, closed_loop=not a.no_closed_loop,
                              seed=a.seed)
    except ValueError as e:
        raise ScenarioError(str(e)) from e
    table = format_timing_table(rows)
    for r in rows:
        if r.mean_ms > 0:
            table += f"{r.name}: upper speed for d = 1 m: {estimate_upper_speed(r.mean_ms / 1e3, 1.0):.1f} m/s\n"
    with open(os.path.join(a.out, "timing.txt"), "w") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_replay(a) -> int:
    from .harness import render_artifacts
    from .sim.episode import EpisodeLog
    from .sim.scenario import load_scenario

    try:
        log = EpisodeLog.load(a.log)
    except (OSError, ValueError, KeyError) as e:
        raise ScenarioError(f"{a.log}: cannot read episode log: {e}") from e
    world = load_scenario(a.scenario).world if a.scenario else None
    _writable(a.out)
    render_artifacts(log, a.out, world=world)
    print(f"wrote artifacts for {len(log)} steps to {a.out}")
    return _status_code(log.status)


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    try:
        return {"run": cmd_run, "bench": cmd_bench, "replay": cmd_replay}[a.cmd](a)
    except ScenarioError as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except NavError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STALL


if __name__ == "__main__":
    sys.exit(main())
