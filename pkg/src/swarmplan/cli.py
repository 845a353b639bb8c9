"""Command line entry points: run, compare, render."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import SwarmPlanError
from .harness import EXIT_INFEASIBLE, run_and_write
from .scenario import PLANNERS, load_scenario


def _build_parser():
    p = argparse.ArgumentParser(
        prog="swarmplan",
        description="Swarm density planning simulator",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--planner", choices=PLANNERS)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", required=True)

    cmp_ = sub.add_parser("compare", help="run several planners and seeds")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--planners", default=",".join(PLANNERS))
    cmp_.add_argument("--seeds", default="0")
    cmp_.add_argument("--out", required=True)

    ren = sub.add_parser("render", help="draw SVG frames from a finished run")
    ren.add_argument("--run", required=True)
    ren.add_argument("--every", type=int, default=10)
    ren.add_argument("--format", default="svg")
    return p


def _configure(path, planner=None, seed=None):
    cfg = load_scenario(path)
    overrides = {}
    if planner is not None:
        overrides["planner"] = planner
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _configure(args.scenario, args.planner, args.seed)
            record = run_and_write(cfg, args.out)
            print(
                f"planner={cfg.planner} seed={cfg.seed} t_f={record.t_f} "
                f"completed={record.completed}"
            )
            return record.exit_code

        if args.command == "compare":
            planners = [s.strip() for s in args.planners.split(",") if s.strip()]
            seeds = [int(s) for s in args.seeds.split(",")]
            out = Path(args.out)
            results = []
            worst = 0
            for planner in planners:
                for seed in seeds:
                    cfg = _configure(args.scenario, planner, seed)
                    run_dir = out / f"{planner}_seed{seed}"
                    record = run_and_write(cfg, run_dir)
                    with open(run_dir / "summary.json") as fh:
                        summary = json.load(fh)
                    results.append(
                        {
                            "planner": planner,
                            "seed": seed,
                            "t_f": record.t_f,
                            "completed": record.completed,
                            "d_rob_0": summary["d_rob_0"],
                            "e_rob_tf": summary["e_rob_tf"],
                        }
                    )
                    worst = max(worst, record.exit_code)
                    print(
                        f"{planner} seed={seed}: t_f={record.t_f} "
                        f"completed={record.completed} "
                        f"D0={summary['d_rob_0']:.3f} "
                        f"E={summary['e_rob_tf']:.3f}"
                    )
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "compare.json", "w") as fh:
                json.dump(results, fh, indent=2)
                fh.write("\n")
            return worst

        if args.command == "render":
            from .render import render_run

            written = render_run(args.run, every=args.every, fmt=args.format)
            print(f"wrote {len(written)} frames")
            return 0
    except SwarmPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return 0


if __name__ == "__main__":
    sys.exit(main())
