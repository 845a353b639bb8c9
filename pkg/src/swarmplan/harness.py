"""Deterministic closed-loop simulation driver and run artifacts.

The loop each step: sense (all robot FOVs), update the map, plan (planner
specific), control, move. The macroscopic and microscopic clocks are coupled
one-to-one: each dt step consumes one interpolated commanded mixture, so the
commanded density travels at dbar / dt.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from .errors import (
    InfeasibleInitialDistributionError,
    OutOfRangeError,
    PlanInfeasibleError,
)
from .gaussians import Gmm
from .micro import (
    KdeEstimate,
    ObstacleDistanceField,
    SwarmState,
    attractive_gradient,
    repulsive_gradient,
    step_robots,
)
from .planner import CollocationSet, PlanState, plan_step
from .scenario import ScenarioConfig
from .transport import wg_metric
from .world import FovSet, GroundTruthWorld, ObstacleMap, observe_and_update

ETA = (1000.0 / 3600.0) ** 2  # (km/hr)^2 -> (m/s)^2, J/kg per unit speed^2

EXIT_COMPLETED = 0
EXIT_TIMEOUT = 2
EXIT_INFEASIBLE = 3

PDF_APF_CHECK_EVERY = 10


@dataclass
class RunRecord:
    """Everything a run produced, wall time kept out of the metric rows."""

    steps: list = field(default_factory=list)  # per-step metric dicts
    positions: list = field(default_factory=list)  # (N, 2) per step incl. t=0
    plan_trace: list = field(default_factory=list)
    t_f: int = 0
    completed: bool = False
    exit_code: int = EXIT_TIMEOUT
    wall_time: float = 0.0
    config: dict = None


@dataclass
class _PlanCfg:
    """The slice of the scenario config the macroscopic planner reads."""

    d_th: float
    dbar: float
    omega_th: float
    lambda_obs: float
    replan_mode: str
    colloc: CollocationSet


def _sample_initial_positions(
    pdf: Gmm, n: int, rng: np.random.Generator, world: GroundTruthWorld
) -> np.ndarray:
    out = np.empty((n, 2))
    filled = 0
    attempts = 0
    while filled < n:
        attempts += 1
        if attempts > 10**6:
            raise InfeasibleInitialDistributionError(
                "initial-position rejection sampling exceeded 1e6 attempts"
            )
        comp = rng.choice(len(pdf), p=pdf.weights)
        g = pdf.components[comp]
        x = rng.multivariate_normal(g.mean, g.cov)
        if not (0 <= x[0] <= world.lx and 0 <= x[1] <= world.ly):
            continue
        if world.occupied(x)[0]:
            continue
        out[filled] = x
        filled += 1
    return out


def init_run(cfg: ScenarioConfig):
    """Seeded world, prior map, swarm, and planner state for one run."""
    world = GroundTruthWorld(cfg.lx, cfg.ly, cfg.true_obstacles)
    m = ObstacleMap(
        (cfg.lx, cfg.ly), cfg.grid_spacing, prior_polygons=cfg.prior_obstacles
    )
    rng = np.random.default_rng(cfg.seed)
    positions = _sample_initial_positions(
        cfg.initial_pdf(), cfg.n_robots, rng, world
    )
    swarm = SwarmState.at_rest(positions)

    if cfg.planner == "adoc":
        planner_state = PlanState(cfg.initial_pdf(), cfg.target_pdf())
    elif cfg.planner == "pdf-apf":
        planner_state = None
    else:
        planner_state = bl.sample_targets(
            cfg.target_pdf(), cfg.n_robots, rng, world
        )
        if cfg.planner == "spp":
            planner_state = bl.pair_targets(swarm, planner_state)
    return world, m, swarm, planner_state


def _colloc(cfg: ScenarioConfig) -> CollocationSet:
    return CollocationSet.uniform(
        cfg.lx, cfg.ly, cfg.colloc_spacing,
        cov=cfg.colloc_cov_scale * np.eye(2),
    )


def _paths_need_replan(paths, changed: np.ndarray, d_th: float) -> bool:
    if len(changed) == 0:
        return False
    pts = [w for p in paths if p for w in p]
    if not pts:
        return False
    pts = np.asarray(pts)
    d2 = ((changed[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return bool(np.min(d2) <= d_th**2)


def run_sim(cfg: ScenarioConfig) -> RunRecord:
    t_start = time.perf_counter()
    world, m, swarm, planner_state = init_run(cfg)
    colloc = _colloc(cfg)
    plan_cfg = _PlanCfg(
        cfg.d_th, cfg.dbar, cfg.omega_th, cfg.lambda_obs, cfg.replan_mode,
        colloc,
    )
    record = RunRecord(config=cfg.to_dict())
    record.positions.append(swarm.positions.copy())

    field_cache = None
    spp_paths = None
    e_cum = 0.0
    last_pdf_apf_d = np.inf
    infeasible_hold = False
    completed = False

    for k in range(cfg.tf_max):
        m = observe_and_update(m, world, FovSet(swarm.positions, cfg.fov_radius))
        new_cells = len(m.changed_occupied)
        if field_cache is None or new_cells:
            field_cache = ObstacleDistanceField(m)

        lp_solved = False
        attract = np.zeros_like(swarm.positions)
        if cfg.planner == "adoc":
            try:
                planner_state = plan_step(planner_state, m, plan_cfg)
                infeasible_hold = False
            except PlanInfeasibleError:
                infeasible_hold = True
            lp_solved = (
                not infeasible_hold and planner_state.lp_solved_last_step
            )
            if lp_solved:
                record.plan_trace.append(
                    {
                        "step": k,
                        "predicted_cost": planner_state.predicted_cost,
                        "goal": _mixture_dict(planner_state.goal_pdf),
                    }
                )
            if planner_state.terminal:
                completed = True
            if not infeasible_hold and not planner_state.terminal:
                attract = cfg.attract_gain * cfg.n_robots * attractive_gradient(
                    swarm, planner_state.current_pdf, cfg.gamma, cfg.bandwidth
                )
            d_to_targ, _ = wg_metric(planner_state.current_pdf, cfg.target_pdf())
        elif cfg.planner == "pdf-apf":
            attract = cfg.pdf_apf_gain * cfg.n_robots * attractive_gradient(
                swarm, cfg.target_pdf(), cfg.gamma, cfg.bandwidth
            )
            if k % PDF_APF_CHECK_EVERY == 0:
                kde = KdeEstimate(swarm.positions, cfg.bandwidth).as_gmm()
                last_pdf_apf_d, _ = wg_metric(kde, cfg.target_pdf())
            d_to_targ = last_pdf_apf_d
            if d_to_targ <= cfg.dbar:
                completed = True
        elif cfg.planner == "sapf":
            swarm, planner_state = bl.sapf_step(
                swarm, planner_state, m, cfg, field_cache
            )
            d_to_targ = _sapf_distance(swarm, planner_state)
            if planner_state.claimed.all():
                completed = True
            e_cum += _step_energy(record.positions[-1], swarm.positions, cfg)
            record.positions.append(swarm.positions.copy())
            record.steps.append(
                _row(k, d_to_targ, new_cells, False, e_cum)
            )
            if completed:
                break
            continue
        else:  # spp
            # Periodic replans recover robots pushed off stale polylines.
            if spp_paths is None or k % 100 == 0 or _paths_need_replan(
                spp_paths, m.changed_occupied, cfg.d_th
            ):
                planner_state, spp_paths = bl.spp_plan(
                    swarm, planner_state, colloc, m, cfg.d_th
                )
                lp_solved = True
            swarm_next = bl.spp_step(swarm, spp_paths, m, cfg, field_cache)
            d_to_targ = float(
                np.mean(
                    np.linalg.norm(
                        swarm_next.positions
                        - planner_state.targets[planner_state.paired],
                        axis=1,
                    )
                )
            )
            # Robot-robot repulsion leaves a small residual offset at the
            # targets, so completion allows twice the claim radius.
            if d_to_targ <= 2.0 * cfg.claim_radius:
                completed = True
            e_cum += _step_energy(
                record.positions[-1], swarm_next.positions, cfg
            )
            swarm = swarm_next
            record.positions.append(swarm.positions.copy())
            record.steps.append(_row(k, d_to_targ, new_cells, lp_solved, e_cum))
            if completed:
                break
            continue

        repulse = repulsive_gradient(
            swarm, m, cfg.rho_obs, cfg.rho_rob, field_cache
        )
        swarm = step_robots(
            swarm, attract, repulse, cfg.dt, cfg.v_max, (cfg.lx, cfg.ly)
        )
        e_cum += _step_energy(record.positions[-1], swarm.positions, cfg)
        record.positions.append(swarm.positions.copy())
        record.steps.append(_row(k, d_to_targ, new_cells, lp_solved, e_cum))
        if completed:
            break

    record.t_f = len(record.steps)
    record.completed = completed
    record.exit_code = EXIT_COMPLETED if completed else EXIT_TIMEOUT
    record.wall_time = time.perf_counter() - t_start
    return record


def _row(step, d_to_targ, new_cells, lp_solved, e_cum):
    return {
        "step": int(step),
        "d_to_targ": float(d_to_targ),
        "new_cells": int(new_cells),
        "lp_solved": int(bool(lp_solved)),
        "e_cum": float(e_cum),
    }


def _step_energy(prev_pos, next_pos, cfg: ScenarioConfig) -> float:
    v2 = ((next_pos - prev_pos) ** 2).sum(axis=1) / cfg.dt**2
    return float(ETA / (2.0 * cfg.n_robots) * v2.sum())


def _sapf_distance(swarm: SwarmState, assign) -> float:
    open_t = assign.targets[~assign.claimed]
    if len(open_t) == 0:
        return 0.0
    d = np.linalg.norm(
        swarm.positions[:, None, :] - open_t[None, :, :], axis=2
    )
    return float(d.min(axis=0).mean())


def _mixture_dict(pdf: Gmm):
    return [
        {
            "mean": [float(v) for v in g.mean],
            "cov": [[float(c) for c in row] for row in g.cov],
            "weight": float(w),
        }
        for g, w in zip(pdf.components, pdf.weights)
    ]


def distance_to_go(record: RunRecord, k: int) -> float:
    """Mean per-robot path length still to travel from step k onward."""
    if k > record.t_f or k < 0:
        raise OutOfRangeError(f"step {k} outside [0, {record.t_f}]")
    total = 0.0
    for tau in range(k, record.t_f):
        seg = record.positions[tau + 1] - record.positions[tau]
        total += np.linalg.norm(seg, axis=1).sum()
    n = len(record.positions[0])
    return float(total / n)


def energy_per_kg(record: RunRecord, k: int) -> float:
    """Mean kinetic proxy of all displacements through step k, in J/kg."""
    if k > record.t_f or k < 0:
        raise OutOfRangeError(f"step {k} outside [0, {record.t_f}]")
    dt = record.config["dt"]
    n = len(record.positions[0])
    total = 0.0
    for tau in range(k):
        seg = record.positions[tau + 1] - record.positions[tau]
        total += ((seg**2).sum(axis=1) / dt**2).sum()
    return float(ETA / (2.0 * n) * total)


def write_outputs(
    record: RunRecord,
    cfg: ScenarioConfig,
    outdir,
    world: GroundTruthWorld = None,
    final_map: ObstacleMap = None,
    positions_every: int = 10,
) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "metrics.csv", "w") as fh:
        fh.write("step,d_to_targ,new_cells,lp_solved,e_cum\n")
        for row in record.steps:
            fh.write(
                f"{row['step']},{row['d_to_targ']:.12g},{row['new_cells']},"
                f"{row['lp_solved']},{row['e_cum']:.12g}\n"
            )

    summary = {
        "t_f": record.t_f,
        "d_rob_0": distance_to_go(record, 0),
        "e_rob_tf": energy_per_kg(record, record.t_f),
        "completed": record.completed,
        "exit_code": record.exit_code,
        "config": record.config,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(out / "positions.csv", "w") as fh:
        fh.write("step,robot,x,y\n")
        last = len(record.positions) - 1
        for t, pos in enumerate(record.positions):
            if t % positions_every and t != last:
                continue
            for r, (x, y) in enumerate(pos):
                fh.write(f"{t},{r},{x:.12g},{y:.12g}\n")

    if record.plan_trace:
        with open(out / "plan_trace.jsonl", "w") as fh:
            for event in record.plan_trace:
                fh.write(json.dumps(event, sort_keys=True))
                fh.write("\n")

    if final_map is not None:
        maps_dir = out / "maps"
        maps_dir.mkdir(exist_ok=True)
        with open(maps_dir / f"step_{record.t_f:05d}.txt", "w") as fh:
            fh.write(final_map.to_text())
            fh.write("\n")


def run_and_write(cfg: ScenarioConfig, outdir) -> RunRecord:
    """Run one simulation and persist all artifacts, including the final map."""
    record = run_sim(cfg)
    # Rebuild the final map deterministically from the recorded trajectory so
    # run_sim itself stays artifact-free.
    world = GroundTruthWorld(cfg.lx, cfg.ly, cfg.true_obstacles)
    m = ObstacleMap(
        (cfg.lx, cfg.ly), cfg.grid_spacing, prior_polygons=cfg.prior_obstacles
    )
    for pos in record.positions:
        m = observe_and_update(m, world, FovSet(pos, cfg.fov_radius))
    write_outputs(record, cfg, outdir, world=world, final_map=m)
    return record
