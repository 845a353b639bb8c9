"""Comparison planners sharing the microscopic machinery.

Three planners: a potential field pulled by the target density itself
(pdf-apf), a potential field of sampled per-robot attraction points (sapf),
and per-robot shortest paths over the collocation grid (spp). All reuse the
same repulsion and speed cap as the main planner so comparisons isolate the
planning layer.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import PathInfeasibleError
from .gaussians import Gmm
from .micro import (
    ObstacleDistanceField,
    SwarmState,
    attractive_gradient,
    repulsive_gradient,
    step_robots,
)
from .planner import CollocationSet
from .world import GroundTruthWorld, ObstacleMap

SAPF_CLAIM_RADIUS = 0.05  # km; half the robot repulsion threshold
SAPF_FORCE_CAP_DIST = 0.001  # km; inverse-square capped below 1 m
# Net attraction cap, applied after the gain. Keeps attraction from
# overpowering the (also capped) obstacle barrier, which would let robots
# tunnel through walls in a single dt step.
SAPF_MAX_ATTRACT = 100.0
OCCUPIED_EDGE_PENALTY = 1e3  # per km of edge length crossing occupied cells


@dataclass
class TargetAssignment:
    """Sampled goal positions with optional robot pairing and claim state."""

    targets: np.ndarray  # (N, 2)
    paired: np.ndarray = None  # robot index -> target index
    claimed: np.ndarray = None
    parked: np.ndarray = None  # robots that claimed a target and now hold still

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float)
        if self.claimed is None:
            self.claimed = np.zeros(len(self.targets), dtype=bool)
        if self.parked is None:
            self.parked = np.zeros(len(self.targets), dtype=bool)


def sample_targets(
    target_pdf: Gmm, n: int, rng: np.random.Generator, world: GroundTruthWorld
) -> TargetAssignment:
    """Draw n i.i.d. goal positions, rejecting draws inside true obstacles."""
    out = np.empty((n, 2))
    filled = 0
    attempts = 0
    while filled < n:
        attempts += 1
        if attempts > 10**6:
            raise PathInfeasibleError("target sampling exhausted its budget")
        comp = rng.choice(len(target_pdf), p=target_pdf.weights)
        g = target_pdf.components[comp]
        x = rng.multivariate_normal(g.mean, g.cov)
        if not (0 <= x[0] <= world.lx and 0 <= x[1] <= world.ly):
            continue
        if world.occupied(x)[0]:
            continue
        out[filled] = x
        filled += 1
    return TargetAssignment(out)


def pair_targets(swarm: SwarmState, assign: TargetAssignment) -> TargetAssignment:
    """Greedy nearest-pair matching, deterministic tie-break by robot index."""
    n = len(swarm.positions)
    d = np.linalg.norm(
        swarm.positions[:, None, :] - assign.targets[None, :, :], axis=2
    )
    paired = np.full(n, -1)
    free_r = set(range(n))
    free_t = set(range(n))
    order = np.argsort(d, axis=None, kind="stable")
    for flat in order:
        i, j = divmod(int(flat), n)
        if i in free_r and j in free_t:
            paired[i] = j
            free_r.discard(i)
            free_t.discard(j)
            if not free_r:
                break
    return replace(assign, paired=paired)


def pdf_apf_step(swarm: SwarmState, target_pdf: Gmm, m: ObstacleMap, cfg,
                 field: ObstacleDistanceField = None) -> SwarmState:
    """One microscopic step attracted by the target density directly."""
    attract = cfg.attract_gain * len(swarm.positions) * attractive_gradient(
        swarm, target_pdf, cfg.gamma, cfg.bandwidth
    )
    repulse = repulsive_gradient(swarm, m, cfg.rho_obs, cfg.rho_rob, field)
    return step_robots(
        swarm, attract, repulse, cfg.dt, cfg.v_max, (cfg.lx, cfg.ly)
    )


def sapf_attract(positions: np.ndarray, assign: TargetAssignment) -> np.ndarray:
    """Summed inverse-square pull from every unclaimed target point."""
    open_targets = assign.targets[~assign.claimed]
    out = np.zeros_like(positions)
    if len(open_targets) == 0:
        return out
    d = positions[:, None, :] - open_targets[None, :, :]  # (N, T, 2)
    r = np.linalg.norm(d, axis=2)
    r = np.maximum(r, SAPF_FORCE_CAP_DIST)
    # U = -r^-2  =>  force = -grad U = -2 r^-4 (x - x_t)
    out = np.einsum("nt,nti->ni", -2.0 / r**4, d)
    return out


def sapf_step(swarm: SwarmState, assign: TargetAssignment, m: ObstacleMap, cfg,
              field: ObstacleDistanceField = None):
    """One step of the sampled-attraction-points baseline.

    A robot that comes within the claim radius of an unclaimed target claims
    it and parks there for good; claimed targets stop attracting. This keeps
    one robot per target, so unreachable targets leave the run incomplete.
    """
    attract = getattr(cfg, "sapf_gain", 2000.0) * sapf_attract(
        swarm.positions, assign
    )
    mag = np.linalg.norm(attract, axis=1)
    over = mag > SAPF_MAX_ATTRACT
    attract[over] *= (SAPF_MAX_ATTRACT / mag[over])[:, None]
    repulse = repulsive_gradient(swarm, m, cfg.rho_obs, cfg.rho_rob, field)
    new_swarm = step_robots(
        swarm, attract, repulse, cfg.dt, cfg.v_max, (cfg.lx, cfg.ly)
    )
    positions = new_swarm.positions.copy()
    positions[assign.parked] = swarm.positions[assign.parked]
    controls = new_swarm.controls.copy()
    controls[assign.parked] = 0.0

    claimed = assign.claimed.copy()
    parked = assign.parked.copy()
    for r in range(len(positions)):
        if parked[r]:
            continue
        open_idx = np.nonzero(~claimed)[0]
        if len(open_idx) == 0:
            break
        d = np.linalg.norm(assign.targets[open_idx] - positions[r], axis=1)
        best = int(np.argmin(d))
        if d[best] <= cfg.claim_radius:
            claimed[open_idx[best]] = True
            parked[r] = True
    new_swarm = SwarmState(positions, controls, new_swarm.step_index)
    return new_swarm, replace(assign, claimed=claimed, parked=parked)


def segment_cost(a: np.ndarray, b: np.ndarray, binary, m: ObstacleMap) -> float:
    """Length of a-b, stiffly penalized by the fraction crossing occupied cells."""
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return 0.0
    n_s = max(int(length / (m.dx / 2.0)), 2)
    ts = (np.arange(n_s) + 0.5) / n_s
    pts = a[None, :] + ts[:, None] * (b - a)[None, :]
    ix = np.clip((pts[:, 0] / m.dx).astype(int), 0, m.nx - 1)
    iy = np.clip((pts[:, 1] / m.dy).astype(int), 0, m.ny - 1)
    occ_frac = binary[ix, iy].mean()
    return length * (1.0 + OCCUPIED_EDGE_PENALTY * occ_frac)


class SppGraph:
    """Waypoint graph over collocation means plus sampled targets."""

    def __init__(self, colloc: CollocationSet, targets: np.ndarray, d_th: float):
        self.nodes = np.vstack([colloc.means, targets])
        self.n_colloc = len(colloc.means)
        self.d_th = d_th
        d = np.linalg.norm(
            self.nodes[:, None, :] - self.nodes[None, :, :], axis=2
        )
        self.edge_mask = (d <= d_th) & (d > 0)
        self.lengths = d

    def edge_costs(self, m: ObstacleMap) -> csr_matrix:
        b = m.binary()
        i_idx, j_idx = np.nonzero(self.edge_mask)
        costs = np.empty(len(i_idx))
        for e, (i, j) in enumerate(zip(i_idx, j_idx)):
            costs[e] = segment_cost(self.nodes[i], self.nodes[j], b, m)
        return csr_matrix(
            (costs, (i_idx, j_idx)), shape=(len(self.nodes), len(self.nodes))
        )


def spp_plan(
    swarm: SwarmState,
    assign: TargetAssignment,
    colloc: CollocationSet,
    m: ObstacleMap,
    d_th: float = None,
):
    """Per-robot waypoint paths to the paired targets.

    Robots with no finite-cost route raise at lookup time would be silent;
    instead the path entry is None and the caller holds that robot in place.
    """
    if assign.paired is None:
        assign = pair_targets(swarm, assign)
    d_th = d_th if d_th is not None else 4.0
    graph = SppGraph(colloc, assign.targets, d_th)
    costs = graph.edge_costs(m)
    # Reverse Dijkstra from every target node at once, then read off each
    # robot's entry hop.
    target_ids = graph.n_colloc + np.arange(len(assign.targets))
    dist, pred = dijkstra(
        costs.T.tocsr(), directed=True, indices=target_ids,
        return_predecessors=True,
    )
    b = m.binary()
    paths = []
    for r, t in enumerate(assign.paired):
        goal = graph.n_colloc + t
        start_pos = swarm.positions[r]
        # Entry node: cheapest (entry cost + cost-to-go) over nodes in reach,
        # entry hop priced like any other edge.
        raw = np.linalg.norm(graph.nodes - start_pos, axis=1)
        reach = np.nonzero(raw <= d_th)[0]
        if len(reach) == 0:
            paths.append(None)
            continue
        total = np.full(len(graph.nodes), np.inf)
        for j in reach:
            total[j] = segment_cost(start_pos, graph.nodes[j], b, m) + dist[t, j]
        entry = int(np.argmin(total))
        if not np.isfinite(total[entry]):
            paths.append(None)
            continue
        if entry == goal:
            paths.append([assign.targets[t].copy()])
            continue
        seq = [graph.nodes[entry].copy()]
        node = entry
        while node != goal:
            nxt = pred[t, node]
            if nxt < 0:
                break
            seq.append(graph.nodes[nxt].copy())
            node = int(nxt)
        paths.append(seq)
    return assign, paths


def spp_step(swarm: SwarmState, paths, m: ObstacleMap, cfg,
             field: ObstacleDistanceField = None):
    """Advance each robot toward its next waypoint at the speed cap."""
    pos = swarm.positions
    attract = np.zeros_like(pos)
    waypoint_tol = cfg.dbar
    for r, path in enumerate(paths):
        while path and np.linalg.norm(pos[r] - path[0]) <= waypoint_tol:
            path.pop(0)
        # Skip a waypoint the robot has effectively passed (repulsion can
        # push it off the polyline near obstacle corners).
        while len(path) >= 2 and np.linalg.norm(
            pos[r] - path[1]
        ) < np.linalg.norm(path[0] - path[1]):
            path.pop(0)
        if not path:
            continue
        d = path[0] - pos[r]
        attract[r] = cfg.v_max * d / np.linalg.norm(d)
    repulse = repulsive_gradient(swarm, m, cfg.rho_obs, cfg.rho_rob, field)
    return step_robots(
        swarm, attract, repulse, cfg.dt, cfg.v_max, (cfg.lx, cfg.ly)
    )
