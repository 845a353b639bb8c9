"""Macroscopic planning: collocation components, the obstacle-penalized
component graph, multi-target shortest paths, and the sparse control LP.

The planner moves the swarm's mixture one commanded step at a time: solve the
LP for a goal mixture supported on the collocation grid, interpolate the
geodesic toward it, and replay the queue until the map changes nearby.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.sparse.csgraph import dijkstra

from .errors import InvalidParameterError, PlanInfeasibleError
from .gaussians import (
    DEFAULT_WEIGHT_THRESHOLD,
    Gaussian2,
    Gmm,
    prune_and_renormalize,
    sqrtm_spd2,
    w2_gaussian,
)
from .transport import TransportPlan, solve_transport, wg_metric, gmm_geodesic
from .world import ObstacleMap, gaussian_map_inner

_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class CollocationSet:
    """Uniform grid of Gaussian components with one shared covariance."""

    means: np.ndarray  # (n_c, 2), km
    cov: np.ndarray  # (2, 2), km^2, shared
    spacing: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        cov = 0.5 * (np.asarray(self.cov, dtype=float) + np.asarray(self.cov).T)
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise InvalidParameterError("collocation covariance must be SPD")
        means.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "cov", cov)

    def __len__(self):
        return len(self.means)

    @property
    def components(self):
        return tuple(Gaussian2(mu, self.cov) for mu in self.means)

    @staticmethod
    def uniform(lx: float, ly: float, spacing: float, cov=None) -> "CollocationSet":
        """Grid of means at half-spacing offsets covering [0,lx] x [0,ly]."""
        if cov is None:
            cov = 0.5 * np.eye(2)
        nx = int(round(lx / spacing))
        ny = int(round(ly / spacing))
        xs = (np.arange(nx) + 0.5) * spacing
        ys = (np.arange(ny) + 0.5) * spacing
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return CollocationSet(
            np.column_stack([gx.ravel(), gy.ravel()]), np.asarray(cov, float), spacing
        )


@dataclass
class PlannerGraph:
    """Directed graph over collocation + target components.

    Edge (i -> j) exists when W2(g_i, g_j) <= d_th; its weight is the squared
    W2 plus the head node's obstacle penalty. Hops into target nodes carry no
    obstacle term (they model the terminal cost), and targets have no
    outgoing edges.
    """

    colloc: CollocationSet
    targets: Gmm
    d_th: float
    penalties: np.ndarray  # (n_c,) obstacle mass per collocation node, scaled
    adj: sp.csr_matrix  # (n_c + n_t) square, rows of targets empty
    w2_to_targets: np.ndarray  # (n_c, n_t) plain W2 distances

    @property
    def n_c(self):
        return len(self.colloc)

    @property
    def n_t(self):
        return len(self.targets)


def build_graph(
    colloc: CollocationSet,
    targets: Gmm,
    m: ObstacleMap,
    d_th: float,
    lambda_obs: float = 1.0,
) -> PlannerGraph:
    """Assemble the obstacle-penalized component graph for the current map."""
    if d_th < colloc.spacing:
        raise InvalidParameterError(
            f"d_th={d_th} below collocation spacing {colloc.spacing}; "
            "the graph would disconnect"
        )
    n_c = len(colloc)
    n_t = len(targets)
    penalties = np.array(
        [lambda_obs * gaussian_map_inner(g, m) for g in colloc.components]
    )
    # Shared covariance: W2 between collocation components is the mean
    # distance, no Bures term.
    mu = colloc.means
    dists = np.sqrt(
        ((mu[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
    )
    w2t = np.empty((n_c, n_t))
    sc_half = sqrtm_spd2(colloc.cov)
    for j, gt in enumerate(targets.components):
        cross = sqrtm_spd2(sc_half @ gt.cov @ sc_half)
        bures = max(
            np.trace(colloc.cov) + np.trace(gt.cov) - 2.0 * np.trace(cross), 0.0
        )
        dm = mu - gt.mean
        w2t[:, j] = np.sqrt((dm**2).sum(axis=1) + bures)

    n = n_c + n_t
    rows, cols, vals = [], [], []
    cc_mask = dists <= d_th + _EDGE_TOL
    ci, cj = np.nonzero(cc_mask)
    rows.append(ci)
    cols.append(cj)
    vals.append(dists[ci, cj] ** 2 + penalties[cj])
    ti, tj = np.nonzero(w2t <= d_th + _EDGE_TOL)
    rows.append(ti)
    cols.append(n_c + tj)
    vals.append(w2t[ti, tj] ** 2)
    adj = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return PlannerGraph(colloc, targets, d_th, penalties, adj, w2t)


def shortest_paths_to_targets(graph: PlannerGraph):
    """Cheapest directed path cost from every collocation node to every target.

    Returns ``(costs, successors)`` where ``costs[i, j]`` is the path cost
    from collocation node i to target j (inf if unreachable) and
    ``successors[i, j]`` is the next node on that path (-9999 sentinel at
    the end / unreachable).
    """
    n_c, n_t = graph.n_c, graph.n_t
    # One reverse Dijkstra pass per target over the transposed graph.
    dist, pred = dijkstra(
        graph.adj.T.tocsr(),
        directed=True,
        indices=np.arange(n_c, n_c + n_t),
        return_predecessors=True,
    )
    costs = dist[:, :n_c].T.copy()
    successors = pred[:, :n_c].T.copy()
    return costs, successors


def shortest_costs_to_targets(graph: PlannerGraph) -> np.ndarray:
    costs, _ = shortest_paths_to_targets(graph)
    return costs


def reconstruct_path(graph: PlannerGraph, successors, start: int, target: int):
    """Node sequence from collocation node ``start`` to target ``target``."""
    n_c = graph.n_c
    goal = n_c + target
    path = [start]
    node = start
    while node != goal:
        nxt = successors[node, target] if node < n_c else -9999
        if nxt < 0:
            return None
        path.append(int(nxt))
        node = int(nxt)
    return path


def ltilde_fixed_horizon(graph: PlannerGraph, horizon: int) -> np.ndarray:
    """Cheapest length-``horizon`` walk cost to each target.

    Exactly ``horizon`` hops among collocation nodes (staying in place is a
    legal hop that pays only the node's obstacle term), then a terminal hop
    into the target paying squared W2 alone.
    """
    n_c, n_t = graph.n_c, graph.n_t
    f = np.where(
        graph.w2_to_targets <= graph.d_th + _EDGE_TOL,
        graph.w2_to_targets**2,
        np.inf,
    )
    mu = graph.colloc.means
    dists = np.sqrt(((mu[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2))
    mask = dists <= graph.d_th + _EDGE_TOL
    step_cost = np.where(mask, dists**2 + graph.penalties[None, :], np.inf)
    for _ in range(horizon):
        f = np.min(step_cost[:, :, None] + f[None, :, :], axis=1)
    return f


@dataclass
class PlanState:
    """Mutable planner state owned by one simulation driver."""

    current_pdf: Gmm
    target_pdf: Gmm
    goal_pdf: Gmm = None
    interp_queue: list = field(default_factory=list)
    predicted_cost: float = np.inf
    accrued_cost: float = 0.0
    terminal: bool = False
    lp_solved_last_step: bool = False
    pi: np.ndarray = None
    pi_tilde: np.ndarray = None
    used_paths: dict = field(default_factory=dict)  # (colloc, target) -> node seq


def solve_control_lp(
    current: Gmm,
    targets: Gmm,
    colloc: CollocationSet,
    graph: PlannerGraph,
    ltilde: np.ndarray,
    m: ObstacleMap,
    omega_th: float = DEFAULT_WEIGHT_THRESHOLD,
    progress_tie_break: float = 1e-6,
):
    """One-step control LP over the coupled transport pair (pi, pi_tilde).

    Minimizes the one-step transport-plus-obstacle cost into the collocation
    set plus the shortest-path cost-to-go out of it, subject to the three
    marginal constraints linking current weights, the shared middle marginal,
    and the target weights.

    With shortest-path costs-to-go, staying put ties exactly with advancing
    one hop along the optimal path. The cost-to-go terms are scaled by
    (1 + progress_tie_break) during the solve so the optimizer strictly
    prefers progress; the returned objective is the unscaled cost of the
    chosen plan.
    """
    n_k = len(current)
    n_c = len(colloc)
    n_t = len(targets)
    d_th = graph.d_th

    # One-step costs and per-component feasible collocation sets.
    L = np.full((n_k, n_c), np.inf)
    mu = colloc.means
    sc_half = sqrtm_spd2(colloc.cov)
    feas_sets = []
    for i, g in enumerate(current.components):
        cross = sqrtm_spd2(sc_half @ g.cov @ sc_half)
        bures = max(
            np.trace(colloc.cov) + np.trace(g.cov) - 2.0 * np.trace(cross), 0.0
        )
        dm = mu - g.mean
        w2 = np.sqrt((dm**2).sum(axis=1) + bures)
        feas = np.nonzero(w2 <= d_th + _EDGE_TOL)[0]
        if len(feas) == 0:
            raise PlanInfeasibleError(
                f"current component {i} has no collocation node within d_th",
                component_index=i,
            )
        L[i, feas] = w2[feas] ** 2 + graph.penalties[feas]
        feas_sets.append(feas)

    middle = np.unique(np.concatenate(feas_sets))
    mid_pos = {int(idx): p for p, idx in enumerate(middle)}

    pi_vars = [
        (i, int(idx)) for i in range(n_k) for idx in feas_sets[i]
    ]
    pt_vars = [
        (int(idx), j)
        for idx in middle
        for j in range(n_t)
        if np.isfinite(ltilde[idx, j])
    ]
    n_pi = len(pi_vars)
    n_pt = len(pt_vars)
    if n_pt == 0:
        raise PlanInfeasibleError("no reachable target from the feasible set")

    c_pi = np.array([L[i, idx] for (i, idx) in pi_vars])
    c_pt = np.array([ltilde[idx, j] for (idx, j) in pt_vars])
    c = np.concatenate([c_pi, (1.0 + progress_tie_break) * c_pt])
    rows, cols, vals = [], [], []
    # Row sums of pi equal current weights.
    for v, (i, idx) in enumerate(pi_vars):
        rows.append(i)
        cols.append(v)
        vals.append(1.0)
    # Column sums of pi_tilde equal target weights.
    for v, (idx, j) in enumerate(pt_vars):
        rows.append(n_k + j)
        cols.append(n_pi + v)
        vals.append(1.0)
    # Shared middle marginal: pi columns minus pi_tilde rows vanish.
    base = n_k + n_t
    for v, (i, idx) in enumerate(pi_vars):
        rows.append(base + mid_pos[idx])
        cols.append(v)
        vals.append(1.0)
    for v, (idx, j) in enumerate(pt_vars):
        rows.append(base + mid_pos[idx])
        cols.append(n_pi + v)
        vals.append(-1.0)
    a_eq = sp.csr_matrix(
        (vals, (rows, cols)), shape=(base + len(middle), n_pi + n_pt)
    )
    b_eq = np.concatenate(
        [current.weights, targets.weights, np.zeros(len(middle))]
    )
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise PlanInfeasibleError(f"control LP infeasible: {res.message}")

    pi = np.zeros((n_k, n_c))
    for v, (i, idx) in enumerate(pi_vars):
        pi[i, idx] = max(res.x[v], 0.0)
    pi_tilde = np.zeros((n_c, n_t))
    for v, (idx, j) in enumerate(pt_vars):
        pi_tilde[idx, j] = max(res.x[n_pi + v], 0.0)

    weights = pi.sum(axis=0)
    raw = Gmm(colloc.components, weights / weights.sum())
    goal = prune_and_renormalize(raw, omega_th)
    objective = float(
        np.sum(res.x[:n_pi] * c_pi) + np.sum(res.x[n_pi:] * c_pt)
    )
    plan_pair = (
        TransportPlan(pi, float(np.sum(pi * np.where(np.isfinite(L), L, 0.0)))),
        TransportPlan(
            pi_tilde,
            float(np.sum(pi_tilde * np.where(np.isfinite(ltilde), ltilde, 0.0))),
        ),
    )
    return goal, plan_pair, objective


def interpolate_plan(
    current: Gmm, goal: Gmm, plan: TransportPlan, dbar: float
) -> list:
    """Split the geodesic from current to goal into even dbar-length steps.

    Returns the intermediate mixtures followed by the goal itself; an empty
    distance (or one shorter than dbar) yields just ``[goal]``.
    """
    if dbar <= 0:
        raise InvalidParameterError("dbar must be positive")
    if plan is None:
        d, plan = wg_metric(current, goal)
    else:
        cost = 0.0
        for i, gp in enumerate(current.components):
            for j, gq in enumerate(goal.components):
                if plan.matrix[i, j] > 0:
                    cost += plan.matrix[i, j] * w2_gaussian(gp, gq) ** 2
        d = float(np.sqrt(max(cost, 0.0)))
    t_k = max(int(np.ceil(d / dbar)), 1)
    out = []
    for s in range(1, t_k):
        out.append(gmm_geodesic(current, goal, s / t_k, plan=plan))
    out.append(goal)
    return out


def _changed_cells_near_support(state: PlanState, m: ObstacleMap, d_th: float):
    changed = m.changed_occupied
    if len(changed) == 0:
        return False
    means = [state.current_pdf.means]
    for g in state.interp_queue:
        means.append(g.means)
    if state.goal_pdf is not None:
        means.append(state.goal_pdf.means)
    support = np.vstack(means)
    d2 = ((changed[:, None, :] - support[None, :, :]) ** 2).sum(axis=2)
    return bool(np.min(d2) <= d_th**2)


def plan_step(state: PlanState, m: ObstacleMap, cfg) -> PlanState:
    """Advance the commanded mixture one step, replanning when needed.

    ``cfg`` needs: d_th, dbar, omega_th, lambda_obs, replan_mode
    ('triggered' or 'every-step'), colloc (CollocationSet).
    """
    if state.terminal:
        return state
    d_to_target, _ = wg_metric(state.current_pdf, state.target_pdf)
    if d_to_target <= cfg.dbar:
        state.terminal = True
        state.lp_solved_last_step = False
        return state

    must_replan = (
        not state.interp_queue
        or cfg.replan_mode == "every-step"
        or _changed_cells_near_support(state, m, cfg.d_th)
    )
    if must_replan and d_to_target <= cfg.d_th:
        # Terminal descent: the target set is one hop away, which is exactly
        # the final edge of the cost-to-go recursion. The LP over collocation
        # mixtures can never close the residual covariance/mean gap itself,
        # so interpolate straight into the target density.
        state.goal_pdf = state.target_pdf
        state.pi = None
        state.pi_tilde = None
        state.predicted_cost = d_to_target**2
        state.used_paths = {}
        state.interp_queue = interpolate_plan(
            state.current_pdf, state.target_pdf, None, cfg.dbar
        )
    elif must_replan:
        graph = build_graph(
            cfg.colloc, state.target_pdf, m, cfg.d_th, cfg.lambda_obs
        )
        ltilde, successors = shortest_paths_to_targets(graph)
        goal, (pi, pit), cost = solve_control_lp(
            state.current_pdf,
            state.target_pdf,
            cfg.colloc,
            graph,
            ltilde,
            m,
            cfg.omega_th,
        )
        state.goal_pdf = goal
        state.pi = pi.matrix
        state.pi_tilde = pit.matrix
        state.predicted_cost = cost
        state.used_paths = {}
        for idx, j in zip(*np.nonzero(pit.matrix > 1e-12)):
            state.used_paths[(int(idx), int(j))] = reconstruct_path(
                graph, successors, int(idx), int(j)
            )
        state.interp_queue = interpolate_plan(
            state.current_pdf, goal, None, cfg.dbar
        )
    prev = state.current_pdf
    state.current_pdf = state.interp_queue.pop(0)
    step_d, _ = wg_metric(prev, state.current_pdf)
    state.accrued_cost += step_d**2 + sum(
        w * gaussian_map_inner(g, m)
        for w, g in zip(state.current_pdf.weights, state.current_pdf.components)
    )
    state.lp_solved_last_step = must_replan
    return state


def evaluate_plan_under_map(
    current: Gmm,
    graph_map: ObstacleMap,
    colloc: CollocationSet,
    pi: np.ndarray,
    pi_tilde: np.ndarray,
    used_paths: dict,
    targets: Gmm,
    lambda_obs: float = 1.0,
) -> float:
    """Re-price a stored plan's LP objective under a (possibly newer) map.

    The transport couplings and shortest-path routes stay fixed; only the
    obstacle penalties are re-evaluated, so plans chosen with stale knowledge
    can be compared against replans under one frozen map.
    """
    comps = colloc.components
    pen = np.array(
        [lambda_obs * gaussian_map_inner(g, graph_map) for g in comps]
    )
    total = 0.0
    for i, idx in zip(*np.nonzero(pi > 1e-15)):
        total += pi[i, idx] * (
            w2_gaussian(current.components[i], comps[idx]) ** 2 + pen[idx]
        )
    mu = colloc.means
    for (idx, j), path in used_paths.items():
        if path is None:
            return np.inf
        cost = 0.0
        for a, b in zip(path, path[1:]):
            if b >= len(comps):  # terminal hop into the target
                cost += w2_gaussian(comps[a], targets.components[b - len(comps)]) ** 2
            else:
                cost += ((mu[a] - mu[b]) ** 2).sum() + pen[b]
        total += pi_tilde[idx, j] * cost
    return total
