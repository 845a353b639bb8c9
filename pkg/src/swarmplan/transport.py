"""Discrete optimal transport between mixture weight vectors.

The solver is a transportation simplex specialized to the bipartite
structure: northwest-corner start, MODI (u/v potential) pricing, and
deterministic tie-breaking so repeated runs pivot identically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleMarginalsError
from .gaussians import Gaussian2, Gmm, displacement_interpolate, w2_gaussian

_MARGINAL_TOL = 1e-9
_PERTURB = 1e-12
_REDUCED_COST_TOL = 1e-12


@dataclass(frozen=True)
class TransportPlan:
    """An optimal coupling between two discrete marginals."""

    matrix: np.ndarray  # (n_source, n_sink) joint probabilities
    cost: float  # objective value, km^2

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _northwest_corner(a, b):
    """Initial basic feasible solution; returns (flow dict, basis list)."""
    m, n = len(a), len(b)
    flow = {}
    basis = []
    a = a.copy()
    b = b.copy()
    i = j = 0
    while i < m and j < n:
        x = min(a[i], b[j])
        flow[(i, j)] = x
        basis.append((i, j))
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if a[i] <= b[j] and i < m - 1:
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost, basis, m, n):
    """Solve u_i + v_j = c_ij over the basis tree (u_0 = 0)."""
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for (i, j) in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in row_adj[idx]:
                if np.isnan(v[j]):
                    v[j] = cost[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in col_adj[idx]:
                if np.isnan(u[i]):
                    u[i] = cost[i, idx] - v[idx]
                    stack.append(("r", i))
    return u, v


def _find_cycle(basis, enter, m, n):
    """Unique alternating cycle created by adding ``enter`` to the basis tree."""
    i0, j0 = enter
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for (i, j) in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    # Path from row i0 to col j0 through basis edges.
    parent = {}
    start = ("r", i0)
    goal = ("c", j0)
    parent[start] = None
    queue = [start]
    while queue:
        node = queue.pop(0)
        if node == goal:
            break
        kind, idx = node
        neighbors = (
            [("c", j) for j in row_adj[idx]]
            if kind == "r"
            else [("r", i) for i in col_adj[idx]]
        )
        for nxt in neighbors:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = []
    node = goal
    while node is not None:
        path.append(node)
        node = parent[node]
    path.reverse()  # r(i0), c, r, ..., c(j0)
    cells = [enter]
    for a, b in zip(path, path[1:]):
        (ka, ia), (kb, ib) = a, b
        cells.append((ia, ib) if ka == "r" else (ib, ia))
    return cells  # even positions gain flow, odd positions lose


def _basis_flows(basis, a, b, m, n):
    """Unique flows carried by a basis tree against the given marginals.

    Peels leaves: a row or column incident to a single live basis cell must
    push its whole remaining marginal through that cell.
    """
    rem_a = a.copy()
    rem_b = b.copy()
    row_cells = [[] for _ in range(m)]
    col_cells = [[] for _ in range(n)]
    for cell in basis:
        row_cells[cell[0]].append(cell)
        col_cells[cell[1]].append(cell)
    alive = set(basis)
    plan = np.zeros((m, n))
    while alive:
        progress = False
        for cell in sorted(alive):
            i, j = cell
            row_deg = sum(1 for c in row_cells[i] if c in alive)
            col_deg = sum(1 for c in col_cells[j] if c in alive)
            if row_deg == 1:
                x = rem_a[i]
            elif col_deg == 1:
                x = rem_b[j]
            else:
                continue
            plan[i, j] = x
            rem_a[i] -= x
            rem_b[j] -= x
            alive.discard(cell)
            progress = True
        if not progress:  # pragma: no cover - basis is always a forest
            break
    return plan


def solve_transport(
    cost: np.ndarray, source: np.ndarray, sink: np.ndarray
) -> TransportPlan:
    """Minimize sum(cost * plan) over couplings of ``source`` and ``sink``."""
    cost = np.asarray(cost, dtype=float)
    a = np.asarray(source, dtype=float).reshape(-1)
    b = np.asarray(sink, dtype=float).reshape(-1)
    m, n = len(a), len(b)
    if cost.shape != (m, n):
        raise InfeasibleMarginalsError(
            f"cost shape {cost.shape} does not match marginals ({m}, {n})"
        )
    if abs(a.sum() - b.sum()) > _MARGINAL_TOL:
        raise InfeasibleMarginalsError(
            f"marginal totals differ: {a.sum():.12f} vs {b.sum():.12f}"
        )
    if np.any(a < -_MARGINAL_TOL) or np.any(b < -_MARGINAL_TOL):
        raise InfeasibleMarginalsError("marginals must be nonnegative")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise InfeasibleMarginalsError("cost entries must be finite and >= 0")

    # Anti-cycling guard for degenerate (zero) marginal entries: perturb all
    # supplies and absorb the excess in the last demand.
    ap = np.maximum(a, 0.0) + _PERTURB
    bp = np.maximum(b, 0.0).copy()
    bp[-1] += m * _PERTURB

    flow, basis = _northwest_corner(ap, bp)
    basis = sorted(set(basis))
    max_iter = 20 * m * n + 200
    for _ in range(max_iter):
        u, v = _potentials(cost, basis, m, n)
        reduced = cost - u[:, None] - v[None, :]
        for (i, j) in basis:
            reduced[i, j] = 0.0
        best = reduced.min()
        if best >= -_REDUCED_COST_TOL:
            break
        # Entering variable: most negative reduced cost, lowest (row, col).
        ii, jj = np.unravel_index(
            np.argmax(reduced <= best + 1e-15 * abs(best)), reduced.shape
        )
        enter = (int(ii), int(jj))
        cells = _find_cycle(basis, enter, m, n)
        losing = cells[1::2]
        theta = min(flow[c] for c in losing)
        leave = min(c for c in losing if flow[c] <= theta)
        for idx, c in enumerate(cells):
            if idx % 2 == 0:
                flow[c] = flow.get(c, 0.0) + theta
            else:
                flow[c] -= theta
        basis.remove(leave)
        flow.pop(leave, None)
        basis.append(enter)
        basis.sort()
    # The converged basis stays optimal without the perturbation, so rebuild
    # the flows against the true marginals: this strips the 1e-12 supplies
    # back out and makes the plan's row/column sums exact.
    plan = _basis_flows(basis, np.maximum(a, 0.0), np.maximum(b, 0.0), m, n)
    plan = np.clip(plan, 0.0, None)
    total_cost = float(np.sum(plan * cost))
    return TransportPlan(plan, total_cost)


def _mixture_key(p: Gmm):
    return (
        len(p),
        p.weights.tobytes(),
        np.asarray(p.means).tobytes(),
        b"".join(np.asarray(g.cov).tobytes() for g in p.components),
    )


def wg_metric(p: Gmm, q: Gmm):
    """Mixture-level transport distance built on pairwise Gaussian W2.

    Returns ``(distance, plan)``; the plan is reused for geodesics. The
    arguments are ordered canonically before solving so the distance is
    bitwise symmetric.
    """
    if _mixture_key(q) < _mixture_key(p):
        d, plan = wg_metric(q, p)
        return d, TransportPlan(plan.matrix.T.copy(), plan.cost)
    cost = np.empty((len(p), len(q)))
    for i, gp in enumerate(p.components):
        for j, gq in enumerate(q.components):
            cost[i, j] = w2_gaussian(gp, gq) ** 2
    plan = solve_transport(cost, p.weights, q.weights)
    return float(np.sqrt(max(plan.cost, 0.0))), plan


def gmm_geodesic(p: Gmm, q: Gmm, eps: float, plan: TransportPlan = None) -> Gmm:
    """Mixture at fraction ``eps`` along the geodesic between two GMMs."""
    if plan is None:
        _, plan = wg_metric(p, q)
    comps = []
    weights = []
    for i, gp in enumerate(p.components):
        for j, gq in enumerate(q.components):
            w = plan.matrix[i, j]
            if w <= 1e-15:
                continue
            comps.append(displacement_interpolate(gp, gq, eps))
            weights.append(w)
    w = np.asarray(weights)
    return Gmm(tuple(comps), w / w.sum())
