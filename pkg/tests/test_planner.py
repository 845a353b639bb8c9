"""Unit tests for the macroscopic planner: graph, cost-to-go, and control LP."""
from types import SimpleNamespace

import itertools

import numpy as np
import pytest

from swarmplan import (
    CollocationSet,
    Gmm,
    InvalidParameterError,
    PlanInfeasibleError,
    build_graph,
    interpolate_plan,
    plan_step,
    solve_control_lp,
    wg_metric,
)
from swarmplan.planner import (
    PlanState,
    evaluate_plan_under_map,
    ltilde_fixed_horizon,
    reconstruct_path,
    shortest_paths_to_targets,
)
from swarmplan.world import ObstacleMap


def line_colloc():
    # five nodes along y = 0.5, spacing 1
    return CollocationSet.uniform(5.0, 1.0, 1.0)


def free_map():
    return ObstacleMap((5.0, 1.0), 0.5)


def line_target(colloc):
    return Gmm.single([4.5, 0.5], colloc.cov)


class TestCollocationSet:
    def test_uniform_layout(self):
        c = CollocationSet.uniform(2.0, 1.0, 0.5)
        assert len(c) == 8
        assert c.means[:, 0].min() == pytest.approx(0.25)
        assert c.means[:, 0].max() == pytest.approx(1.75)
        np.testing.assert_allclose(c.cov, 0.5 * np.eye(2))

    def test_rejects_bad_cov(self):
        with pytest.raises(InvalidParameterError):
            CollocationSet.uniform(1.0, 1.0, 0.5, cov=-np.eye(2))

    def test_components_share_cov(self):
        c = line_colloc()
        for g in c.components:
            np.testing.assert_array_equal(g.cov, c.cov)


class TestBuildGraph:
    def test_rejects_dth_below_spacing(self):
        with pytest.raises(InvalidParameterError):
            build_graph(line_colloc(), line_target(line_colloc()), free_map(), 0.5)

    def test_free_map_zero_penalties(self):
        c = line_colloc()
        g = build_graph(c, line_target(c), free_map(), 1.0)
        np.testing.assert_array_equal(g.penalties, 0.0)

    def test_edges_limited_by_dth(self):
        c = line_colloc()
        g = build_graph(c, line_target(c), free_map(), 1.0)
        adj = g.adj.toarray()
        # node 0 reaches itself and node 1, never node 2 (distance 2 > d_th)
        assert adj[0, 1] == pytest.approx(1.0)
        assert adj[0, 2] == 0.0
        # target column: only nodes 3 (W2 = 1) and 4 (W2 = 0) connect
        assert adj[3, 5] == pytest.approx(1.0)
        assert adj[2, 5] == 0.0
        # targets have no outgoing edges
        assert not adj[5].any()

    def test_penalty_lands_on_head_node(self):
        c = line_colloc()
        m = ObstacleMap(
            (5.0, 1.0), 0.5,
            prior_polygons=[[[2.0, 0.0], [3.0, 0.0], [3.0, 1.0], [2.0, 1.0]]],
        )
        g = build_graph(c, line_target(c), m, 1.0, lambda_obs=10.0)
        assert g.penalties[2] > 0
        adj = g.adj.toarray()
        assert adj[1, 2] == pytest.approx(1.0 + g.penalties[2])
        assert adj[2, 1] == pytest.approx(1.0 + g.penalties[1])


class TestShortestPaths:
    def test_straight_line_cost(self):
        c = line_colloc()
        g = build_graph(c, line_target(c), free_map(), 1.0)
        costs, succ = shortest_paths_to_targets(g)
        # four unit hops from node 0, each costing 1 squared
        assert costs[0, 0] == pytest.approx(4.0)
        assert costs[4, 0] == pytest.approx(0.0)
        path = reconstruct_path(g, succ, 0, 0)
        assert path[0] == 0 and path[-1] == 5
        assert len(path) <= 6

    def test_unreachable_is_inf(self):
        c = line_colloc()
        far = Gmm.single([100.0, 100.0], c.cov)
        g = build_graph(c, line_target(c), free_map(), 1.0)
        # overwrite targets with an unreachable one by rebuilding
        g2 = build_graph(c, far, free_map(), 1.0)
        costs, succ = shortest_paths_to_targets(g2)
        assert np.all(np.isinf(costs))
        assert reconstruct_path(g2, succ, 0, 0) is None


class TestLtildeFixedHorizon:
    def brute_force(self, graph, horizon):
        n_c, n_t = graph.n_c, graph.n_t
        mu = graph.colloc.means
        d = np.sqrt(((mu[:, None] - mu[None, :]) ** 2).sum(axis=2))
        step = np.where(d <= graph.d_th + 1e-12, d**2 + graph.penalties[None, :], np.inf)
        term = np.where(
            graph.w2_to_targets <= graph.d_th + 1e-12,
            graph.w2_to_targets**2,
            np.inf,
        )
        out = np.full((n_c, n_t), np.inf)
        for start in range(n_c):
            for walk in itertools.product(range(n_c), repeat=horizon):
                chain = (start,) + walk
                cost = sum(step[a, b] for a, b in zip(chain, chain[1:]))
                for j in range(n_t):
                    out[start, j] = min(out[start, j], cost + term[chain[-1], j])
        return out

    def test_matches_walk_enumeration(self):
        c = CollocationSet.uniform(2.0, 1.0, 1.0)  # two nodes: fast enumeration
        m = ObstacleMap(
            (2.0, 1.0), 0.5,
            prior_polygons=[[[1.2, 0.2], [1.6, 0.2], [1.6, 0.8], [1.2, 0.8]]],
        )
        targets = Gmm.single([1.5, 0.5], c.cov)
        g = build_graph(c, targets, m, 1.0, lambda_obs=3.0)
        for horizon in range(4):
            got = ltilde_fixed_horizon(g, horizon)
            np.testing.assert_allclose(got, self.brute_force(g, horizon), atol=1e-12)

    def test_longer_horizon_never_cheaper_to_block(self):
        c = line_colloc()
        g = build_graph(c, line_target(c), free_map(), 1.0)
        f4 = ltilde_fixed_horizon(g, 4)
        f6 = ltilde_fixed_horizon(g, 6)
        # staying in place is free on a free map, so extra hops cannot hurt
        np.testing.assert_allclose(f6, np.minimum(f4, f6), atol=1e-12)


class TestSolveControlLp:
    def setup_problem(self):
        c = line_colloc()
        targets = line_target(c)
        m = free_map()
        g = build_graph(c, targets, m, 1.0)
        ltilde, succ = shortest_paths_to_targets(g)
        current = Gmm.single([0.5, 0.5], c.cov)
        return c, targets, m, g, ltilde, succ, current

    def test_marginals_and_objective(self):
        c, targets, m, g, ltilde, _, current = self.setup_problem()
        goal, (pi, pit), cost = solve_control_lp(current, targets, c, g, ltilde, m)
        np.testing.assert_allclose(pi.matrix.sum(axis=1), current.weights, atol=1e-9)
        np.testing.assert_allclose(pit.matrix.sum(axis=0), targets.weights, atol=1e-9)
        np.testing.assert_allclose(
            pi.matrix.sum(axis=0), pit.matrix.sum(axis=1), atol=1e-9
        )
        # total = one-hop advance (1) + remaining shortest path (3)
        assert cost == pytest.approx(4.0, abs=1e-6)
        np.testing.assert_allclose(goal.weights.sum(), 1.0)

    def test_progress_preferred_over_staying(self):
        c, targets, m, g, ltilde, _, current = self.setup_problem()
        goal, _, _ = self.unpack(solve_control_lp(current, targets, c, g, ltilde, m))
        # the goal should sit one hop toward the target, not at the start
        assert goal.means[:, 0].min() > 1.0

    @staticmethod
    def unpack(res):
        return res

    def test_infeasible_when_current_is_isolated(self):
        c, targets, m, g, ltilde, _, _ = self.setup_problem()
        stranded = Gmm.single([50.0, 50.0], c.cov)
        with pytest.raises(PlanInfeasibleError):
            solve_control_lp(stranded, targets, c, g, ltilde, m)

    def test_repricing_matches_objective(self):
        c, targets, m, g, ltilde, succ, current = self.setup_problem()
        goal, (pi, pit), cost = solve_control_lp(current, targets, c, g, ltilde, m)
        used = {}
        for idx, j in zip(*np.nonzero(pit.matrix > 1e-12)):
            used[(int(idx), int(j))] = reconstruct_path(g, succ, int(idx), int(j))
        val = evaluate_plan_under_map(
            current, m, c, pi.matrix, pit.matrix, used, targets
        )
        assert val == pytest.approx(cost, abs=1e-8)


class TestInterpolatePlan:
    def test_step_count_and_endpoint(self):
        c = line_colloc()
        p = Gmm.single([0.5, 0.5], c.cov)
        q = Gmm.single([3.3, 0.5], c.cov)  # distance 2.8 -> three steps
        steps = interpolate_plan(p, q, None, dbar=1.0)
        assert len(steps) == 3
        assert steps[-1] is q
        prev = p
        for s in steps:
            d, _ = wg_metric(prev, s)
            assert d <= 1.0 + 1e-9
            prev = s

    def test_short_hop_is_single_step(self):
        c = line_colloc()
        p = Gmm.single([0.5, 0.5], c.cov)
        q = Gmm.single([0.9, 0.5], c.cov)
        assert interpolate_plan(p, q, None, dbar=1.0) == [q]

    def test_rejects_bad_dbar(self):
        c = line_colloc()
        p = Gmm.single([0.5, 0.5], c.cov)
        with pytest.raises(InvalidParameterError):
            interpolate_plan(p, p, None, dbar=0.0)


class TestPlanStep:
    def make_cfg(self, colloc):
        return SimpleNamespace(
            d_th=1.0, dbar=0.25, omega_th=1e-4, lambda_obs=1.0,
            replan_mode="triggered", colloc=colloc,
        )

    def test_reaches_terminal(self):
        c = line_colloc()
        cfg = self.make_cfg(c)
        state = PlanState(
            current_pdf=Gmm.single([4.4, 0.5], c.cov),
            target_pdf=line_target(c),
        )
        state = plan_step(state, free_map(), cfg)
        assert state.terminal

    def test_terminal_descent_targets_exact_density(self):
        c = line_colloc()
        cfg = self.make_cfg(c)
        state = PlanState(
            current_pdf=Gmm.single([3.8, 0.5], c.cov),
            target_pdf=line_target(c),
        )
        state = plan_step(state, free_map(), cfg)
        assert not state.terminal
        assert state.goal_pdf is state.target_pdf
        assert state.lp_solved_last_step

    def test_far_start_solves_lp_and_advances(self):
        c = line_colloc()
        cfg = self.make_cfg(c)
        start = Gmm.single([0.5, 0.5], c.cov)
        state = PlanState(current_pdf=start, target_pdf=line_target(c))
        state = plan_step(state, free_map(), cfg)
        assert state.lp_solved_last_step
        assert np.isfinite(state.predicted_cost)
        d_moved, _ = wg_metric(start, state.current_pdf)
        assert 0 < d_moved <= cfg.dbar + 1e-9

    def test_queue_replayed_without_resolving(self):
        c = line_colloc()
        cfg = self.make_cfg(c)
        state = PlanState(
            current_pdf=Gmm.single([0.5, 0.5], c.cov),
            target_pdf=line_target(c),
        )
        m = free_map()
        state = plan_step(state, m, cfg)
        assert state.lp_solved_last_step
        state = plan_step(state, m, cfg)
        assert not state.lp_solved_last_step
