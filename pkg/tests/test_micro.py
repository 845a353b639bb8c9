"""Unit tests for the microscopic potential-field controller."""
import numpy as np
import pytest

from swarmplan import Gaussian2, Gmm, InvalidParameterError
from swarmplan.micro import (
    KdeEstimate,
    ObstacleDistanceField,
    SwarmState,
    attractive_gradient,
    attractive_potential,
    repulsive_gradient,
    repulsive_potential,
    step_robots,
)
from swarmplan.world import ObstacleMap

from oracles import central_difference_gradient


def rand_mixture(rng, n):
    comps = tuple(
        Gaussian2(rng.uniform(0, 10, 2), rng.uniform(0.3, 2.0) * np.eye(2))
        for _ in range(n)
    )
    w = rng.uniform(0.2, 1.0, n)
    return Gmm(comps, w / w.sum())


class TestSwarmState:
    def test_at_rest(self):
        s = SwarmState.at_rest([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(s.controls, 0.0)
        assert s.step_index == 0

    def test_immutable(self):
        s = SwarmState.at_rest([[1.0, 2.0]])
        with pytest.raises(ValueError):
            s.positions[0, 0] = 9.0


class TestKdeEstimate:
    def test_rejects_nonpositive_bandwidth(self):
        with pytest.raises(InvalidParameterError):
            KdeEstimate(np.zeros((3, 2)), 0.0)

    def test_as_gmm_integrates_to_one(self):
        rng = np.random.default_rng(20)
        kde = KdeEstimate(rng.uniform(0, 5, (6, 2)), 0.4)
        g = kde.as_gmm()
        assert len(g) == 6
        np.testing.assert_allclose(g.weights.sum(), 1.0)
        np.testing.assert_allclose(g.components[0].cov, 0.16 * np.eye(2))


class TestAttractiveGradient:
    def test_matches_central_difference(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            pos = rng.uniform(0, 10, (n, 2))
            commanded = rand_mixture(rng, int(rng.integers(1, 4)))
            gamma = float(rng.uniform(0.5, 1.0))
            bw = float(rng.uniform(0.2, 0.6))

            grad = attractive_gradient(
                SwarmState.at_rest(pos), commanded, gamma, bw
            )
            fd = central_difference_gradient(
                lambda x: attractive_potential(x, commanded, gamma, bw), pos
            )
            # package returns the descent direction, i.e. minus the gradient
            np.testing.assert_allclose(grad, -fd, rtol=1e-4, atol=1e-10)

    def test_pulls_single_robot_toward_mode(self):
        commanded = Gmm.single([5.0, 5.0], np.eye(2))
        s = SwarmState.at_rest([[3.0, 5.0]])
        g = attractive_gradient(s, commanded)
        assert g[0, 0] > 0
        assert abs(g[0, 1]) < 1e-12

    def test_rejects_bad_gamma(self):
        s = SwarmState.at_rest([[0.0, 0.0]])
        with pytest.raises(InvalidParameterError):
            attractive_gradient(s, Gmm.single([0, 0], np.eye(2)), gamma=1.5)


class TestRepulsiveGradient:
    @staticmethod
    def _map_with_block():
        return ObstacleMap(
            (10.0, 8.0), 0.5,
            prior_polygons=[[[4.0, 3.0], [6.0, 3.0], [6.0, 5.0], [4.0, 5.0]]],
        )

    def test_matches_central_difference(self):
        m = self._map_with_block()
        field = ObstacleDistanceField(m)
        rng = np.random.default_rng(22)
        checked = 0
        while checked < 25:
            pos = rng.uniform(0.5, 9.5, (4, 2))
            pos[:, 1] = np.clip(pos[:, 1], 0.5, 7.5)
            dist, _ = field.nearest(pos)
            # keep clear of the force cap, the obstacle kink, and pair kinks
            if np.any(dist < 0.05) or np.any(np.abs(dist - 0.8) < 0.02):
                continue
            pair = np.linalg.norm(pos[:, None] - pos[None, :], axis=2)
            pair[np.arange(4), np.arange(4)] = 1.0
            if np.any(pair < 0.05) or np.any(np.abs(pair - 0.3) < 0.02):
                continue
            grad = repulsive_gradient(
                SwarmState.at_rest(pos), m, rho_obs=0.8, rho_rob=0.3, field=field
            )
            for robot in range(4):
                fd = central_difference_gradient(
                    lambda x, r=robot: repulsive_potential(
                        x.reshape(4, 2), r, field, 0.8, 0.3
                    ),
                    pos,
                )
                np.testing.assert_allclose(
                    grad[robot], -fd[robot], rtol=1e-4, atol=1e-8
                )
            checked += 1

    def test_pushes_away_from_obstacle(self):
        m = self._map_with_block()
        s = SwarmState.at_rest([[3.9, 4.0]])  # just left of the block
        g = repulsive_gradient(s, m, rho_obs=1.0, rho_rob=0.1)
        assert g[0, 0] < 0

    def test_zero_far_from_everything(self):
        m = self._map_with_block()
        s = SwarmState.at_rest([[0.5, 7.5]])
        g = repulsive_gradient(s, m, rho_obs=0.5, rho_rob=0.1)
        np.testing.assert_array_equal(g, 0.0)

    def test_force_is_capped(self):
        m = self._map_with_block()
        s = SwarmState.at_rest([[5.0, 4.0], [5.0 + 1e-9, 4.0]])
        g = repulsive_gradient(s, m, rho_obs=1.0, rho_rob=0.2)
        assert np.all(np.linalg.norm(g, axis=1) <= 3 * 1e4 + 1.0)

    def test_rejects_bad_thresholds(self):
        m = self._map_with_block()
        s = SwarmState.at_rest([[1.0, 1.0]])
        with pytest.raises(InvalidParameterError):
            repulsive_gradient(s, m, rho_obs=0.0, rho_rob=0.1)

    def test_free_map_has_no_obstacle_force(self):
        m = ObstacleMap((10.0, 8.0), 0.5)
        s = SwarmState.at_rest([[5.0, 4.0]])
        g = repulsive_gradient(s, m, rho_obs=5.0, rho_rob=0.1)
        np.testing.assert_array_equal(g, 0.0)


class TestStepRobots:
    def test_integrates_velocity(self):
        s = SwarmState.at_rest([[1.0, 1.0]])
        out = step_robots(s, np.array([[2.0, 0.0]]), np.zeros((1, 2)), 0.5, 10.0)
        np.testing.assert_allclose(out.positions, [[2.0, 1.0]])
        assert out.step_index == 1

    def test_speed_clipped(self):
        s = SwarmState.at_rest([[0.0, 0.0]])
        out = step_robots(s, np.array([[30.0, 40.0]]), np.zeros((1, 2)), 1.0, 5.0)
        np.testing.assert_allclose(np.linalg.norm(out.controls), 5.0)
        np.testing.assert_allclose(out.positions, [[3.0, 4.0]])

    def test_roi_clamp(self):
        s = SwarmState.at_rest([[0.1, 0.1]])
        out = step_robots(
            s, np.array([[-5.0, -5.0]]), np.zeros((1, 2)), 1.0, 10.0, roi=(10, 8)
        )
        np.testing.assert_array_equal(out.positions, [[0.0, 0.0]])

    def test_rejects_bad_dt(self):
        s = SwarmState.at_rest([[0.0, 0.0]])
        with pytest.raises(InvalidParameterError):
            step_robots(s, np.zeros((1, 2)), np.zeros((1, 2)), 0.0, 1.0)
