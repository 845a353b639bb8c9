"""Microscopic robot control: density-tracking attraction plus repulsion.

The attractive potential is the squared L2 gap between the commanded mixture
and a scaled kernel-density estimate of the swarm's next positions; all its
integrals are Gaussian-Gaussian overlaps, so the potential and its gradient
come out in closed form. Repulsion is the classic inverse-barrier field from
the nearest known-occupied cell and from nearby robots.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .errors import InvalidParameterError
from .gaussians import Gaussian2, Gmm, _inv_spd2
from .world import ObstacleMap

DEFAULT_BANDWIDTH = 0.3  # km; matches the collocation covariance scale
DEFAULT_GAMMA = 0.85
MAX_REPULSE_FORCE = 1e4


@dataclass(frozen=True)
class SwarmState:
    """Positions and last-applied controls of all robots."""

    positions: np.ndarray  # (N, 2), km
    controls: np.ndarray  # (N, 2), km/hr
    step_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        c = np.asarray(self.controls, dtype=float)
        p.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "controls", c)

    @staticmethod
    def at_rest(positions) -> "SwarmState":
        p = np.asarray(positions, dtype=float)
        return SwarmState(p, np.zeros_like(p), 0)


@dataclass(frozen=True)
class KdeEstimate:
    """Isotropic-Gaussian KDE of the swarm; integrates to 1 analytically."""

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InvalidParameterError("bandwidth must be positive")
        c = np.asarray(self.centers, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    def as_gmm(self) -> Gmm:
        h2 = self.bandwidth**2
        comps = tuple(Gaussian2(c, h2 * np.eye(2)) for c in self.centers)
        return Gmm(comps, np.full(len(comps), 1.0 / len(comps)))


def _gauss2_overlap(mu_a, cov_a, mu_b, cov_b):
    """integral of N(x; mu_a, cov_a) N(x; mu_b, cov_b) dx."""
    s = cov_a + cov_b
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    d = mu_a - mu_b
    inv = _inv_spd2(s)
    return np.exp(-0.5 * d @ inv @ d) / (2.0 * np.pi * np.sqrt(det))


def attractive_potential(
    positions: np.ndarray, commanded: Gmm, gamma: float, bandwidth: float
) -> float:
    """Closed-form squared-L2 gap between commanded density and scaled KDE."""
    pos = np.asarray(positions, dtype=float)
    n = len(pos)
    h2 = bandwidth**2
    eye = np.eye(2)
    # commanded-commanded term
    pp = 0.0
    for wi, gi in zip(commanded.weights, commanded.components):
        for wj, gj in zip(commanded.weights, commanded.components):
            pp += wi * wj * _gauss2_overlap(gi.mean, gi.cov, gj.mean, gj.cov)
    # cross term
    cross = 0.0
    for wi, gi in zip(commanded.weights, commanded.components):
        for y in pos:
            cross += wi * _gauss2_overlap(gi.mean, gi.cov, y, h2 * eye)
    cross /= n
    # KDE-KDE term
    kk = 0.0
    for a in range(n):
        for b in range(n):
            kk += _gauss2_overlap(pos[a], h2 * eye, pos[b], h2 * eye)
    kk /= n * n
    return float(pp - 2.0 * gamma * cross + gamma**2 * kk)


def attractive_gradient(
    swarm: SwarmState,
    commanded: Gmm,
    gamma: float = DEFAULT_GAMMA,
    bandwidth: float = DEFAULT_BANDWIDTH,
) -> np.ndarray:
    """Per-robot descent direction (negative gradient) of the attraction.

    Each robot differentiates only its own kernel term; the cross terms of
    other robots cancel in that partial derivative.
    """
    if not 0.0 < gamma <= 1.0:
        raise InvalidParameterError(f"gamma must be in (0, 1], got {gamma}")
    pos = np.ascontiguousarray(swarm.positions)
    n = len(pos)
    h2 = bandwidth**2

    # grad of the cross term: mixture components convolved with the kernel.
    m = len(commanded)
    means = np.ascontiguousarray(commanded.means)
    invs = np.empty((m, 2, 2))
    norms = np.empty(m)
    for k, g in enumerate(commanded.components):
        s = g.cov + h2 * np.eye(2)
        invs[k] = _inv_spd2(s)
        det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
        norms[k] = 1.0 / (2.0 * np.pi * np.sqrt(det))
    grad_cross = _kernels.mixture_grad(
        pos, means, invs, norms, np.ascontiguousarray(commanded.weights)
    )

    # grad of the KDE-KDE term: pairwise kernels at doubled variance.
    norm_pair = 1.0 / (2.0 * np.pi * 2.0 * h2)
    grad_pair = _kernels.kde_pair_grad(pos, 1.0 / (2.0 * h2), norm_pair)

    grad_u = -(2.0 * gamma / n) * grad_cross + (
        2.0 * gamma**2 / n**2
    ) * grad_pair
    return -grad_u


def attractive_gradient_quadrature(
    swarm: SwarmState,
    commanded: Gmm,
    m: ObstacleMap,
    gamma: float = DEFAULT_GAMMA,
    bandwidth: float = DEFAULT_BANDWIDTH,
    fd_step: float = 1e-5,
) -> np.ndarray:
    """Grid-quadrature cross-check of :func:`attractive_gradient`.

    Evaluates the potential by Riemann sums over the map grid and
    differentiates by central differences. Slow; kept behind a config flag
    to validate the closed form against grid resolution.
    """
    centers = m.cell_centers()
    area = m.dx * m.dy
    target_vals = commanded.pdf(centers)
    h2 = bandwidth**2
    cov = h2 * np.eye(2)

    def potential(pos):
        kde = np.zeros(len(centers))
        for y in pos:
            kde += Gaussian2(y, cov).pdf(centers)
        kde /= len(pos)
        return float(np.sum((target_vals - gamma * kde) ** 2) * area)

    pos0 = swarm.positions
    out = np.zeros_like(pos0)
    for i in range(len(pos0)):
        for axis in range(2):
            hi = pos0.copy()
            lo = pos0.copy()
            hi[i, axis] += fd_step
            lo[i, axis] -= fd_step
            out[i, axis] = -(potential(hi) - potential(lo)) / (2 * fd_step)
    return out


class ObstacleDistanceField:
    """Nearest known-occupied cell queries, rebuilt when the map changes."""

    def __init__(self, m: ObstacleMap):
        pts = m.occupied_centers()
        self._tree = cKDTree(pts) if len(pts) else None
        self._pts = pts

    def nearest(self, positions: np.ndarray):
        """(distance, offset-to-obstacle) per query point; inf when map is free."""
        pos = np.atleast_2d(positions)
        if self._tree is None:
            return (
                np.full(len(pos), np.inf),
                np.zeros_like(pos),
            )
        dist, idx = self._tree.query(pos)
        return dist, pos - self._pts[idx]


def repulsive_potential(
    positions: np.ndarray,
    robot: int,
    field: ObstacleDistanceField,
    rho_obs: float,
    rho_rob: float,
) -> float:
    """Robot's own barrier potential; the oracle side of the gradient check."""

    def barrier(rho, rho_rep):
        if rho > rho_rep or rho <= 0:
            return 0.0
        return 0.5 * (1.0 / rho - 1.0 / rho_rep) ** 2

    pos = np.asarray(positions, dtype=float)
    dist, _ = field.nearest(pos[robot])
    total = barrier(float(dist[0]), rho_obs)
    for j in range(len(pos)):
        if j == robot:
            continue
        total += barrier(float(np.linalg.norm(pos[robot] - pos[j])), rho_rob)
    return total


def repulsive_gradient(
    swarm: SwarmState,
    m: ObstacleMap,
    rho_obs: float,
    rho_rob: float,
    field: ObstacleDistanceField = None,
) -> np.ndarray:
    """Per-robot repulsive force from the nearest occupied cell and neighbors."""
    if rho_obs <= 0 or rho_rob <= 0:
        raise InvalidParameterError("repulsion thresholds must be positive")
    pos = np.ascontiguousarray(swarm.positions)
    if field is None:
        field = ObstacleDistanceField(m)
    out = np.zeros_like(pos)

    dist, offset = field.nearest(pos)
    hit = dist <= rho_obs
    for i in np.nonzero(hit)[0]:
        rho = dist[i]
        if rho < 1e-12:
            ang = 2.399963229728653 * (i + 1)
            out[i] += MAX_REPULSE_FORCE * np.array([np.cos(ang), np.sin(ang)])
            continue
        mag = min((1.0 / rho - 1.0 / rho_obs) / rho**2, MAX_REPULSE_FORCE)
        out[i] += mag * offset[i] / rho

    out += _kernels.robot_repulsion(pos, rho_rob, MAX_REPULSE_FORCE)
    return out


def step_robots(
    swarm: SwarmState,
    attract: np.ndarray,
    repulse: np.ndarray,
    dt: float,
    v_max: float,
    roi=None,
) -> SwarmState:
    """Single-integrator update with speed clipping and ROI clamping."""
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    u = np.asarray(attract) + np.asarray(repulse)
    speed = np.sqrt((u**2).sum(axis=1))
    over = speed > v_max
    u = u.copy()
    u[over] *= (v_max / speed[over])[:, None]
    pos = swarm.positions + u * dt
    if roi is not None:
        lx, ly = roi
        pos[:, 0] = np.clip(pos[:, 0], 0.0, lx)
        pos[:, 1] = np.clip(pos[:, 1], 0.0, ly)
    return SwarmState(pos, u, swarm.step_index + 1)
