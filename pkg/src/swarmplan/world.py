"""Ground-truth obstacle world, disc-FOV sensing, and occupancy mapping.

The probabilistic occupancy field is a logit grid: observed cells get hard
logits (+/-10) straight from ground truth, prior-polygon cells get soft
logits (+/-2) that later observations override. The binary view thresholds
the logistic of the logit field at 0.5 (strictly above).
"""
from __future__ import annotations

import logging
import warnings
import weakref
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidParameterError
from .gaussians import Gaussian2, _inv_spd2

log = logging.getLogger(__name__)

OBSERVED_LOGIT = 10.0
PRIOR_LOGIT = 2.0


def point_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd rule containment test; boundary points count as inside."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = np.asarray(vertices, dtype=float)
    n = len(verts)
    inside = np.zeros(len(pts), dtype=bool)
    on_edge = np.zeros(len(pts), dtype=bool)
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        # Boundary: point within 1e-12 of the segment counts as occupied
        # (conservative for collision safety).
        ex, ey = x2 - x1, y2 - y1
        L2 = ex * ex + ey * ey
        if L2 > 0:
            t = np.clip(((pts[:, 0] - x1) * ex + (pts[:, 1] - y1) * ey) / L2, 0, 1)
            px = x1 + t * ex
            py = y1 + t * ey
            on_edge |= (pts[:, 0] - px) ** 2 + (pts[:, 1] - py) ** 2 <= 1e-24
        cond = (y1 > pts[:, 1]) != (y2 > pts[:, 1])
        if ey != 0 and np.any(cond):
            xint = x1 + (pts[cond, 1] - y1) * ex / ey
            inside[cond] ^= pts[cond, 0] < xint
    return inside | on_edge


class GroundTruthWorld:
    """Axis-aligned ROI [0, Lx] x [0, Ly] with simple polygon obstacles."""

    def __init__(self, lx: float, ly: float, obstacles=()):
        if lx <= 0 or ly <= 0:
            raise InvalidParameterError("ROI extents must be positive")
        self.lx = float(lx)
        self.ly = float(ly)
        self.obstacles = [np.asarray(p, dtype=float) for p in obstacles]
        for poly in self.obstacles:
            if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
                raise InvalidParameterError("obstacle polygons need >= 3 vertices")
            if np.any(poly[:, 0] < 0) or np.any(poly[:, 0] > lx) or np.any(
                poly[:, 1] < 0
            ) or np.any(poly[:, 1] > ly):
                raise InvalidParameterError("polygon vertices must lie inside the ROI")

    def occupied(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies inside (or on) any obstacle."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        occ = np.zeros(len(pts), dtype=bool)
        for poly in self.obstacles:
            occ |= point_in_polygon(pts, poly)
        return occ


@dataclass(frozen=True)
class FovSet:
    """Disc fields of view around the current robot positions."""

    centers: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("FOV radius must be positive")
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)


class ObstacleMap:
    """Grid-backed occupancy knowledge: logit field plus derived views.

    Treated as immutable between simulation steps: :func:`observe_and_update`
    returns a fresh map and leaves its input untouched.
    """

    def __init__(self, world_extent, spacing: float, logits: np.ndarray = None,
                 prior_polygons=()):
        lx, ly = world_extent
        if spacing <= 0:
            raise InvalidParameterError("grid spacing must be positive")
        self.lx, self.ly = float(lx), float(ly)
        self.dx = self.dy = float(spacing)
        self.nx = int(round(lx / spacing))
        self.ny = int(round(ly / spacing))
        if logits is not None:
            self.logits = np.asarray(logits, dtype=float)
            if self.logits.shape != (self.nx, self.ny):
                raise InvalidParameterError(
                    f"logit grid shape {self.logits.shape} != ({self.nx}, {self.ny})"
                )
        else:
            self.logits = np.full((self.nx, self.ny), -PRIOR_LOGIT)
            centers = self.cell_centers()
            for poly in prior_polygons:
                mask = point_in_polygon(centers, np.asarray(poly, dtype=float))
                self.logits.ravel()[mask] = PRIOR_LOGIT
        self.changed_occupied = np.empty((0, 2))  # centers newly flipped to m=1
        self._occ_centers = None
        self._occ_mask = None

    def cell_centers(self) -> np.ndarray:
        xs = (np.arange(self.nx) + 0.5) * self.dx
        ys = (np.arange(self.ny) + 0.5) * self.dy
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])

    @property
    def h(self) -> np.ndarray:
        """Occupancy probabilities, logistic of the logit field."""
        return 1.0 / (1.0 + np.exp(-self.logits))

    def binary(self) -> np.ndarray:
        """0/1 view; occupied iff h > 0.5, i.e. logit > 0 strictly."""
        return (self.logits > 0.0).astype(np.uint8)

    def occupied_centers(self) -> np.ndarray:
        if self._occ_centers is None:
            mask = self.logits.ravel() > 0.0
            self._occ_mask = mask
            self._occ_centers = self.cell_centers()[mask]
        return self._occ_centers

    def copy(self) -> "ObstacleMap":
        m = ObstacleMap((self.lx, self.ly), self.dx, logits=self.logits.copy())
        return m

    def to_text(self) -> str:
        """Portable grey-map text grid: one y-row per line, 0/1 per cell."""
        b = self.binary()
        lines = [" ".join(str(int(v)) for v in b[:, iy]) for iy in range(self.ny)]
        return "\n".join(lines)


def binary_map(m: ObstacleMap) -> np.ndarray:
    return m.binary()


def observe_and_update(
    m: ObstacleMap, world: GroundTruthWorld, fov: FovSet
) -> ObstacleMap:
    """Reveal ground truth on every cell inside the union of FOV discs."""
    centers = np.array(fov.centers, dtype=float)
    if np.any(centers[:, 0] < 0) or np.any(centers[:, 0] > world.lx) or np.any(
        centers[:, 1] < 0
    ) or np.any(centers[:, 1] > world.ly):
        warnings.warn("FOV centers outside the ROI were clamped", stacklevel=2)
        centers[:, 0] = np.clip(centers[:, 0], 0, world.lx)
        centers[:, 1] = np.clip(centers[:, 1], 0, world.ly)

    occ_truth = _ground_truth_grid(m, world)
    new = m.copy()
    before = m.logits > 0.0
    _kernels.fov_reveal(
        new.logits, occ_truth, centers, fov.radius, m.dx, m.dy,
        -OBSERVED_LOGIT, OBSERVED_LOGIT,
    )
    flipped = (new.logits > 0.0) & ~before
    new.changed_occupied = new.cell_centers()[flipped.ravel()]
    return new


# Keyed by the world object itself; weak refs avoid stale entries when a
# collected world's id is recycled by a new instance.
_truth_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _ground_truth_grid(m: ObstacleMap, world: GroundTruthWorld) -> np.ndarray:
    """Ground-truth occupancy rasterized at the map's cell centers (cached)."""
    grids = _truth_cache.setdefault(world, {})
    key = (m.nx, m.ny, m.dx)
    if key not in grids:
        grids[key] = world.occupied(m.cell_centers()).reshape(m.nx, m.ny)
    return grids[key]


def gaussian_map_inner(g: Gaussian2, m: ObstacleMap) -> float:
    """Riemann sum of the Gaussian density over occupied cells (mass in [0, 1])."""
    pts = m.occupied_centers()
    if len(pts) == 0:
        return 0.0
    inv = _inv_spd2(g.cov)
    det = g.cov[0, 0] * g.cov[1, 1] - g.cov[0, 1] * g.cov[1, 0]
    norm = 1.0 / (2.0 * np.pi * np.sqrt(det))
    total = _kernels.gauss_mass(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        g.mean[0], g.mean[1], inv[0, 0], inv[0, 1], inv[1, 1], norm,
    )
    return float(total * m.dx * m.dy)
