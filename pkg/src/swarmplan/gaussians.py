"""2D Gaussian components and mixtures with exact Wasserstein geometry.

Everything here is closed form: the Bures-type 2x2 SPD square root, the
Gaussian W2 distance, and displacement interpolation along the W2 geodesic.
All containers are immutable after construction so they can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidMatrixError,
    InvalidParameterError,
    WouldEmptyMixtureError,
)

_SYM_TOL = 1e-12
_WEIGHT_TOL = 1e-9

DEFAULT_WEIGHT_THRESHOLD = 1e-4


def sqrtm_spd2(a: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 SPD matrix.

    Uses the closed form X = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A)),
    which is exact for 2x2 SPD matrices and needs no eigendecomposition.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (2, 2):
        raise InvalidMatrixError(f"expected a 2x2 matrix, got shape {a.shape}")
    if abs(a[0, 1] - a[1, 0]) > 1e-9 * max(1.0, abs(a[0, 1])):
        raise InvalidMatrixError("matrix is not symmetric")
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    tr = a[0, 0] + a[1, 1]
    if det <= 0.0 or tr <= 0.0:
        raise InvalidMatrixError("matrix is not positive-definite")
    s = np.sqrt(det)
    t = np.sqrt(tr + 2.0 * s)
    x = (a + s * np.eye(2)) / t
    return 0.5 * (x + x.T)


def _inv_spd2(a: np.ndarray) -> np.ndarray:
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det


@dataclass(frozen=True)
class Gaussian2:
    """A single 2D Gaussian component: mean in km, SPD covariance in km^2."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2).copy()
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        # Symmetrize before validating: absorbs float drift from sandwich
        # products in displacement interpolation.
        cov = 0.5 * (cov + cov.T)
        eigvals = np.linalg.eigvalsh(cov)
        if eigvals[0] <= 0.0:
            raise InvalidMatrixError(
                f"covariance is not positive-definite (eigenvalues {eigvals})"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    def pdf(self, points: np.ndarray) -> np.ndarray:
        """Density at one point or an (n, 2) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts - self.mean
        inv = _inv_spd2(self.cov)
        det = self.cov[0, 0] * self.cov[1, 1] - self.cov[0, 1] * self.cov[1, 0]
        quad = np.einsum("ni,ij,nj->n", d, inv, d)
        vals = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))
        return vals if np.ndim(points) > 1 else float(vals[0])


def w2_gaussian(p: Gaussian2, q: Gaussian2) -> float:
    """Closed-form W2 distance between two 2D Gaussians (km)."""
    # Identical parameters short-circuit to an exact zero; the Bures term
    # would otherwise leave ~1e-8 of rounding noise under the square root.
    if np.array_equal(p.mean, q.mean) and np.array_equal(p.cov, q.cov):
        return 0.0
    dm = p.mean - q.mean
    sp_half = sqrtm_spd2(p.cov)
    cross = sqrtm_spd2(sp_half @ q.cov @ sp_half)
    bures = np.trace(p.cov) + np.trace(q.cov) - 2.0 * np.trace(cross)
    # Bures term is nonnegative analytically; clip rounding noise.
    return float(np.sqrt(dm @ dm + max(bures, 0.0)))


def displacement_interpolate(p: Gaussian2, q: Gaussian2, eps: float) -> Gaussian2:
    """Point at fraction ``eps`` along the W2 geodesic from p to q."""
    if not 0.0 <= eps <= 1.0:
        raise InvalidParameterError(f"eps must be in [0, 1], got {eps}")
    if eps == 0.0:
        return p
    if eps == 1.0:
        return q
    mean = (1.0 - eps) * p.mean + eps * q.mean
    sp_half = sqrtm_spd2(p.cov)
    sp_half_inv = _inv_spd2(sp_half)
    cross = sqrtm_spd2(sp_half @ q.cov @ sp_half)
    mid = (1.0 - eps) * p.cov + eps * cross
    cov = sp_half_inv @ mid @ mid @ sp_half_inv
    return Gaussian2(mean, cov)


@dataclass(frozen=True)
class Gmm:
    """A weighted mixture of :class:`Gaussian2` components."""

    components: tuple
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise InvalidParameterError("a mixture needs at least one component")
        if self.weights is None:
            w = np.full(len(comps), 1.0 / len(comps))
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        if len(w) != len(comps):
            raise InvalidParameterError(
                f"{len(comps)} components but {len(w)} weights"
            )
        if np.any(w < -_WEIGHT_TOL) or np.any(w > 1.0 + _WEIGHT_TOL):
            raise InvalidParameterError("weights must lie in [0, 1]")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise InvalidParameterError(
                f"weights must sum to 1, got {w.sum():.12f}"
            )
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def pdf(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(len(pts))
        for w, c in zip(self.weights, self.components):
            total += w * c.pdf(pts)
        return total if np.ndim(points) > 1 else float(total[0])

    @staticmethod
    def single(mean, cov) -> "Gmm":
        return Gmm((Gaussian2(mean, cov),), np.array([1.0]))


def prune_and_renormalize(
    m: Gmm, omega_th: float = DEFAULT_WEIGHT_THRESHOLD
) -> Gmm:
    """Drop components below ``omega_th`` and renormalize the survivors."""
    keep = m.weights >= omega_th
    if not np.any(keep):
        raise WouldEmptyMixtureError(
            f"threshold {omega_th} would remove all {len(m)} components"
        )
    if np.all(keep):
        return m
    comps = tuple(c for c, k in zip(m.components, keep) if k)
    w = m.weights[keep]
    return Gmm(comps, w / w.sum())
