"""Hot numeric inner loops, compiled with numba when available.

Set ``SWARMPLAN_NUMBA=0`` to force the pure-numpy fallbacks (same results,
slower). Selection happens once at import. All kernels use fixed-order
reductions so results do not depend on evaluation order.
"""
from __future__ import annotations

import os

import numpy as np

_WANT_NUMBA = os.environ.get("SWARMPLAN_NUMBA", "1") != "0"

if _WANT_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _WANT_NUMBA = False

NUMBA_ENABLED = _WANT_NUMBA


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _gauss_mass_np(px, py, mx, my, ia, ib, idd, norm):
    """sum of N([px, py]; mean, S) with S^-1 = [[ia, ib], [ib, idd]]."""
    dx = px - mx
    dy = py - my
    quad = ia * dx * dx + 2.0 * ib * dx * dy + idd * dy * dy
    return float(np.sum(norm * np.exp(-0.5 * quad)))


def _mixture_grad_np(pos, means, invs, norms, weights):
    """Gradient of f(y) = sum_m w_m N(y; mu_m, S_m) at each row of pos."""
    out = np.zeros_like(pos)
    for m in range(len(means)):
        d = pos - means[m]
        sd = d @ invs[m].T
        quad = np.einsum("ni,ni->n", d, sd)
        dens = weights[m] * norms[m] * np.exp(-0.5 * quad)
        out -= dens[:, None] * sd
    return out


def _kde_pair_grad_np(pos, inv_two_h2, norm):
    """sum_{n' != n} grad_1 N(y_n; y_n', 2 h^2 I), per robot."""
    d = pos[:, None, :] - pos[None, :, :]  # (N, N, 2)
    quad = inv_two_h2 * np.einsum("nmi,nmi->nm", d, d)
    dens = norm * np.exp(-0.5 * quad)
    np.fill_diagonal(dens, 0.0)
    return -inv_two_h2 * np.einsum("nm,nmi->ni", dens, d)


def _robot_repulsion_np(pos, rho_rep, f_max):
    """Pairwise inverse-barrier forces below the threshold ``rho_rep``."""
    n = len(pos)
    out = np.zeros_like(pos)
    for i in range(n):
        d = pos[i] - pos
        dist = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)
        for j in range(n):
            if j == i or dist[j] > rho_rep:
                continue
            rho = dist[j]
            if rho < 1e-12:
                # Coincident robots: capped force, direction from robot index.
                ang = 2.399963229728653 * (i + 1)
                out[i, 0] += f_max * np.cos(ang)
                out[i, 1] += f_max * np.sin(ang)
                continue
            mag = (1.0 / rho - 1.0 / rho_rep) / (rho * rho)
            mag = min(mag, f_max)
            out[i] += mag * d[j] / rho
    return out


def _fov_reveal_np(logits, occupied, centers, radius, dx, dy, lo_logit, hi_logit):
    """Set observed-cell logits from ground truth inside disc FOVs."""
    nx, ny = logits.shape
    for cx, cy in centers:
        ix0 = max(int((cx - radius) / dx - 0.5), 0)
        ix1 = min(int((cx + radius) / dx + 0.5), nx - 1)
        iy0 = max(int((cy - radius) / dy - 0.5), 0)
        iy1 = min(int((cy + radius) / dy + 0.5), ny - 1)
        if ix0 > ix1 or iy0 > iy1:
            continue
        xs = (np.arange(ix0, ix1 + 1) + 0.5) * dx
        ys = (np.arange(iy0, iy1 + 1) + 0.5) * dy
        mask = (xs[:, None] - cx) ** 2 + (ys[None, :] - cy) ** 2 <= radius**2
        block = logits[ix0 : ix1 + 1, iy0 : iy1 + 1]
        occ = occupied[ix0 : ix1 + 1, iy0 : iy1 + 1]
        block[mask] = np.where(occ[mask], hi_logit, lo_logit)


# ---------------------------------------------------------------------------
# numba variants (identical arithmetic, explicit loops)
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _gauss_mass_nb(px, py, mx, my, ia, ib, idd, norm):
        total = 0.0
        for k in range(px.shape[0]):
            dx = px[k] - mx
            dy = py[k] - my
            quad = ia * dx * dx + 2.0 * ib * dx * dy + idd * dy * dy
            total += norm * np.exp(-0.5 * quad)
        return total

    @njit(cache=True)
    def _mixture_grad_nb(pos, means, invs, norms, weights):
        n = pos.shape[0]
        m = means.shape[0]
        out = np.zeros((n, 2))
        for k in range(m):
            ia = invs[k, 0, 0]
            ib = invs[k, 0, 1]
            idd = invs[k, 1, 1]
            for i in range(n):
                dx = pos[i, 0] - means[k, 0]
                dy = pos[i, 1] - means[k, 1]
                sx = ia * dx + ib * dy
                sy = ib * dx + idd * dy
                dens = weights[k] * norms[k] * np.exp(
                    -0.5 * (dx * sx + dy * sy)
                )
                out[i, 0] -= dens * sx
                out[i, 1] -= dens * sy
        return out

    @njit(cache=True)
    def _kde_pair_grad_nb(pos, inv_two_h2, norm):
        n = pos.shape[0]
        out = np.zeros((n, 2))
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dens = norm * np.exp(
                    -0.5 * inv_two_h2 * (dx * dx + dy * dy)
                )
                out[i, 0] -= inv_two_h2 * dens * dx
                out[i, 1] -= inv_two_h2 * dens * dy
        return out

    @njit(cache=True)
    def _robot_repulsion_nb(pos, rho_rep, f_max):
        n = pos.shape[0]
        out = np.zeros((n, 2))
        for i in range(n):
            for j in range(n):
                if j == i:
                    continue
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                rho = np.sqrt(dx * dx + dy * dy)
                if rho > rho_rep:
                    continue
                if rho < 1e-12:
                    ang = 2.399963229728653 * (i + 1)
                    out[i, 0] += f_max * np.cos(ang)
                    out[i, 1] += f_max * np.sin(ang)
                    continue
                mag = (1.0 / rho - 1.0 / rho_rep) / (rho * rho)
                if mag > f_max:
                    mag = f_max
                out[i, 0] += mag * dx / rho
                out[i, 1] += mag * dy / rho
        return out

    @njit(cache=True)
    def _fov_reveal_nb(logits, occupied, centers, radius, dx, dy, lo_logit, hi_logit):
        nx, ny = logits.shape
        r2 = radius * radius
        for c in range(centers.shape[0]):
            cx = centers[c, 0]
            cy = centers[c, 1]
            ix0 = max(int((cx - radius) / dx - 0.5), 0)
            ix1 = min(int((cx + radius) / dx + 0.5), nx - 1)
            iy0 = max(int((cy - radius) / dy - 0.5), 0)
            iy1 = min(int((cy + radius) / dy + 0.5), ny - 1)
            for ix in range(ix0, ix1 + 1):
                px = (ix + 0.5) * dx
                for iy in range(iy0, iy1 + 1):
                    py = (iy + 0.5) * dy
                    if (px - cx) ** 2 + (py - cy) ** 2 <= r2:
                        logits[ix, iy] = hi_logit if occupied[ix, iy] else lo_logit

    gauss_mass = _gauss_mass_nb
    mixture_grad = _mixture_grad_nb
    kde_pair_grad = _kde_pair_grad_nb
    robot_repulsion = _robot_repulsion_nb
    fov_reveal = _fov_reveal_nb
else:
    gauss_mass = _gauss_mass_np
    mixture_grad = _mixture_grad_np
    kde_pair_grad = _kde_pair_grad_np
    robot_repulsion = _robot_repulsion_np
    fov_reveal = _fov_reveal_np
