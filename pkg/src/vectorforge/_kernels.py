"""Per-shape coverage kernels (compiled with numba).

Coverage of a pixel centre is a tapered sigmoid of its signed distance to
the flattened boundary: the sigmoid's tails are bent so value and slope
reach exactly 0 and 1 at +/- ``TAPER`` bandwidths.  That keeps coverage C1
and makes the clipped bounding box an exact acceleration structure rather
than an approximation.
"""

import math

import numba
import numpy as np

TAPER = 5.0
_F0 = 1.0 / (1.0 + math.exp(TAPER))
_F1 = _F0 * (1.0 - _F0)
_NORM = 1.0 / (1.0 - 2.0 * _F0)


@numba.njit(cache=True, nogil=True)
def taper(u):
    """Returns (coverage, d coverage / du) for ``u = -signed_distance / sigma``."""
    if u <= -TAPER:
        return 0.0, 0.0
    if u >= TAPER:
        return 1.0, 0.0
    s = 1.0 / (1.0 + math.exp(-u))
    k = _F1 * (u * u * u - TAPER * TAPER * u) / (2.0 * TAPER * TAPER)
    dk = _F1 * (3.0 * u * u - TAPER * TAPER) / (2.0 * TAPER * TAPER)
    return (s - _F0 - k) * _NORM, (s * (1.0 - s) - dk) * _NORM


@numba.njit(cache=True, nogil=True)
def coverage(verts, x0, y0, w, h, sigma):
    """Coverage over the crop ``[x0, x0+w) x [y0, y0+h)`` plus backward data.

    Returns cov, dcov (d coverage / d signed distance), closest edge index,
    clamped edge parameter, and the unit vector from the closest point to
    the pixel scaled by the inside/outside sign.
    """
    m = verts.shape[0]
    cov = np.zeros((h, w))
    dcov = np.zeros((h, w))
    edge = np.zeros((h, w), dtype=np.int64)
    tpar = np.zeros((h, w))
    ux = np.zeros((h, w))
    uy = np.zeros((h, w))
    inv_sigma = 1.0 / sigma
    for j in range(h):
        py = y0 + j + 0.5
        for i in range(w):
            px = x0 + i + 0.5
            best = np.inf
            best_k = 0
            best_t = 0.0
            best_cx = 0.0
            best_cy = 0.0
            wn = 0
            for k in range(m):
                ax = verts[k, 0]
                ay = verts[k, 1]
                kn = k + 1
                if kn == m:
                    kn = 0
                bx = verts[kn, 0]
                by = verts[kn, 1]
                ex = bx - ax
                ey = by - ay
                left = ex * (py - ay) - (px - ax) * ey
                if ay <= py:
                    if by > py and left > 0.0:
                        wn += 1
                elif by <= py and left < 0.0:
                    wn -= 1
                l2 = ex * ex + ey * ey
                t = 0.0
                if l2 > 0.0:
                    t = ((px - ax) * ex + (py - ay) * ey) / l2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                cx = ax + t * ex
                cy = ay + t * ey
                d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
                if d2 < best:
                    best = d2
                    best_k = k
                    best_t = t
                    best_cx = cx
                    best_cy = cy
            d = math.sqrt(best)
            sign = 1.0
            if wn != 0:
                sign = -1.0
            c, dc = taper(-sign * d * inv_sigma)
            cov[j, i] = c
            # d cov / d(signed distance) = dc * (-1/sigma)
            dcov[j, i] = -dc * inv_sigma
            edge[j, i] = best_k
            tpar[j, i] = best_t
            if d > 0.0:
                ux[j, i] = sign * (px - best_cx) / d
                uy[j, i] = sign * (py - best_cy) / d
    return cov, dcov, edge, tpar, ux, uy


@numba.njit(cache=True, nogil=True)
def coverage_backward(dl_dcov, dcov, edge, tpar, ux, uy, m):
    """Pull ``dL/dcov`` back onto the ``(m, 2)`` polyline vertices."""
    grad = np.zeros((m, 2))
    h, w = dl_dcov.shape
    for j in range(h):
        for i in range(w):
            g = dl_dcov[j, i] * dcov[j, i]
            if g == 0.0:
                continue
            k = edge[j, i]
            kn = k + 1
            if kn == m:
                kn = 0
            t = tpar[j, i]
            # signed distance moves by -u . delta(closest point)
            gx = -g * ux[j, i]
            gy = -g * uy[j, i]
            grad[k, 0] += gx * (1.0 - t)
            grad[k, 1] += gy * (1.0 - t)
            grad[kn, 0] += gx * t
            grad[kn, 1] += gy * t
    return grad
