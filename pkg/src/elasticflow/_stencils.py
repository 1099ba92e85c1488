"""Finite difference stencils on the uniform parameter grid.

Interior nodes use centered second order formulas. Near the ends of an
open grid the centered window does not fit, so weights for a window
pushed flush against the boundary are generated with Fornberg's
recursion; the window holds ``order + 2`` points, which keeps the
boundary rows second order accurate as well.
"""

from functools import lru_cache

import numpy as np

# half width of the centered interior window per derivative order
_HALF_WIDTH = {1: 1, 2: 1, 3: 2, 4: 2}
# window size of the boundary stencils per derivative order
_BOUNDARY_POINTS = {1: 3, 2: 4, 3: 5, 4: 6}


def fd_weights(nodes, z, order):
    """Weights w with sum w[i] f(nodes[i]) ~ f^(order)(z) (Fornberg)."""
    nodes = np.asarray(nodes, dtype=np.float64)
    n = len(nodes)
    w = np.zeros((n, order + 1))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - z
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[i, k] = c1 * (k * w[i - 1, k - 1] - c5 * w[i - 1, k]) / c2
                w[i, 0] = -c1 * c5 * w[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                w[j, k] = (c4 * w[j, k] - k * w[j, k - 1]) / c3
            w[j, 0] = c4 * w[j, 0] / c3
        c1 = c2
    return w[:, order]


@lru_cache(maxsize=None)
def boundary_weights(order, offset):
    """Unit-grid weights for node ``offset`` inside a flush left window.

    The window is 0..p-1 with p = order + 2; scale by h**-order for a
    grid of spacing h. Mirror (reverse and negate for odd orders) for the
    right boundary.
    """
    p = _BOUNDARY_POINTS[order]
    return tuple(fd_weights(np.arange(p, dtype=float), float(offset), order))


def _centered_interior(values, order, h):
    """Centered stencil applied where the window fits; edges left at zero."""
    out = np.zeros_like(values)
    f = values
    if order == 1:
        out[1:-1] = (f[2:] - f[:-2]) * (0.5 / h)
    elif order == 2:
        out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    elif order == 3:
        out[2:-2] = (f[4:] - 2.0 * f[3:-1] + 2.0 * f[1:-3] - f[:-4]) * (0.5 / h**3)
    elif order == 4:
        out[2:-2] = (f[:-4] - 4.0 * f[1:-3] + 6.0 * f[2:-2] - 4.0 * f[3:-1] + f[4:]) / h**4
    else:
        raise ValueError(f"derivative order must be 1..4, got {order}")
    return out


def diff_periodic(values, order, h):
    """Derivative of a periodic nodal field, orders 1..4."""
    f = np.asarray(values, dtype=np.float64)
    fp1 = np.roll(f, -1, axis=0)
    fm1 = np.roll(f, 1, axis=0)
    if order == 1:
        return (fp1 - fm1) * (0.5 / h)
    if order == 2:
        return (fp1 - 2.0 * f + fm1) / h**2
    fp2 = np.roll(f, -2, axis=0)
    fm2 = np.roll(f, 2, axis=0)
    if order == 3:
        return (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) * (0.5 / h**3)
    if order == 4:
        return (fm2 - 4.0 * fm1 + 6.0 * f - 4.0 * fp1 + fp2) / h**4
    raise ValueError(f"derivative order must be 1..4, got {order}")


def diff_open(values, order, h):
    """Derivative of a nodal field on an open grid, orders 1..4."""
    f = np.asarray(values, dtype=np.float64)
    n = f.shape[0]
    out = _centered_interior(f, order, h)
    w = _HALF_WIDTH[order]
    p = _BOUNDARY_POINTS[order]
    scale = h ** (-order)
    for i in range(w):
        wl = np.asarray(boundary_weights(order, i)) * scale
        out[i] = np.tensordot(wl, f[:p], axes=(0, 0))
        wr = np.asarray(boundary_weights(order, p - 1 - i)) * scale
        out[n - 1 - i] = np.tensordot(wr, f[n - p:], axes=(0, 0))
    return out


def diff(values, order, h, closed):
    """Dispatch between the periodic and open variants."""
    if closed:
        return diff_periodic(values, order, h)
    return diff_open(values, order, h)


def end_row_weights(order, h, at_start):
    """Stencil weights evaluating a derivative exactly at a grid endpoint.

    Returns (indices, weights) relative to the curve's own node numbering,
    for use as boundary rows of the implicit step matrix.
    """
    p = _BOUNDARY_POINTS[order]
    w = np.asarray(boundary_weights(order, 0)) * h ** (-order)
    if at_start:
        return np.arange(p), w
    wr = np.asarray(boundary_weights(order, p - 1)) * h ** (-order)
    return np.arange(-p, 0), wr
