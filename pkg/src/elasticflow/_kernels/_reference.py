"""Pure numpy/scipy implementations of the hot kernels.

Mirrors the API of the compiled backend in ``_fast``; see the package
``__init__`` for how the backend is selected.
"""

import numpy as np
from scipy.linalg import solve_banded

BACKEND_NAME = "reference"


def periodic_derivatives(points, h):
    """First to fourth parameter derivatives of a closed polyline.

    Second order centered stencils with periodic index wrap. ``points``
    is (n, 2) without a duplicated wrap-around node.
    """
    f = np.asarray(points, dtype=np.float64)
    fp1 = np.roll(f, -1, axis=0)
    fm1 = np.roll(f, 1, axis=0)
    fp2 = np.roll(f, -2, axis=0)
    fm2 = np.roll(f, 2, axis=0)
    d1 = (fp1 - fm1) * (0.5 / h)
    d2 = (fp1 - 2.0 * f + fm1) * (1.0 / h**2)
    d3 = (fp2 - 2.0 * fp1 + 2.0 * fm1 - fm2) * (0.5 / h**3)
    d4 = (fm2 - 4.0 * fm1 + 6.0 * f - 4.0 * fp1 + fp2) * (1.0 / h**4)
    return d1, d2, d3, d4


def curve_velocity(d1, d2, d3, d4, mu):
    """Closed-form right-hand side of the parametrized evolution.

    Evaluates, per node,

        -2 g4/q^4 + 12 g3 <g2,g1>/q^6 + 5 g2 |g2|^2/q^6
        + 8 g2 <g3,g1>/q^6 - 35 g2 <g2,g1>^2/q^8 + mu g2/q^2

    with q = |g1|. The normal projection is the L2 gradient descent speed
    and the tangential projection is the gauge that makes the fourth-order
    leading term invertible.
    """
    q2 = np.einsum("ij,ij->i", d1, d1)[:, None]
    a12 = np.einsum("ij,ij->i", d2, d1)[:, None]
    a13 = np.einsum("ij,ij->i", d3, d1)[:, None]
    a22 = np.einsum("ij,ij->i", d2, d2)[:, None]
    q4 = q2 * q2
    q6 = q4 * q2
    q8 = q4 * q4
    return (-2.0 * d4 / q4
            + 12.0 * d3 * a12 / q6
            + 5.0 * d2 * a22 / q6
            + 8.0 * d2 * a13 / q6
            - 35.0 * d2 * a12 * a12 / q8
            + mu * d2 / q2)


def solve_cyclic_banded(diags, rhs):
    """Direct solve of a cyclic banded system with bandwidth two.

    ``diags`` is (5, n): ``diags[o + 2][i]`` multiplies ``x[(i + o) % n]``
    in row ``i`` for offsets o in -2..2. ``rhs`` is (n, m). Returns (n, m)
    or None when the factorization breaks down.

    Uses bordered elimination: the last two unknowns are split off, the
    remaining strictly banded block is solved with three right-hand side
    groups, and a 2x2 Schur complement closes the system.
    """
    diags = np.asarray(diags, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.ndim == 1:
        rhs = rhs[:, None]
    n = diags.shape[1]
    m = rhs.shape[1]
    ni = n - 2

    # Banded storage for the interior block, scipy layout ab[u + i - j, j].
    ab = np.zeros((5, ni))
    corr = np.zeros((ni, 2))
    for o in range(-2, 3):
        d = diags[o + 2]
        for i in range(ni):
            j = (i + o) % n
            if j < ni:
                ab[2 - o, j] = d[i]
            else:
                corr[i, j - ni] = d[i]

    big = np.hstack([rhs[:ni], corr])
    try:
        sol = solve_banded((2, 2), ab, big)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    u0 = sol[:, :m]
    uc = sol[:, m:]

    schur = np.zeros((2, 2))
    g = rhs[ni:].copy()
    for a in range(2):
        r = ni + a
        for o in range(-2, 3):
            val = diags[o + 2][r]
            j = (r + o) % n
            if j >= ni:
                schur[a, j - ni] += val
            else:
                schur[a] -= val * uc[j]
                g[a] -= val * u0[j]
    try:
        xb = np.linalg.solve(schur, g)
    except np.linalg.LinAlgError:
        return None
    x = np.empty((n, m))
    x[:ni] = u0 - uc @ xb
    x[ni:] = xb
    return x
