"""Pure numpy implementation of the hot kernels.

Every function takes a ``layout`` array of ``(is_hyperbolic, offset,
ambient_dim)`` rows (see :meth:`ModelSpace.layout`) so that the compiled
twin in ``_kernels.pyx`` can share the exact same signatures.
"""

from math import factorial

import numpy as np

DEGENERATE = 1e-12


def _hyp_dist(x, y):
    xs, ys = x[..., 1:], y[..., 1:]
    nx = np.sqrt(np.sum(xs * xs, axis=-1))
    ny = np.sqrt(np.sum(ys * ys, axis=-1))
    sx = np.where(nx > 0, nx, 1.0)[..., None]
    sy = np.where(ny > 0, ny, 1.0)[..., None]
    chord2 = np.sum((xs / sx - ys / sy) ** 2, axis=-1)
    # sinh((A - B)/2) for radii A, B, free of transcendental calls
    sh = (nx - ny) / np.sqrt(2.0 * (1.0 + np.sqrt(1.0 + nx * nx) * np.sqrt(1.0 + ny * ny) + nx * ny))
    s = sh * sh + 0.25 * nx * ny * chord2
    return 2.0 * np.arcsinh(np.sqrt(s))


def pair_dist(P, Q, layout):
    """Product distance between matching rows of ``P`` and ``Q``."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    acc = np.zeros(np.broadcast_shapes(P.shape, Q.shape)[:-1])
    for hyp, off, n in layout:
        x, y = P[..., off : off + n], Q[..., off : off + n]
        if hyp:
            d = _hyp_dist(x, y)
            acc += d * d
        else:
            acc += np.sum((x - y) ** 2, axis=-1)
    return np.sqrt(acc)


def geodesic(P, Q, t, layout):
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(np.broadcast_shapes(P.shape, Q.shape, t.shape + (1,)))
    for hyp, off, n in layout:
        x, y = P[..., off : off + n], Q[..., off : off + n]
        if hyp:
            d = _hyp_dist(x, y)
            small = d < 1e-12
            dd = np.where(small, 1.0, d)
            a = np.where(small, 1.0 - t, np.sinh((1.0 - t) * dd) / np.sinh(dd))
            b = np.where(small, t, np.sinh(t * dd) / np.sinh(dd))
            sp = a[..., None] * x[..., 1:] + b[..., None] * y[..., 1:]
            out[..., off + 1 : off + n] = sp
            out[..., off] = np.sqrt(1.0 + np.sum(sp * sp, axis=-1))
        else:
            out[..., off : off + n] = x + t[..., None] * (y - x)
    return out


def cone_eval(corners, bary, layout):
    """Iterated geodesic coning: ``p <- c0; p <- geo(p, c_i, b_i / (b_0 + ... + b_i))``.

    ``corners`` has shape ``(..., K+1, D)`` (already in coning order) and
    ``bary`` shape ``(..., K+1)``; both broadcast.  Barycentric entries may
    be slightly negative, which extrapolates along the same geodesics.
    """
    corners = np.asarray(corners, dtype=np.float64)
    bary = np.asarray(bary, dtype=np.float64)
    K = corners.shape[-2] - 1
    p = corners[..., 0, :]
    cum = bary[..., 0]
    for i in range(1, K + 1):
        bi = bary[..., i]
        cum = cum + bi
        safe = np.abs(cum) > 1e-300
        t = np.where(safe, bi / np.where(safe, cum, 1.0), 1.0)
        p = geodesic(p, corners[..., i, :], t, layout)
    return p


def simplex_volumes(corners, layout, nodes, h):
    """K-volume of each geodesically coned simplex.

    ``corners``: ``(S, K+1, D)``; ``nodes``: ``(Q, K+1)`` barycentric
    quadrature nodes with equal weights.  The integrand is the Gram
    determinant of the forward-difference differential, where the Gram
    entries come from squared distances by polarization.
    """
    corners = np.asarray(corners, dtype=np.float64)
    S, K1, _ = corners.shape
    K = K1 - 1
    if K == 0 or S == 0:
        return np.zeros(S)
    if K == 1:
        return pair_dist(corners[:, 0], corners[:, 1], layout)
    nodes = np.asarray(nodes, dtype=np.float64)
    Q = nodes.shape[0]
    # (Q, K+1, K+1): node itself, then node + h (e_j - e_0)
    shifted = np.repeat(nodes[:, None, :], K + 1, axis=1)
    for j in range(1, K + 1):
        shifted[:, j, 0] -= h
        shifted[:, j, j] += h
    pts = cone_eval(corners[:, None, None, :, :], shifted[None], layout)  # (S, Q, K+1, D)
    base = pts[:, :, :1, :]
    d0 = pair_dist(base, pts[:, :, 1:, :], layout) ** 2  # (S, Q, K)
    G = np.empty((S, Q, K, K))
    for a in range(K):
        G[:, :, a, a] = d0[:, :, a]
        for b in range(a + 1, K):
            dab = pair_dist(pts[:, :, 1 + a, :], pts[:, :, 1 + b, :], layout) ** 2
            G[:, :, a, b] = G[:, :, b, a] = 0.5 * (d0[:, :, a] + d0[:, :, b] - dab)
    diag = np.max(np.diagonal(G, axis1=-2, axis2=-1), axis=-1) ** K
    det = np.linalg.det(G)
    # rank-deficient differentials give pure rounding noise
    det = np.where(det > DEGENERATE * diag, det, 0.0) / h ** (2 * K)
    dens = np.sqrt(det)
    return dens.mean(axis=1) / factorial(K)
