"""Kernel dispatch: the compiled extension when it imports, numpy otherwise.

Set ``DIVKIT_PURE_PYTHON=1`` to force the numpy fallback.  ``BACKEND``
names the implementation in use.
"""

import os

import numpy as np

from . import _kernels_py as _py

try:
    if os.environ.get("DIVKIT_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _c
except ImportError:
    _c = None

BACKEND = "cython" if _c is not None else "python"


def _layout(layout):
    return np.ascontiguousarray(layout, dtype=np.int_)


def pair_dist(P, Q, layout, backend=None):
    P, Q = np.broadcast_arrays(np.asarray(P, float), np.asarray(Q, float))
    if (backend or BACKEND) == "python" or _c is None:
        return _py.pair_dist(P, Q, layout)
    shape = P.shape[:-1]
    D = P.shape[-1]
    out = _c.pair_dist(
        np.ascontiguousarray(P.reshape(-1, D)), np.ascontiguousarray(Q.reshape(-1, D)), _layout(layout)
    )
    return out.reshape(shape)


def geodesic(P, Q, t, layout, backend=None):
    t = np.asarray(t, float)
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    if (backend or BACKEND) == "python" or _c is None:
        return _py.geodesic(P, Q, t, layout)
    shape = np.broadcast_shapes(P.shape, Q.shape, t.shape + (1,))
    D = shape[-1]
    P = np.ascontiguousarray(np.broadcast_to(P, shape).reshape(-1, D))
    Q = np.ascontiguousarray(np.broadcast_to(Q, shape).reshape(-1, D))
    t = np.ascontiguousarray(np.broadcast_to(t, shape[:-1]).reshape(-1))
    return _c.geodesic(P, Q, t, _layout(layout)).reshape(shape)


def cone_eval(corners, bary, layout, backend=None):
    corners, bary = np.asarray(corners, float), np.asarray(bary, float)
    if (backend or BACKEND) == "python" or _c is None:
        return _py.cone_eval(corners, bary, layout)
    K1, D = corners.shape[-2:]
    lead = np.broadcast_shapes(corners.shape[:-2], bary.shape[:-1])
    c = np.ascontiguousarray(np.broadcast_to(corners, lead + (K1, D)).reshape(-1, K1, D))
    b = np.ascontiguousarray(np.broadcast_to(bary, lead + (K1,)).reshape(-1, K1))
    return _c.cone_eval(c, b, _layout(layout)).reshape(lead + (D,))


def simplex_volumes(corners, layout, nodes, h, backend=None):
    corners = np.ascontiguousarray(corners, dtype=float)
    nodes = np.ascontiguousarray(nodes, dtype=float)
    if (backend or BACKEND) == "python" or _c is None:
        return _py.simplex_volumes(corners, layout, nodes, h)
    return _c.simplex_volumes(corners, _layout(layout), nodes, float(h))
