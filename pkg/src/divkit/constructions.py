"""Closed-form sphere maps, fillings and embeddings.

Everything here is an explicit construction: suspensions of sphere maps,
pushing planar loops off the unit disc, the four-band pull-off filling in
``X x R^2``, the horosphere-product embeddings into products of
hyperbolic spaces together with their leaf coordinates, round spheres in
flats, and transport of sphere maps along quasi-isometries.

Hyperbolic factors use horospherical coordinates relative to the standard
axis ``g(t) = (cosh t, sinh t, 0, ...)``: a point has a *level* ``h``
(its Busemann value towards ``g(+inf)`` is ``-h``) and a horizontal part
``u``, and the metric reads ``dh^2 + exp(-2h) |du|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import (
    GeometryError,
    ModelSpace,
    StructureError,
    _std_from_horo,
    _std_to_horo,
    axis_point,
    dist,
    dist_to_base,
    flat_point,
    geodesic_point,
    radial_project,
    validate,
)
from .simplicial import (
    ManifoldMap,
    SimplicialComplex,
    check_admissible,
    cone_layers,
    cylinder,
    k_volume,
    triangulate_sphere,
)

# ---------------------------------------------------------------------------
# reports and small types


@dataclass
class VerificationReport:
    """A measured quantity checked against a budget.

    ``relation`` is ``"<="`` (measured must not exceed budget) or ``">="``.
    """

    bound_name: str
    measured: float
    budget: float
    relation: str = "<="
    passed: bool = field(default=None)

    def __post_init__(self):
        if self.relation not in ("<=", ">="):
            raise StructureError(f"unknown relation {self.relation!r}")
        self.measured = float(self.measured)
        self.budget = float(self.budget)
        if self.passed is None:
            self.passed = self.recheck()

    def recheck(self) -> bool:
        if not (math.isfinite(self.measured) and math.isfinite(self.budget)):
            return False
        if self.relation == "<=":
            return self.measured <= self.budget
        return self.measured >= self.budget

    def to_json(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "measured": self.measured,
            "budget": self.budget,
            "relation": self.relation,
            "pass": bool(self.passed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationReport":
        return cls(obj["bound_name"], obj["measured"], obj["budget"], obj.get("relation", "<="), bool(obj["pass"]))


@dataclass(frozen=True)
class LeafParam:
    """Index ``s`` of a leaf of the foliation of a product of ``k``
    hyperbolic spaces; the entries sum to zero."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).reshape(-1)
        if len(s) < 1:
            raise StructureError("empty leaf parameter")
        if abs(s.sum()) > 1e-12 * max(1.0, np.abs(s).max()):
            raise GeometryError("leaf parameter entries must sum to zero")
        object.__setattr__(self, "s", s)

    @classmethod
    def zero(cls, k: int) -> "LeafParam":
        return cls(np.zeros(k))

    @classmethod
    def from_pair(cls, sigma: float) -> "LeafParam":
        """The leaf ``(sigma, -sigma)`` of a product of two factors."""
        return cls(np.array([sigma, -sigma]))

    def __len__(self):
        return len(self.s)


@dataclass
class QIMap:
    """Point map ``X -> X'`` with constants ``d(f x, f y) <= K d(x, y) + epsilon``
    (and coarse inverse constant ``C``)."""

    forward: Callable[[np.ndarray], np.ndarray]
    K: float
    epsilon: float = 0.0
    C: float = 0.0
    source: ModelSpace | None = None
    target: ModelSpace | None = None

    def __call__(self, p: np.ndarray) -> np.ndarray:
        return self.forward(p)

    def spot_check(self, P: np.ndarray, Q: np.ndarray) -> float:
        """Largest excess ``d(f p, f q) - K d(p, q) - epsilon`` over row pairs."""
        if self.source is None or self.target is None:
            raise StructureError("spot checks need source and target spaces")
        dx = dist(self.source, P, Q)
        dy = dist(self.target, self.forward(P), self.forward(Q))
        return float(np.max(dy - self.K * dx - self.epsilon))


def identity_map(space: ModelSpace) -> QIMap:
    return QIMap(lambda p: np.array(p, dtype=float), 1.0, 0.0, 0.0, space, space)


# ---------------------------------------------------------------------------
# round spheres


def round_sphere(space: ModelSpace, k: int, r: float, depth: int, frame: np.ndarray | None = None) -> ManifoldMap:
    """Geodesic sphere ``S^k`` of radius ``r`` about the basepoint.

    ``frame`` is a ``(k + 1, space.dim)`` matrix whose rows are orthonormal
    tangent directions at the basepoint (default: the first ``k + 1``).
    """
    from .geometry import tangent_exp

    if r <= 0:
        raise GeometryError("radius must be positive")
    if frame is None:
        if k + 1 > space.dim:
            raise StructureError("sphere dimension exceeds the space")
        frame = np.eye(space.dim)[: k + 1]
    frame = np.asarray(frame, dtype=float)
    cx = triangulate_sphere(k, depth)
    c = r * cx.vertices @ frame
    base = np.broadcast_to(space.basepoint, (cx.n_vertices, space.ambient_dim))
    return ManifoldMap(cx, tangent_exp(space, base, c), space)


def antipodal_pair(space: ModelSpace, r: float) -> ManifoldMap:
    """The ``S^0`` map onto two antipodal points of ``S(r)`` along the first axis."""
    return round_sphere(space, 0, r, 0)


def flat_sphere(space: ModelSpace, r: float, depth: int) -> ManifoldMap:
    """Round ``S^{k-1}`` of radius ``r`` in the flat spanned by the axis
    geodesics of a product of ``k >= 2`` hyperbolic spaces."""
    k = _hyperbolic_count(space)
    if k < 2:
        raise StructureError("flat spheres need at least two hyperbolic factors")
    if r <= 0:
        raise GeometryError("radius must be positive")
    cx = triangulate_sphere(k - 1, depth)
    return ManifoldMap(cx, flat_point(space, r * cx.vertices), space)


def flat_sphere_volume(k: int, r: float) -> float:
    """Euclidean volume of the round ``(k-1)``-sphere of radius ``r``."""
    return 2 * math.pi ** (k / 2) / math.gamma(k / 2) * r ** (k - 1)


def tilted_flat_circle(space: ModelSpace, r: float, depth: int, alpha: float = math.pi / 4) -> ManifoldMap:
    """Round circle of radius ``r`` in the 3-flat ``axis x R^2`` of ``X x R^2``,
    tilted by ``alpha`` so that its ``R^2`` shadow keeps distance
    ``r sin(alpha)`` from the origin."""
    _check_xr2(space)
    X = ModelSpace(space.factors[:-1])
    cx = triangulate_sphere(1, depth)
    c, s = cx.vertices[:, 0], cx.vertices[:, 1]
    xpart = np.stack([axis_point(X, 0, r * ci * math.cos(alpha)) for ci in c])
    zpart = np.stack([r * c * math.sin(alpha), r * s], axis=1)
    return ManifoldMap(cx, np.concatenate([xpart, zpart], axis=1), space)


def _hyperbolic_count(space: ModelSpace) -> int:
    if not all(f.hyperbolic for f in space.factors):
        raise StructureError("construction needs a product of hyperbolic factors")
    return len(space.factors)


# ---------------------------------------------------------------------------
# suspension


def _split_xr(space: ModelSpace) -> ModelSpace:
    last = space.factors[-1]
    if last.hyperbolic or last.dim != 1 or len(space.factors) < 2:
        raise StructureError("suspension needs a space of the form X x R")
    return ModelSpace(space.factors[:-1])


def suspend(space: ModelSpace, f: ManifoldMap, r: float, levels: int = 16) -> ManifoldMap:
    """Suspension of a sphere map ``f: S^k -> S(r)`` of ``X`` into ``X x R``.

    Each vertex ``p`` sweeps the half circle of radius ``r`` from the pole
    ``(x0, r)`` through ``(f(p), 0)`` to ``(x0, -r)`` inside the flat
    spanned by the ray through ``f(p)`` and the line; ``levels`` (even)
    is the number of arcs per meridian.
    """
    X = _split_xr(space)
    if levels < 2 or levels % 2:
        raise StructureError("levels must be an even integer >= 2")
    if f.domain.kind != "sphere":
        raise StructureError("suspension needs a sphere map")
    imgs = f.images
    if f.space == space:
        if np.max(np.abs(imgs[:, -1])) > 1e-9:
            raise GeometryError("sphere map does not lie in the slice X x {0}")
        imgs = imgs[:, :-1]
    elif f.space != X:
        raise StructureError("sphere map lives in neither X nor X x R")
    rad = np.atleast_1d(dist_to_base(X, imgs))
    if np.max(np.abs(rad - r)) > 1e-6:
        raise GeometryError("sphere map is not on the sphere of radius r")

    cx = f.domain
    V, k = cx.n_vertices, cx.dim
    ref_dim = cx.vertices.shape[1]
    phis = np.pi * np.arange(1, levels) / levels
    idx = lambda j, v: 2 + (j - 1) * V + v  # noqa: E731

    ref = [np.r_[np.zeros(ref_dim), 1.0], np.r_[np.zeros(ref_dim), -1.0]]
    pts = [
        np.r_[X.basepoint, r],
        np.r_[X.basepoint, -r],
    ]
    for phi in phis:
        ref.extend(np.concatenate([np.sin(phi) * cx.vertices, np.full((V, 1), np.cos(phi))], axis=1))
        xs = radial_project(X, imgs, r * np.sin(phi))
        pts.extend(np.concatenate([xs, np.full((V, 1), r * np.cos(phi))], axis=1))

    simp = []
    for s in cx.ordered:
        simp.append([0] + [idx(1, v) for v in s])
        simp.append([1] + [idx(levels - 1, v) for v in s])
        for j in range(1, levels - 1):
            for i in range(k + 1):
                simp.append([idx(j, v) for v in s[: i + 1]] + [idx(j + 1, v) for v in s[i:]])
    out_cx = SimplicialComplex(k + 1, np.array(ref), np.array(simp, dtype=np.int64), "sphere")
    return ManifoldMap(out_cx, np.array(pts), space, f.quadrature_order)


def meridian_lengths(m: ManifoldMap, n_base: int) -> np.ndarray:
    """Polyline lengths of the meridians of a :func:`suspend` output whose
    base sphere had ``n_base`` vertices."""
    levels = (m.domain.n_vertices - 2) // n_base + 1
    out = np.zeros(n_base)
    for v in range(n_base):
        path = [m.images[0]] + [m.images[2 + (j - 1) * n_base + v] for j in range(1, levels)] + [m.images[1]]
        path = np.array(path)
        out[v] = np.sum(dist(m.space, path[:-1], path[1:], check=False))
    return out


def equator_index(n_base: int, levels: int) -> np.ndarray:
    """Vertex indices of the ``f(p)`` copies in a :func:`suspend` output."""
    j = levels // 2
    return 2 + (j - 1) * n_base + np.arange(n_base)


# ---------------------------------------------------------------------------
# planar loops


@dataclass
class Loop:
    """Closed planar curve made of straight segments and unit-circle arcs.

    Segments are ``("line", p, q)`` or ``("arc", theta0, sweep)``.
    """

    segments: list
    case: str = ""

    def length(self) -> float:
        total = 0.0
        for seg in self.segments:
            if seg[0] == "line":
                total += float(np.linalg.norm(np.asarray(seg[2]) - np.asarray(seg[1])))
            else:
                total += abs(seg[2])
        return total

    def min_norm(self) -> float:
        best = math.inf
        for seg in self.segments:
            if seg[0] == "line":
                best = min(best, _segment_min_norm(np.asarray(seg[1]), np.asarray(seg[2])))
            else:
                best = min(best, 1.0)
        return best

    def points(self, per_arc: int = 32) -> np.ndarray:
        """Closed polyline approximation (first point repeated at the end)."""
        pts = []
        for seg in self.segments:
            if seg[0] == "line":
                pts.append(np.asarray(seg[1], float))
            else:
                th = seg[1] + seg[2] * np.arange(per_arc) / per_arc
                pts.extend(np.stack([np.cos(th), np.sin(th)], axis=1))
        if not pts:
            return np.zeros((0, 2))
        pts.append(pts[0])
        return np.array(pts)

    def to_json(self) -> dict:
        segs = []
        for seg in self.segments:
            if seg[0] == "line":
                segs.append({"kind": "line", "p": list(map(float, seg[1])), "q": list(map(float, seg[2]))})
            else:
                segs.append({"kind": "arc", "theta0": float(seg[1]), "sweep": float(seg[2])})
        return {"case": self.case, "segments": segs}


def _segment_min_norm(p: np.ndarray, q: np.ndarray) -> float:
    d = q - p
    dd = float(d @ d)
    lam = 0.0 if dd == 0 else min(1.0, max(0.0, -float(p @ d) / dd))
    return float(np.linalg.norm(p + lam * d))


def polyline_length(beta: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(beta, axis=0), axis=1)))


def _closed_loop(beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[1] != 2 or len(beta) < 2:
        raise StructureError("a loop is an (N, 2) array of points")
    if not np.array_equal(beta[0], beta[-1]):
        raise StructureError("loop is not closed: first and last points differ")
    return beta


def _circle_crossings(p: np.ndarray, q: np.ndarray) -> list[float]:
    d = q - p
    a = float(d @ d)
    if a == 0:
        return []
    b = 2 * float(p @ d)
    c = float(p @ p) - 1.0
    disc = b * b - 4 * a * c
    if disc <= 0:
        return []
    sq = math.sqrt(disc)
    roots = sorted({(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
    return [t for t in roots if 1e-12 < t < 1 - 1e-12]


def _ring_pair_homotopy(ring0: np.ndarray, ring1: np.ndarray) -> ManifoldMap:
    n = len(ring0)
    if n < 3:
        reps = -(-3 // n)
        ring0 = np.repeat(ring0, reps, axis=0)
        ring1 = np.repeat(ring1, reps, axis=0)
        n = len(ring0)
    cx = cylinder(n)
    return ManifoldMap(cx, np.concatenate([ring0, ring1]), ModelSpace.euclidean(2))


def perturb_loop(beta, A: float, r: float, samples_per_arc: int = 32) -> tuple[Loop, ManifoldMap]:
    """Push a closed planar polyline off the open unit disc.

    Three cases: a loop already outside is kept; a loop inside the open
    disc is translated by ``(2, 0)``; otherwise every maximal sub-arc
    inside the disc is replaced by the shorter unit-circle arc between its
    endpoints (counterclockwise for antipodal endpoints).  Returns the new
    loop (``loop.case`` records the branch) and the straight-line homotopy
    as a map of a cylinder into the plane.
    """
    beta = _closed_loop(beta)
    if polyline_length(beta) > A * r * (1 + 1e-12) + 1e-12:
        raise GeometryError("loop is longer than A * r")
    segs = list(zip(beta[:-1], beta[1:]))
    ring0 = beta[:-1]

    if min(_segment_min_norm(p, q) for p, q in segs) >= 1.0:
        loop = Loop([("line", p.copy(), q.copy()) for p, q in segs], "outside")
        return loop, _ring_pair_homotopy(ring0, ring0.copy())

    if np.max(np.linalg.norm(beta, axis=1)) < 1.0:
        v = np.array([2.0, 0.0])
        loop = Loop([("line", p + v, q + v) for p, q in segs], "inside")
        return loop, _ring_pair_homotopy(ring0, ring0 + v)

    # split at circle crossings; crossing points are snapped onto the circle
    pts = []
    for p, q in segs:
        pts.append(p)
        for t in _circle_crossings(p, q):
            x = p + t * (q - p)
            pts.append(x / np.linalg.norm(x))
    n = len(pts)
    pts = np.array(pts)
    norms = np.linalg.norm(pts, axis=1)
    inside = np.array([np.linalg.norm(0.5 * (pts[i] + pts[(i + 1) % n])) < 1.0 for i in range(n)])
    start = int(np.argmax(norms))
    order = [(start + i) % n for i in range(n)]

    segments, r0, r1 = [], [], []
    i = 0
    while i < n:
        a = order[i]
        if not inside[a]:
            b = order[(i + 1) % n]
            segments.append(("line", pts[a].copy(), pts[b].copy()))
            r0.append(pts[a])
            r1.append(pts[a])
            i += 1
            continue
        run = [a]
        while i < n and inside[order[i]]:
            i += 1
            run.append(order[i % n])
        path = pts[run]
        pa, pb = path[0] / np.linalg.norm(path[0]), path[-1] / np.linalg.norm(path[-1])
        th0 = math.atan2(pa[1], pa[0])
        sweep = math.atan2(pb[1], pb[0]) - th0
        sweep = (sweep + math.pi) % (2 * math.pi) - math.pi
        if abs(abs(sweep) - math.pi) < 1e-12:
            sweep = math.pi
        segments.append(("arc", th0, sweep))
        cum = np.r_[0.0, np.cumsum(np.linalg.norm(np.diff(path, axis=0), axis=1))]
        total = cum[-1]
        fr = np.unique(np.r_[cum / total if total > 0 else np.zeros(1), np.linspace(0, 1, samples_per_arc + 1)])
        fr = fr[fr < 1.0]
        for t in fr:
            j = min(np.searchsorted(cum, t * total, side="right") - 1, len(path) - 2)
            seg_len = cum[j + 1] - cum[j]
            lam = 0.0 if seg_len == 0 else (t * total - cum[j]) / seg_len
            r0.append(path[j] + lam * (path[j + 1] - path[j]))
            th = th0 + t * sweep
            r1.append(np.array([math.cos(th), math.sin(th)]))
    loop = Loop(segments, "mixed")
    return loop, _ring_pair_homotopy(np.array(r0), np.array(r1))


# ---------------------------------------------------------------------------
# four-band pull-off filling in X x R^2


def _check_xr2(space: ModelSpace) -> None:
    last = space.factors[-1]
    if last.hyperbolic or last.dim != 2 or len(space.factors) < 2:
        raise StructureError("construction needs a space of the form X x R^2")


def pulloff_filling(space: ModelSpace, gamma: ManifoldMap, A: float, r: float, rings_per_band: int = 4) -> ManifoldMap:
    """Filling of an admissible loop in ``X x R^2`` outside ``B(r)``.

    The disc is cut into four equal annular bands; going inwards they carry
    (1) radial projection of the ``R^2`` part onto the circle of radius
    ``3r``, (2) coning the ``X`` part to the basepoint ``x0``, (3) moving the
    ``X`` part along the axis to ``x1`` at distance ``5r``, and (4) coning
    the ``R^2`` part to the origin.
    """
    _check_xr2(space)
    if gamma.space != space or gamma.dim != 1 or gamma.domain.kind != "sphere":
        raise StructureError("gamma must be a loop in the given space")
    rep = check_admissible(gamma, r, 1.0, A, "sphere")
    if not rep.sphere_admissible:
        raise GeometryError("gamma is not A-admissible on S(r)")
    X = ModelSpace(space.factors[:-1])
    nx = X.ambient_dim
    x_img, z_img = gamma.images[:, :nx], gamma.images[:, nx:]
    # the R^2 part of a product geodesic is a straight segment
    e = gamma.domain.edges
    if min(_segment_min_norm(z_img[a], z_img[b]) for a, b in e) < 1.0:
        raise GeometryError("the R^2 projection of gamma enters the open unit disc")

    L = 4 * rings_per_band
    cx = cone_layers(gamma.domain, L)
    V = gamma.domain.n_vertices
    x0 = X.basepoint
    x1 = axis_point(X, 0, 5.0 * r)
    zn = np.linalg.norm(z_img, axis=1, keepdims=True)
    z3 = 3.0 * r * z_img / zn

    def ring(j: int) -> np.ndarray:
        rho = j / L
        if rho >= 0.75:
            lam = (1.0 - rho) * 4
            return np.concatenate([x_img, z_img * ((1 - lam) + lam * 3.0 * r / zn)], axis=1)
        if rho >= 0.5:
            lam = (0.75 - rho) * 4
            xs = geodesic_point(X, x_img, x0, np.full(V, lam), check=False)
            return np.concatenate([xs, z3], axis=1)
        if rho >= 0.25:
            lam = (0.5 - rho) * 4
            xs = np.broadcast_to(geodesic_point(X, x0, x1, lam, check=False), (V, nx))
            return np.concatenate([xs, z3], axis=1)
        lam = (0.25 - rho) * 4
        return np.concatenate([np.broadcast_to(x1, (V, nx)), (1 - lam) * z3], axis=1)

    images = [np.r_[x1, 0.0, 0.0]]
    for j in range(1, L + 1):
        images.extend(ring(j))
    images = np.array(images)
    # the outer ring is gamma itself
    images[1 + (L - 1) * V :] = gamma.images
    return ManifoldMap(cx, images, space, gamma.quadrature_order)


def pulloff_report(filling: ManifoldMap, A: float, r: float) -> list[VerificationReport]:
    area = k_volume(filling)
    min_vertex = float(np.min(dist_to_base(filling.space, filling.images)))
    return [
        VerificationReport("pulloff_area", area, 35.0 * A * r**3),
        VerificationReport("pulloff_min_vertex_radius", min_vertex, r - 1e-6, ">="),
    ]


# ---------------------------------------------------------------------------
# horosphere-product embeddings


def _horo_dims(space: ModelSpace) -> list[int]:
    _hyperbolic_count(space)
    if not space.standard_basepoint:
        raise GeometryError("embeddings use the standard basepoint")
    dims = [f.dim for f in space.factors]
    if min(dims) < 2:
        raise StructureError("embeddings need hyperbolic factors of dimension >= 2")
    return dims


def _from_levels(space: ModelSpace, u: np.ndarray, levels: np.ndarray, flip: np.ndarray | None = None) -> np.ndarray:
    dims = _horo_dims(space)
    k = len(dims)
    parts = []
    off = 0
    for i, m in enumerate(dims):
        x = _std_from_horo(u[..., off : off + m - 1], levels[..., i])
        if flip is not None and flip[i]:
            x = x.copy()
            x[..., 1] = -x[..., 1]
        parts.append(x)
        off += m - 1
    assert len(parts) == k
    return np.concatenate(parts, axis=-1)


def _check_u(space: ModelSpace, u: np.ndarray, n: int | None = None) -> np.ndarray:
    dims = _horo_dims(space)
    need = sum(m - 1 for m in dims) if n is None else n
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != need:
        raise StructureError(f"horizontal coordinates need length {need}, got {u.shape[-1]}")
    return u


def embed_Y_point(space: ModelSpace, t, u, s: LeafParam | np.ndarray | None = None) -> np.ndarray:
    """Point of the leaf ``Y_s`` with height ``t`` and horizontal part ``u``.

    Factor ``i`` sits on the horosphere of level ``t / sqrt(k) + s_i`` about
    ``g_i(+inf)`` with horizontal coordinates ``u_i``; with ``u = 0`` and
    ``s = 0`` this is the diagonal geodesic traced at unit speed.
    """
    k = len(_horo_dims(space))
    u = _check_u(space, u)
    t = np.asarray(t, dtype=float)
    sv = np.zeros(k) if s is None else (s.s if isinstance(s, LeafParam) else np.asarray(s, dtype=float))
    if sv.shape[-1] != k:
        raise StructureError("leaf parameter length must equal the number of factors")
    levels = t[..., None] / math.sqrt(k) + sv
    levels = np.broadcast_to(levels, np.broadcast_shapes(levels.shape, u.shape[:-1] + (k,)))
    u = np.broadcast_to(u, levels.shape[:-1] + u.shape[-1:])
    return _from_levels(space, u, levels)


def embed_Z_point(space: ModelSpace, t, u1, u2) -> np.ndarray:
    """Point of the mixed horosphere product ``Z``: the first factor sits on
    a horosphere about ``g_1(+inf)``, the others on horospheres about
    ``g_i(-inf)``, all through the diagonal point at height ``t``."""
    dims = _horo_dims(space)
    k = len(dims)
    u1 = _check_u(space, u1, dims[0] - 1)
    u2 = _check_u(space, u2, sum(m - 1 for m in dims[1:]))
    t = np.asarray(t, dtype=float)
    lev = t[..., None] / math.sqrt(k) * np.r_[1.0, -np.ones(k - 1)]
    shape = np.broadcast_shapes(lev.shape[:-1], u1.shape[:-1], u2.shape[:-1])
    u = np.concatenate([np.broadcast_to(u1, shape + u1.shape[-1:]), np.broadcast_to(u2, shape + u2.shape[-1:])], axis=-1)
    lev = np.broadcast_to(lev, shape + (k,))
    flip = np.r_[False, np.ones(k - 1, dtype=bool)]
    return _from_levels(space, u, lev, flip)


def leaf_coordinates(space: ModelSpace, p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(t, u, s)`` with ``p = embed_Y_point(space, t, u, s)``."""
    dims = _horo_dims(space)
    k = len(dims)
    p = np.asarray(p, dtype=float)
    levels, us = [], []
    for sl in space.slices():
        u, h = _std_to_horo(p[..., sl])
        levels.append(h)
        us.append(u)
    h = np.stack(levels, axis=-1)
    mean = h.mean(axis=-1)
    return math.sqrt(k) * mean, np.concatenate(us, axis=-1), h - mean[..., None]


def leaf_coordinate(space: ModelSpace, p: np.ndarray) -> LeafParam:
    """Leaf index of a single point (per-factor levels minus their mean)."""
    _, _, s = leaf_coordinates(space, p)
    s = np.asarray(s, dtype=float).reshape(-1)
    return LeafParam(s - s.mean())


def y_intrinsic_dist(p, q, k: int) -> float:
    """Distance inside a leaf between ``(t, u)`` coordinate pairs.

    The leaf metric ``dt^2 + exp(-2t/sqrt k) |du|^2`` has curvature
    ``-1/k``; it is ``sqrt(k)`` times the upper half-space metric at the
    point ``(u / sqrt k, exp(t / sqrt k))``.
    """
    tp, up = float(p[0]), np.atleast_1d(np.asarray(p[1], dtype=float))
    tq, uq = float(q[0]), np.atleast_1d(np.asarray(q[1], dtype=float))
    c = math.sqrt(k)
    yp, yq = math.exp(tp / c), math.exp(tq / c)
    du2 = float(np.sum((up - uq) ** 2)) / k
    half = math.sqrt(du2 + (yp - yq) ** 2) / (2.0 * math.sqrt(yp * yq))
    return c * 2.0 * math.asinh(half)


def y_sphere_half_length(r: float, k: int) -> float:
    """Length of half a great circle of radius ``r`` in a leaf (curvature ``-1/k``):
    the shortest path between antipodal points that avoids the open ball."""
    c = math.sqrt(k)
    return math.pi * c * math.sinh(r / c)


def _level_variation(u1, h1, u2, h2) -> float:
    """Total variation of the level along the geodesic between two points
    of one hyperbolic factor (horizontal parts ``u``, levels ``h``)."""
    y1, y2 = math.exp(h1), math.exp(h2)
    b = float(np.linalg.norm(np.asarray(u2) - np.asarray(u1)))
    if b == 0:
        return abs(h1 - h2)
    c = (b * b + y2 * y2 - y1 * y1) / (2 * b)
    if 0.0 <= c <= b:
        ymax = math.sqrt(c * c + y1 * y1)
        return 2 * math.log(ymax) - h1 - h2
    return abs(h1 - h2)


def y_path(space: ModelSpace, p: np.ndarray, q: np.ndarray, samples: int = 8) -> tuple[np.ndarray, float]:
    """Three-piece path inside a leaf: climb the diagonal from ``p``, cross
    horizontally along the product of horospheres, descend to ``q``.

    The climb height ``tau`` is the largest level variation of the
    factor-wise geodesics from ``p_i`` to ``q_i``.  Returns sampled ambient
    points and the exact length of the path.
    """
    dims = _horo_dims(space)
    k = len(dims)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    validate(space, p)
    validate(space, q)
    tp, up, sp = leaf_coordinates(space, p)
    tq, uq, sq = leaf_coordinates(space, q)
    if np.max(np.abs(sp - sq)) > 1e-8:
        raise GeometryError("points lie on different leaves")
    hp = tp / math.sqrt(k) + sp
    hq = tq / math.sqrt(k) + sq
    bounds = np.cumsum([0] + [m - 1 for m in dims])
    tau = max(
        _level_variation(up[bounds[i] : bounds[i + 1]], hp[i], uq[bounds[i] : bounds[i + 1]], hq[i]) for i in range(k)
    )
    top = np.minimum(hp, hq) + tau
    dp = float(top[0] - hp[0])
    dq = float(top[0] - hq[0])
    cross2 = 0.0
    for i in range(k):
        du = uq[bounds[i] : bounds[i + 1]] - up[bounds[i] : bounds[i + 1]]
        cross2 += math.exp(-2 * top[i]) * float(du @ du)
    length = math.sqrt(k) * (dp + dq) + math.sqrt(cross2)

    lam = np.linspace(0, 1, samples + 1)[:, None]
    climb = _from_levels(space, np.broadcast_to(up, (samples + 1, len(up))), hp + lam * (top - hp))
    cross = _from_levels(space, up + lam * (uq - up), np.broadcast_to(top, (samples + 1, k)))
    down = _from_levels(space, np.broadcast_to(uq, (samples + 1, len(uq))), top + lam * (hq - top))
    path = np.concatenate([climb, cross[1:], down[1:]])
    return path, length


def nonconvexity_split(l: float, k: int) -> tuple[float, float]:
    """Minimizing split ``l1 + l2 = l`` of ``sqrt((k-1) l1^2 + l2^2)``."""
    if l < 0 or k < 2:
        raise GeometryError("need l >= 0 and k >= 2")
    return l / k, l * (k - 1) / k


def nonconvexity_gap(l: float, k: int) -> float:
    """``min over l1 + l2 = l`` of ``sqrt((k-1) l1^2 + l2^2)``, which equals
    ``l sqrt((k-1)/k)``: how far the midpoint of a leaf geodesic of
    horizontal extent ``l`` can sit from the leaf."""
    if l < 0 or k < 2:
        raise GeometryError("need l >= 0 and k >= 2")
    return l * math.sqrt(k - 1) / math.sqrt(k)


# ---------------------------------------------------------------------------
# quasi-isometry transport and straightening


def transport_sphere(F: QIMap, f: ManifoldMap, r: float) -> ManifoldMap:
    """Push a sphere map through ``F`` vertexwise and radially project the
    result onto the sphere of radius ``r / K`` in the target."""
    target = F.target or f.space
    imgs = np.asarray(F.forward(f.images), dtype=float)
    validate(target, imgs)
    if np.any(np.atleast_1d(dist_to_base(target, imgs)) < 1e-12):
        raise GeometryError("transported sphere hits the basepoint; projection undefined")
    return ManifoldMap(f.domain, radial_project(target, imgs, r / F.K), target, f.quadrature_order)


def transport_report(F: QIMap, f: ManifoldMap, r: float, A: float) -> VerificationReport:
    g = transport_sphere(F, f, r)
    k = f.dim
    return VerificationReport("transport_volume", k_volume(g), A * F.K ** (2 * k) * (r / F.K) ** k)


def straighten_map(F: QIMap, complex: SimplicialComplex, net_points: np.ndarray) -> ManifoldMap:
    """Piecewise-geodesic map agreeing with ``F`` on the vertices of a
    triangulated region; higher skeleta are filled by geodesic coning."""
    net_points = np.asarray(net_points, dtype=float)
    if len(net_points) != complex.n_vertices:
        raise StructureError("every vertex needs a point of the net")
    imgs = np.asarray(F.forward(net_points), dtype=float)
    if imgs.ndim != 2 or len(imgs) != complex.n_vertices or not np.all(np.isfinite(imgs)):
        raise StructureError("missing vertex image")
    target = F.target or F.source
    if target is None:
        raise StructureError("QIMap needs a target space")
    return ManifoldMap(complex, imgs, target)


def straighten_report(F: QIMap, complex: SimplicialComplex, net_points: np.ndarray) -> list[VerificationReport]:
    m = straighten_map(F, complex, net_points)
    src = F.source
    vdisp = float(np.max(dist(m.space, m.images, F.forward(net_points), check=False)))
    e = complex.edges
    mids = geodesic_point(src, net_points[e[:, 0]], net_points[e[:, 1]], np.full(len(e), 0.5))
    img_mid = geodesic_point(m.space, m.images[e[:, 0]], m.images[e[:, 1]], np.full(len(e), 0.5))
    edisp = float(np.max(dist(m.space, F.forward(mids), img_mid, check=False)))
    mesh = float(np.max(dist(src, net_points[e[:, 0]], net_points[e[:, 1]], check=False)))
    return [
        VerificationReport("straighten_vertex_displacement", vdisp, 0.0),
        VerificationReport("straighten_midpoint_displacement", edisp, F.K * mesh + 1.5 * F.epsilon),
    ]
