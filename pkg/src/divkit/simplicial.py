"""Piecewise-geodesic simplicial maps from reference spheres and balls.

A :class:`ManifoldMap` assigns a point of a :class:`ModelSpace` to every
vertex of a :class:`SimplicialComplex`.  A point with barycentric
coordinates ``b`` in a simplex is evaluated by iterated geodesic coning
in increasing global vertex order,

    p <- f(v0);  p <- geodesic(p, f(vi), bi / (b0 + ... + bi)),  i = 1..k,

which makes the map continuous across shared faces.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import kernels
from .geometry import GeometryError, ModelSpace, StructureError, dist, dist_to_base, point_to_json, validate

FD_STEP = 1e-5
BARY_TOL = 1e-9

# ---------------------------------------------------------------------------
# complexes


@dataclass(frozen=True, eq=False)
class SimplicialComplex:
    dim: int
    vertices: np.ndarray  # (V, ref_dim) reference coordinates
    simplices: np.ndarray  # (S, dim + 1) vertex indices
    kind: str = "sphere"  # sphere | ball | cylinder

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        simp = np.asarray(self.simplices, dtype=np.int64).reshape(-1, self.dim + 1)
        if self.kind not in ("sphere", "ball", "cylinder"):
            raise StructureError(f"unknown complex kind {self.kind!r}")
        if simp.size and (simp.min() < 0 or simp.max() >= len(verts)):
            raise StructureError("simplex refers to a missing vertex")
        verts.setflags(write=False)
        simp.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "simplices", simp)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_simplices(self) -> int:
        return len(self.simplices)

    @cached_property
    def rank(self) -> np.ndarray:
        """Global vertex order by reference coordinates, ties by index.

        It depends only on the geometry of the domain, so relabeling the
        vertices leaves the coning order of every simplex unchanged.
        """
        keys = (np.arange(self.n_vertices),) + tuple(self.vertices.T[::-1])
        rank = np.empty(self.n_vertices, dtype=np.int64)
        rank[np.lexsort(keys)] = np.arange(self.n_vertices)
        return rank

    @cached_property
    def ordered(self) -> np.ndarray:
        """Simplices with vertices in the global :attr:`rank` order (the
        coning order); shared faces are coned identically from both sides."""
        return np.take_along_axis(self.simplices, np.argsort(self.rank[self.simplices], axis=1), axis=1)

    @cached_property
    def _sorted(self) -> np.ndarray:
        return np.sort(self.simplices, axis=1)

    def faces(self, d: int) -> np.ndarray:
        """All distinct d-dimensional faces, as sorted index tuples."""
        if d > self.dim:
            return np.empty((0, d + 1), dtype=np.int64)
        combos = list(itertools.combinations(range(self.dim + 1), d + 1))
        f = self._sorted[:, combos].reshape(-1, d + 1)
        return np.unique(f, axis=0)

    @cached_property
    def _facet_counts(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dim == 0:
            return np.empty((0, 0), dtype=np.int64), np.empty(0, dtype=np.int64)
        combos = list(itertools.combinations(range(self.dim + 1), self.dim))
        f = self._sorted[:, combos].reshape(-1, self.dim)
        return np.unique(f, axis=0, return_counts=True)

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        faces, counts = self._facet_counts
        return faces[counts == 1]

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_faces)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.boundary_vertices] = True
        return m

    @cached_property
    def edges(self) -> np.ndarray:
        if self.dim == 0:
            return np.empty((0, 2), dtype=np.int64)
        return self.faces(1)

    def euler_characteristic(self) -> int:
        return sum((-1) ** d * len(self.faces(d)) for d in range(self.dim + 1))

    def is_closed(self) -> bool:
        if self.dim == 0:
            return True
        _, counts = self._facet_counts
        return bool(np.all(counts == 2))

    def is_orientable(self) -> bool:
        """Check the stored orientations induce opposite signs on shared facets."""
        if self.dim == 0:
            return True
        seen: dict[tuple, int] = {}
        for simplex in self.simplices:
            for i in range(self.dim + 1):
                face = tuple(np.delete(simplex, i))
                sign = (-1) ** i * _perm_sign(face)
                key = tuple(sorted(face))
                if key in seen:
                    if seen[key] == sign:
                        return False
                else:
                    seen[key] = sign
        return True

    def reference_volumes(self) -> np.ndarray:
        v = self.vertices[self.simplices]
        e = v[:, 1:, :] - v[:, :1, :]
        G = e @ np.swapaxes(e, 1, 2)
        return np.sqrt(np.clip(np.linalg.det(G), 0.0, None)) / math.factorial(self.dim) if self.dim else np.ones(len(v))

    def boundary_complex(self) -> "SimplicialComplex":
        """The boundary as a sphere complex on the same vertex indices."""
        return SimplicialComplex(self.dim - 1, self.vertices, self.boundary_faces, "sphere")

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "kind": self.kind,
            "vertices": self.vertices.tolist(),
            "simplices": self.simplices.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SimplicialComplex":
        return cls(int(obj["dim"]), np.asarray(obj["vertices"], float), np.asarray(obj["simplices"], np.int64), obj.get("kind", "sphere"))


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _freudenthal(K: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Edge-midpoint subdivision of a K-simplex into 2^K children.

    Each child is a tuple of ``(i, j)`` pairs: the midpoint of parent
    vertices ``i`` and ``j`` (``i == j`` for a parent vertex).  Children keep
    the parent orientation.
    """
    children = []
    for corner in itertools.product((0, 1), repeat=K):
        for perm in itertools.permutations(range(K)):
            y = np.array(corner)
            pts = [y.copy()]
            for axis in perm:
                y = y.copy()
                y[axis] += 1
                pts.append(y)
            if all(p[0] <= 2 and all(p[i] >= p[i + 1] for i in range(K - 1)) and p[-1] >= 0 for p in pts):
                children.append(pts)
    out = []
    for pts in children:
        lam = []
        for y in pts:
            two = np.empty(K + 1, dtype=int)
            two[0] = 2 - y[0]
            two[1:K] = y[: K - 1] - y[1:]
            two[K] = y[K - 1]
            idx = [i for i in range(K + 1) for _ in range(two[i])]
            lam.append((idx[0], idx[1]))
        bary = np.zeros((K + 1, K + 1))
        for r, (i, j) in enumerate(lam):
            bary[r, i] += 0.5
            bary[r, j] += 0.5
        if np.linalg.det(bary[1:, 1:] - bary[:1, 1:]) < 0:
            lam[0], lam[1] = lam[1], lam[0]
        out.append(tuple(lam))
    assert len(out) == 2**K
    return tuple(out)


def subdivide(cx: SimplicialComplex, project_sphere: bool | None = None) -> tuple[SimplicialComplex, np.ndarray]:
    """One round of edge-midpoint subdivision.

    Returns the new complex and an ``(V_new, 2)`` array of parent vertex
    pairs: row ``i`` is ``(a, b)`` when new vertex ``i`` is the midpoint of
    old vertices ``a`` and ``b`` (``a == b`` for kept vertices).
    """
    K = cx.dim
    V = cx.n_vertices
    if K == 0:
        return cx, np.stack([np.arange(V)] * 2, axis=1)
    pairs = [(i, i) for i in range(V)]
    index: dict[tuple[int, int], int] = {}
    for a, b in cx.edges:
        index[(a, b)] = len(pairs)
        pairs.append((a, b))
    pairs_arr = np.array(pairs, dtype=np.int64)
    verts = 0.5 * (cx.vertices[pairs_arr[:, 0]] + cx.vertices[pairs_arr[:, 1]])
    if project_sphere is None:
        project_sphere = cx.kind == "sphere"
    if project_sphere:
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    elif cx.kind == "ball":
        bmask = cx.boundary_mask
        on_bd = bmask[pairs_arr[:, 0]] & bmask[pairs_arr[:, 1]]
        # only edges of boundary faces go back to the unit sphere
        bd_edges = set()
        for face in cx.boundary_faces:
            for a, b in itertools.combinations(sorted(face), 2):
                bd_edges.add((a, b))
        for i in np.nonzero(on_bd)[0]:
            a, b = pairs_arr[i]
            if a == b or (a, b) in bd_edges:
                n = np.linalg.norm(verts[i])
                if n > 0:
                    verts[i] /= n
    children = _freudenthal(K)
    new = []
    for s in cx.simplices:
        for child in children:
            row = []
            for i, j in child:
                a, b = s[i], s[j]
                row.append(a if a == b else index[(min(a, b), max(a, b))])
            new.append(row)
    return SimplicialComplex(K, verts, np.array(new, dtype=np.int64), cx.kind), pairs_arr


def triangulate_sphere(k: int, depth: int = 0) -> SimplicialComplex:
    """Boundary of the (k+1)-cross-polytope, subdivided ``depth`` times."""
    if not 0 <= k <= 4:
        raise StructureError("sphere triangulations exist for 0 <= k <= 4")
    if depth < 0:
        raise StructureError("depth must be nonnegative")
    n = k + 1
    verts = np.concatenate([np.eye(n), -np.eye(n)])
    if k == 0:
        return SimplicialComplex(0, verts, np.array([[0], [1]]), "sphere")
    simp = []
    for signs in itertools.product((1, -1), repeat=n):
        row = [i if s > 0 else i + n for i, s in enumerate(signs)]
        if np.prod(signs) < 0:
            row[0], row[1] = row[1], row[0]
        simp.append(row)
    cx = SimplicialComplex(k, verts, np.array(simp), "sphere")
    for _ in range(depth):
        cx, _ = subdivide(cx)
    return cx


def cone_layers(sphere: SimplicialComplex, layers: int = 2) -> SimplicialComplex:
    """Ball complex: cone over ``sphere`` from the origin, cut into radial layers.

    Vertex 0 is the apex, ring ``j`` (1..layers) holds a copy of the sphere
    scaled by ``j / layers``; the outer ring is the boundary, with sphere
    vertex ``v`` at index ``1 + (layers - 1) * V + v``.
    """
    if layers < 1:
        raise StructureError("need at least one layer")
    V = sphere.n_vertices
    k = sphere.dim
    verts = [np.zeros(sphere.vertices.shape[1])]
    for j in range(1, layers + 1):
        verts.extend(sphere.vertices * (j / layers))
    ring = lambda j, v: 1 + (j - 1) * V + v  # noqa: E731
    simp = []
    for s in sphere.ordered:
        simp.append([0] + [ring(1, v) for v in s])
        for j in range(1, layers):
            for i in range(k + 1):
                simp.append([ring(j, v) for v in s[: i + 1]] + [ring(j + 1, v) for v in s[i:]])
    return SimplicialComplex(k + 1, np.array(verts), np.array(simp, dtype=np.int64), "ball")


def triangulate_ball(k_plus_1: int, depth: int = 0, layers: int = 2) -> SimplicialComplex:
    """Layered cone over :func:`triangulate_sphere` ``(k_plus_1 - 1, depth)``."""
    if layers < 2:
        raise StructureError("ball triangulations use at least two radial layers")
    return cone_layers(triangulate_sphere(k_plus_1 - 1, depth), layers)


def ball_boundary_index(sphere: SimplicialComplex, layers: int) -> np.ndarray:
    """Indices of the outer ring of :func:`cone_layers`, in sphere vertex order."""
    return 1 + (layers - 1) * sphere.n_vertices + np.arange(sphere.n_vertices)


def cylinder(n: int, rings: int = 2) -> SimplicialComplex:
    """``S^1 x [0, 1]`` with ``n`` vertices per ring; ring ``j`` starts at ``j * n``."""
    theta = 2 * np.pi * np.arange(n) / n
    verts = []
    for j in range(rings):
        t = j / (rings - 1)
        verts.extend(np.stack([np.cos(theta), np.sin(theta), np.full(n, t)], axis=1))
    simp = []
    for j in range(rings - 1):
        for i in range(n):
            a, b = j * n + i, j * n + (i + 1) % n
            c, d = a + n, b + n
            simp.append([a, b, d])
            simp.append([a, d, c])
    return SimplicialComplex(2, np.array(verts), np.array(simp, dtype=np.int64), "cylinder")


@lru_cache(maxsize=None)
def quadrature_nodes(K: int, order: int = 2) -> np.ndarray:
    """Equal-weight barycentric nodes on a K-simplex.

    order 1: barycenter; order 2: all edge midpoints plus the barycenter;
    order q >= 3: centroids of the children after q - 2 midpoint subdivisions.
    """
    if order < 1:
        raise StructureError("quadrature order must be >= 1")
    bc = np.full(K + 1, 1.0 / (K + 1))
    if order == 1 or K == 0:
        nodes = [bc]
    elif order == 2:
        nodes = []
        for i, j in itertools.combinations(range(K + 1), 2):
            m = np.zeros(K + 1)
            m[i] = m[j] = 0.5
            nodes.append(m)
        if K > 1:
            nodes.append(bc)
    else:
        simplices = [np.eye(K + 1)]
        for _ in range(order - 2):
            nxt = []
            for B in simplices:
                for child in _freudenthal(K):
                    nxt.append(np.array([0.5 * (B[i] + B[j]) for i, j in child]))
            simplices = nxt
        nodes = [B.mean(axis=0) for B in simplices]
    out = np.array(nodes)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True, eq=False)
class ManifoldMap:
    domain: SimplicialComplex
    images: np.ndarray  # (V, ambient_dim)
    space: ModelSpace
    quadrature_order: int = 2

    def __post_init__(self):
        imgs = np.array(self.images, dtype=float, copy=True).reshape(-1, self.space.ambient_dim)
        if len(imgs) != self.domain.n_vertices:
            raise StructureError(f"{len(imgs)} images for {self.domain.n_vertices} vertices")
        if self.quadrature_order < 1:
            raise StructureError("quadrature order must be >= 1")
        validate(self.space, imgs)
        imgs.setflags(write=False)
        object.__setattr__(self, "images", imgs)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def with_images(self, images: np.ndarray) -> "ManifoldMap":
        return ManifoldMap(self.domain, images, self.space, self.quadrature_order)

    def corners(self) -> np.ndarray:
        return self.images[self.domain.ordered]

    def nodes(self) -> np.ndarray:
        return quadrature_nodes(self.dim, self.quadrature_order)

    def node_points(self) -> np.ndarray:
        """Images of all quadrature nodes, shape ``(S, Q, D)``."""
        nodes = self.nodes()
        return kernels.cone_eval(self.corners()[:, None], nodes[None], self.space.layout())

    def boundary_map(self) -> "ManifoldMap":
        return ManifoldMap(self.domain.boundary_complex(), self.images, self.space, self.quadrature_order)

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "complex": self.domain.to_json(),
            "images": [point_to_json(self.space, p) for p in self.images],
            "quadrature_order": self.quadrature_order,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict | str) -> "ManifoldMap":
        if isinstance(obj, str):
            obj = json.loads(obj)
        space = ModelSpace.from_json(obj["space"])
        cx = SimplicialComplex.from_json(obj["complex"])
        images = np.array([space.point(p) for p in obj["images"]]).reshape(-1, space.ambient_dim)
        return cls(cx, images, space, int(obj.get("quadrature_order", 2)))


def map_eval(m: ManifoldMap, simplex_index: int, bary) -> np.ndarray:
    """Evaluate ``m`` at barycentric coordinates ``bary`` of a simplex.

    ``bary`` is given in the stored vertex order of the simplex.
    """
    bary = np.asarray(bary, dtype=float)
    if bary.shape[-1] != m.dim + 1:
        raise StructureError("barycentric coordinates have the wrong length")
    if np.any(bary < -BARY_TOL) or np.any(np.abs(bary.sum(axis=-1) - 1.0) > BARY_TOL):
        raise GeometryError("barycentric coordinates must be nonnegative and sum to 1")
    simplex = m.domain.simplices[simplex_index]
    order = np.argsort(m.domain.rank[simplex])
    return kernels.cone_eval(m.images[simplex[order]], bary[..., order], m.space.layout())


def simplex_volumes(m: ManifoldMap) -> np.ndarray:
    if m.dim == 0 or m.domain.n_simplices == 0:
        return np.zeros(m.domain.n_simplices)
    vols = kernels.simplex_volumes(m.corners(), m.space.layout(), m.nodes(), FD_STEP)
    vols[m.domain.reference_volumes() <= 0] = 0.0
    return vols


def pairwise_sum(x: np.ndarray) -> float:
    """Order-fixed pairwise reduction."""
    x = np.asarray(x, dtype=float)
    while len(x) > 1:
        if len(x) % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0]) if len(x) else 0.0


def k_volume(m: ManifoldMap) -> float:
    """k-volume of a piecewise-geodesic map (0 for maps of 0-complexes)."""
    return pairwise_sum(simplex_volumes(m))


def lipschitz_estimate(m: ManifoldMap) -> float:
    """Max ratio of image distance to reference length over all edges."""
    e = m.domain.edges
    if len(e) == 0:
        return 0.0
    ref = np.linalg.norm(m.domain.vertices[e[:, 0]] - m.domain.vertices[e[:, 1]], axis=1)
    img = dist(m.space, m.images[e[:, 0]], m.images[e[:, 1]], check=False)
    ok = ref > 0
    return float(np.max(img[ok] / ref[ok])) if np.any(ok) else 0.0


def max_edge_length(m: ManifoldMap, edges: np.ndarray | None = None) -> float:
    e = m.domain.edges if edges is None else edges
    if len(e) == 0:
        return 0.0
    return float(np.max(dist(m.space, m.images[e[:, 0]], m.images[e[:, 1]], check=False)))


def chord_dip(space: ModelSpace, radius, length) -> np.ndarray:
    """Upper bound on how far a geodesic of ``length`` with endpoints at
    distance >= ``radius`` from the basepoint can dip below ``radius``.

    Sectional curvatures of the modeled spaces lie in [-1, 0], so the
    hyperbolic plane (or the Euclidean plane for flat spaces) is the
    comparison space and the isosceles chord is extremal.
    """
    radius = np.asarray(radius, dtype=float)
    half = 0.5 * np.asarray(length, dtype=float)
    if any(f.hyperbolic for f in space.factors):
        inner = np.arccosh(np.maximum(1.0, np.cosh(radius) / np.cosh(half)))
    else:
        inner = np.sqrt(np.maximum(0.0, radius**2 - half**2))
    return radius - inner


def discretization_tolerance(m: ManifoldMap, radius: float, edges: np.ndarray | None = None) -> float:
    """How far sampled points of ``m`` may sit below ``radius`` purely
    because geodesic simplices with vertices on ``S(radius)`` cut inside."""
    ell = max_edge_length(m, edges)
    return float(max(1, m.dim) * chord_dip(m.space, radius, ell))


def boundary_incident_edges(cx: SimplicialComplex) -> np.ndarray:
    e = cx.edges
    b = cx.boundary_mask
    return e[b[e[:, 0]] | b[e[:, 1]]]


def filling_tolerance(space: ModelSpace, cx: SimplicialComplex, images: np.ndarray, radius: float) -> float:
    """Chord-dip allowance for a filling whose boundary sits on the sphere:
    simplices touching the boundary cannot stay outside ``B(radius)``
    exactly.  Capped at a quarter of ``radius``."""
    e = boundary_incident_edges(cx)
    if len(e) == 0:
        return 1e-9
    ell = float(np.max(dist(space, images[e[:, 0]], images[e[:, 1]], check=False)))
    dip = float(chord_dip(space, radius, ell))
    return min(cx.dim * dip, 0.25 * radius) + 1e-9


@dataclass
class AdmissibilityReport:
    volume: float
    min_radius: float
    lipschitz_estimate: float
    sphere_admissible: bool
    filling_admissible: bool
    max_radius_error: float = 0.0
    tolerance: float = 0.0
    degenerate_simplices: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def sampled_radii(m: ManifoldMap) -> np.ndarray:
    pts = [m.images]
    if m.dim > 0 and m.domain.n_simplices:
        pts.append(m.node_points().reshape(-1, m.space.ambient_dim))
    return dist_to_base(m.space, np.concatenate(pts))


def check_admissible(
    m: ManifoldMap, r: float, rho: float, A: float, role: str, tol: float | None = None
) -> AdmissibilityReport:
    """Admissibility of a sphere map (``vol <= A r^k`` and image on ``S(r)``)
    or of a filling (image outside the open ball ``B(rho r)``).

    ``tol`` defaults to the chord-dip tolerance of the relevant mesh: the
    whole map for spheres, the edges touching the boundary for fillings.
    """
    if not (r > 0 and 0 < rho <= 1 and A > 0):
        raise GeometryError("need r > 0, 0 < rho <= 1, A > 0")
    if role == "sphere":
        if m.domain.kind != "sphere":
            raise StructureError("sphere role needs a sphere complex")
        k = m.dim
    elif role == "filling":
        if m.domain.kind == "sphere":
            raise StructureError("filling role needs a ball complex")
        k = m.dim - 1
    else:
        raise StructureError(f"unknown role {role!r}")

    vol = k_volume(m)
    radii = sampled_radii(m)
    min_radius = float(radii.min())
    if tol is None:
        if role == "sphere":
            tol = discretization_tolerance(m, r) + 1e-9
        else:
            tol = filling_tolerance(m.space, m.domain, m.images, rho * r)
    err = float(np.max(np.abs(radii - r)))
    degenerate = int(np.sum(m.domain.reference_volumes() <= 0)) if m.dim else 0
    return AdmissibilityReport(
        volume=vol,
        min_radius=min_radius,
        lipschitz_estimate=lipschitz_estimate(m),
        sphere_admissible=bool(role == "sphere" and vol <= A * r**k * (1 + 1e-12) and err <= tol),
        filling_admissible=bool(role == "filling" and min_radius >= rho * r - tol),
        max_radius_error=err,
        tolerance=float(tol),
        degenerate_simplices=degenerate,
    )


def refine(m: ManifoldMap) -> ManifoldMap:
    """Midpoint-subdivide every simplex; new images are geodesic midpoints."""
    cx, pairs = subdivide(m.domain)
    a, b = pairs[:, 0], pairs[:, 1]
    images = kernels.geodesic(m.images[a], m.images[b], np.full(len(pairs), 0.5), m.space.layout())
    return ManifoldMap(cx, images, m.space, m.quadrature_order)


def volumes_csv(m: ManifoldMap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["simplex_index", "volume"])
    for i, v in enumerate(simplex_volumes(m)):
        w.writerow([i, f"{v:.17g}"])
    return buf.getvalue()
