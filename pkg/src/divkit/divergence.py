"""Filling-volume minimization and growth classification.

The inner infimum over fillings is approached by projected descent on the
vertex images of a piecewise-geodesic ball map: interior vertices move
against a finite-difference volume gradient, every trial point is pushed
back outside the forbidden ball, and only strict volume decreases are
accepted.  Volumes returned are therefore upper bounds for the infimum.

Keeping a piecewise-geodesic surface outside ``B(R)`` needs more than its
vertices being outside: geodesic chords cut inside.  Vertices are pushed
to ``R + K * dip(R, l)`` where ``l`` is the longest incident edge and
``dip`` the chord sagitta in the comparison plane, and quadrature nodes
are checked afterwards.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .constructions import (
    LeafParam,
    VerificationReport,
    antipodal_pair,
    flat_sphere,
    leaf_coordinates,
    round_sphere,
    suspend,
)
from .geometry import (
    GeometryError,
    ModelSpace,
    StructureError,
    base_log,
    dist_to_base,
    push_outside,
    radial_project,
    tangent_exp,
)
from .simplicial import (
    FD_STEP,
    ManifoldMap,
    chord_dip,
    check_admissible,
    cone_layers,
    filling_tolerance,
    pairwise_sum,
    refine,
)

# ---------------------------------------------------------------------------
# problem and configuration


@dataclass
class FillingProblem:
    space: ModelSpace
    sphere: ManifoldMap
    r: float
    rho: float = 1.0
    A: float = 10.0

    def __post_init__(self):
        if self.sphere.space != self.space:
            raise StructureError("sphere map lives in a different space")
        if not (self.r > 0 and 0 < self.rho <= 1 and self.A > 0):
            raise GeometryError("need r > 0, 0 < rho <= 1, A > 0")
        rep = check_admissible(self.sphere, self.r, self.rho, self.A, "sphere")
        if not rep.sphere_admissible:
            raise GeometryError(
                f"sphere map is not {self.A}-admissible at r={self.r}: volume {rep.volume:.6g}, "
                f"radius error {rep.max_radius_error:.3g}"
            )

    @property
    def k(self) -> int:
        return self.sphere.dim


@dataclass
class OptimizerConfig:
    max_iters: int = 200
    initial_step: float = 0.5
    step_shrink: float = 0.5
    tolerance: float = 1e-4
    seeds: int = 1
    refine_rounds: int = 2
    rng_seed: int = 0
    layers: int = 4
    jitter: float = 0.1
    smoothing: float = 10.0
    repair_rounds: int = 12
    max_simplices: int = 8000

    def __post_init__(self):
        if self.max_iters < 1 or self.seeds < 1 or self.layers < 2:
            raise GeometryError("max_iters, seeds must be positive and layers >= 2")
        if not (self.initial_step > 0 and 0 < self.step_shrink < 1 and 0 < self.tolerance < 1):
            raise GeometryError("need initial_step > 0, 0 < step_shrink < 1, 0 < tolerance < 1")
        if self.refine_rounds < 0 or self.rng_seed < 0 or self.jitter < 0 or self.smoothing < 0:
            raise GeometryError("refine_rounds, rng_seed, jitter and smoothing must be nonnegative")

    @classmethod
    def from_json(cls, obj: dict) -> "OptimizerConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise StructureError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**obj)


# ---------------------------------------------------------------------------
# feasibility machinery


def far_direction(sphere: ManifoldMap) -> np.ndarray:
    """Unit tangent direction at the basepoint for the apex of a filling.

    Axes along which the sphere is thin (spread within a tenth of the widest
    axis of the thinnest one) are candidates.  Each factor contributes its
    thinnest candidate, hyperbolic factors first, with equal weights:
    vertices near the apex then have a share in each hyperbolic factor, so
    pushing them outwards clears the ball.
    """
    space = sphere.space
    c = base_log(space, sphere.images)
    spread = np.max(np.abs(c - c.mean(axis=0)), axis=0)
    thin = spread <= spread.min() + 0.1 * spread.max()
    offsets = np.cumsum([0] + [f.dim for f in space.factors])
    picks = {True: [], False: []}
    for i, f in enumerate(space.factors):
        axes = [a for a in range(offsets[i], offsets[i + 1]) if thin[a]]
        if axes:
            # ties go to the highest axis
            picks[f.hyperbolic].append(min(reversed(axes), key=lambda a: spread[a]))
    d = np.zeros(space.dim)
    d[picks[True] or picks[False]] = 1.0
    return d / np.linalg.norm(d)


class _Mesh:
    """Precomputed incidence data for one ball complex in one space."""

    def __init__(self, m: ManifoldMap, radius: float):
        self.space = m.space
        self.domain = m.domain
        self.layout = m.space.layout()
        self.K = m.dim
        self.ordered = m.domain.ordered
        self.nodes = m.nodes()
        self.edges = m.domain.edges
        self.free = ~m.domain.boundary_mask
        self.radius = float(radius)
        self.V = m.domain.n_vertices
        self.touch = np.any(m.domain.boundary_mask[self.ordered], axis=1)

    def volumes(self, X: np.ndarray) -> np.ndarray:
        return kernels.simplex_volumes(X[self.ordered], self.layout, self.nodes, FD_STEP)

    def edge_lengths(self, X: np.ndarray) -> np.ndarray:
        e = self.edges
        return kernels.pair_dist(X[e[:, 0]], X[e[:, 1]], self.layout)

    def longest_incident(self, X: np.ndarray) -> np.ndarray:
        ell = self.edge_lengths(X)
        out = np.zeros(self.V)
        np.maximum.at(out, self.edges[:, 0], ell)
        np.maximum.at(out, self.edges[:, 1], ell)
        return out

    def mean_incident(self, X: np.ndarray) -> np.ndarray:
        ell = self.edge_lengths(X)
        tot = np.zeros(self.V)
        cnt = np.zeros(self.V)
        for c in (0, 1):
            np.add.at(tot, self.edges[:, c], ell)
            np.add.at(cnt, self.edges[:, c], 1.0)
        return tot / np.maximum(cnt, 1.0)

    def project(self, X: np.ndarray, passes: int = 2) -> np.ndarray:
        """Push free vertices out to the forbidden radius plus chord margins."""
        X = X.copy()
        for _ in range(passes):
            need = self.radius + self.K * chord_dip(self.space, self.radius, self.longest_incident(X))
            idx = np.nonzero(self.free)[0]
            X[idx], _ = push_outside(self.space, X[idx], need[idx])
        return X

    def node_min_radius(self, X: np.ndarray) -> np.ndarray:
        pts = kernels.cone_eval(X[self.ordered][:, None], self.nodes[None], self.layout)
        return np.min(dist_to_base(self.space, pts), axis=1)

    def vertex_ok(self, X: np.ndarray) -> bool:
        return bool(np.min(dist_to_base(self.space, X)) >= self.radius - 1e-9)

    def tol(self, X: np.ndarray) -> float:
        return filling_tolerance(self.space, self.domain, X, self.radius)

    def allowance(self, X: np.ndarray) -> np.ndarray:
        """Per-simplex slack below the forbidden radius: only simplices that
        touch the boundary may dip, by the boundary chord tolerance."""
        return np.where(self.touch, self.tol(X), 1e-9)

    def bad_simplices(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nm = self.node_min_radius(X)
        return nm < self.radius - self.allowance(X), nm

    def feasible(self, X: np.ndarray) -> bool:
        return self.vertex_ok(X) and not np.any(self.bad_simplices(X)[0])

    def repair(self, X: np.ndarray, rounds: int = 8, margin: bool = False) -> tuple[np.ndarray, bool]:
        if margin:
            X = self.project(X)
        else:
            X = X.copy()
            idx = np.nonzero(self.free)[0]
            X[idx], _ = push_outside(self.space, X[idx], np.full(len(idx), self.radius))
        for _ in range(rounds):
            bad, nm = self.bad_simplices(X)
            if not np.any(bad) and self.vertex_ok(X):
                return X, True
            deficit = np.where(bad, self.radius - nm, 0.0)
            push = np.zeros(self.V)
            for c in range(self.K + 1):
                np.maximum.at(push, self.ordered[:, c], 2.0 * deficit)
            push[~self.free] = 0.0
            idx = np.nonzero(push > 0)[0]
            if len(idx) == 0:
                break
            cur = dist_to_base(self.space, X[idx])
            X[idx], _ = push_outside(self.space, X[idx], cur + push[idx])
        return X, self.feasible(X)

    def gradient(self, X: np.ndarray, vols: np.ndarray, h: float = FD_STEP) -> np.ndarray:
        """Finite-difference volume gradient in tangent-frame coordinates.

        One batched evaluation per (tangent direction, simplex corner): every
        vertex is nudged at once and each simplex sees only its own corner move.
        """
        n = self.space.dim
        G = np.zeros((self.V, n))
        corners = X[self.ordered]
        for j in range(n):
            c = np.zeros((self.V, n))
            c[:, j] = h
            Xj = tangent_exp(self.space, X, c)
            for slot in range(self.K + 1):
                moved = corners.copy()
                moved[:, slot] = Xj[self.ordered[:, slot]]
                dv = (kernels.simplex_volumes(moved, self.layout, self.nodes, FD_STEP) - vols) / h
                np.add.at(G[:, j], self.ordered[:, slot], dv)
        G[~self.free] = 0.0
        return G

    def smoother(self, beta: float):
        """Factorized ``I + beta * L`` (graph Laplacian, boundary rows pinned)."""
        e = self.edges
        n = self.V
        W = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        W = (W + W.T).tocsr()
        deg = np.asarray(W.sum(axis=1)).ravel()
        L = sp.diags(deg) - W
        M = (sp.identity(n) + beta * L).tolil()
        for v in np.nonzero(~self.free)[0]:
            M.rows[v] = [v]
            M.data[v] = [1.0]
        return spla.factorized(M.tocsc())


# ---------------------------------------------------------------------------
# starting fillings


def angular_layers(space: ModelSpace, radius: float, spread: float) -> int:
    """Rings needed so that consecutive rings are at most half the widest
    angle a chord can span while staying outside ``B(radius)``.

    Hyperbolic factors are assumed to share the radius evenly, which is where
    a filling hugs the ball in a product.
    """
    n_hyp = sum(1 for f in space.factors if f.hyperbolic)
    if n_hyp == 0:
        return 1
    theta = 2.0 * math.acos(math.tanh(radius / math.sqrt(n_hyp)))
    return int(math.ceil(spread / (0.5 * theta)))


def initial_filling(
    problem: FillingProblem, layers: int = 4, max_layers: int = 1024, far: float | None = None
) -> ManifoldMap:
    """Cone the sphere to a far point ``x1`` at distance ``far`` (default
    ``rho r + 1``) in the direction ``far_direction``, then push interior vertices
    outside ``B(rho r)``.

    Band vertices are coned in polar coordinates about the basepoint: unit
    directions interpolate linearly from that of ``f(v)`` to that of ``x1``
    and radii grow linearly from ``rho r`` to ``far``.  In negative curvature
    the straight geodesic cone runs deep into the ball and cannot be
    repaired by radial pushing alone.
    """
    f = problem.sphere
    space = problem.space
    R = problem.rho * problem.r
    far = R + 1.0 if far is None else float(far)
    if far <= R:
        raise GeometryError("the far point must lie outside the forbidden ball")
    c1 = far_direction(f)
    base = np.broadcast_to(space.basepoint, f.images.shape)
    x1 = tangent_exp(space, base[0], far * c1)
    cf = base_log(space, f.images)
    cf /= np.linalg.norm(cf, axis=1, keepdims=True)
    # thin triangles: chords across a wide angle dip into B(R) however far
    # out their ends are, so add layers until the cone can be repaired
    spread = float(np.max(np.arccos(np.clip(cf @ c1, -1.0, 1.0))))
    L = max(layers, min(max_layers, angular_layers(space, R, spread)))
    while True:
        cx = cone_layers(f.domain, L)
        imgs = [x1]
        for j in range(1, L):
            mu = (L - j) / L
            u = (1 - mu) * cf + mu * c1
            n = np.linalg.norm(u, axis=1, keepdims=True)
            u = np.where(n > 1e-9, u / np.maximum(n, 1e-300), c1)
            imgs.extend(tangent_exp(space, base, (R + mu * (far - R)) * u))
        imgs.extend(f.images)
        m = ManifoldMap(cx, np.array(imgs), space, f.quadrature_order)
        X, ok = _Mesh(m, R).repair(m.images.copy(), rounds=32, margin=True)
        if ok:
            return m.with_images(X)
        if L >= max_layers:
            raise GeometryError("could not make the initial filling feasible")
        L = min(2 * L, max_layers)


# ---------------------------------------------------------------------------
# descent


def _descend(mesh: _Mesh, X: np.ndarray, config: OptimizerConfig, history: list) -> np.ndarray:
    vols = mesh.volumes(X)
    vol = pairwise_sum(vols)
    alpha = config.initial_step
    alpha_max = 64.0 * config.initial_step
    solve = mesh.smoother(config.smoothing)
    window = [vol]
    for _ in range(config.max_iters):
        G = mesh.gradient(X, vols)
        D = np.stack([solve(G[:, j]) for j in range(G.shape[1])], axis=1)
        D[~mesh.free] = 0.0
        accepted = False
        while alpha > 1e-12:
            Xn = tangent_exp(mesh.space, X, -alpha * D)
            Xn[~mesh.free] = X[~mesh.free]
            Xn, ok = mesh.repair(Xn, rounds=config.repair_rounds)
            if ok:
                vn_s = mesh.volumes(Xn)
                vn = pairwise_sum(vn_s)
                if vn < vol:
                    accepted = True
                    break
            alpha *= config.step_shrink
        if not accepted:
            break
        assert vn < vol
        X, vols, vol = Xn, vn_s, vn
        history.append(vol)
        alpha = min(alpha / config.step_shrink, alpha_max)
        window.append(vol)
        if len(window) > 10:
            window.pop(0)
            if window[-1] > window[0] * (1.0 - config.tolerance):
                break
    return X


def _refine_filling(m: ManifoldMap, radius_sphere: float) -> ManifoldMap:
    fine = refine(m)
    X = fine.images.copy()
    bd = fine.domain.boundary_vertices
    X[bd] = radial_project(fine.space, X[bd], radius_sphere)
    return fine.with_images(X)


def _optimize(
    problem: FillingProblem, start: ManifoldMap, config: OptimizerConfig, history: list | None = None
) -> tuple[ManifoldMap, float, int]:
    """Projected descent from a feasible filling, with ``config.refine_rounds``
    midpoint refinements interleaved (refined boundary midpoints are put
    back on ``S(r)``).  With several seeds, seeds after the first start
    from randomly jittered interior vertices; the best result is kept."""
    R = problem.rho * problem.r
    if not check_admissible(start, problem.r, problem.rho, problem.A, "filling").filling_admissible:
        raise GeometryError("optimizer start is not an admissible filling")
    best, best_vol, best_seed = None, math.inf, 0
    for seed in range(config.seeds):
        hist: list = []
        m = start
        mesh = _Mesh(m, R)
        X = m.images.copy()
        if seed > 0:
            rng = np.random.default_rng([config.rng_seed, seed])
            ell = mesh.mean_incident(X)
            c = rng.standard_normal((mesh.V, problem.space.dim)) * (config.jitter * ell)[:, None]
            c[~mesh.free] = 0.0
            Xj, ok = mesh.repair(tangent_exp(problem.space, X, c))
            if ok:
                X = Xj
        hist.append(pairwise_sum(mesh.volumes(X)))
        for level in range(config.refine_rounds + 1):
            if level > 0:
                if m.domain.n_simplices * 2**m.dim > config.max_simplices:
                    break
                m = _refine_filling(m.with_images(X), problem.r)
                mesh = _Mesh(m, R)
                X, ok = mesh.repair(m.images.copy(), rounds=32)
                if not ok:
                    raise GeometryError("refined filling could not be made feasible")
                hist.append(pairwise_sum(mesh.volumes(X)))
            X = _descend(mesh, X, config, hist)
        vol = pairwise_sum(mesh.volumes(X))
        if vol < best_vol:
            best, best_vol, best_seed = m.with_images(X), vol, seed
        if history is not None:
            history.append(hist)
    return best, float(best_vol), best_seed


def optimize_filling(
    problem: FillingProblem, start: ManifoldMap, config: OptimizerConfig, history: list | None = None
) -> tuple[ManifoldMap, float]:
    m, vol, _ = _optimize(problem, start, config, history)
    return m, vol


# ---------------------------------------------------------------------------
# leaf slices


@dataclass
class LeafSlice:
    length: float
    endpoints: list = field(default_factory=list)
    segments: int = 0
    empty: bool = True


def leaf_slice(filling: ManifoldMap, s: LeafParam | np.ndarray) -> LeafSlice:
    """Intersect a filling with the leaf ``Y_s``.

    Leaf coordinates are linearly interpolated over each simplex; the level
    set is a segment per simplex whose endpoints are mapped through the
    filling and measured with the ambient distance.
    """
    space = filling.space
    sv = s.s if isinstance(s, LeafParam) else np.asarray(s, dtype=float)
    k = len(space.factors)
    K = filling.dim
    if len(sv) != k:
        raise StructureError("leaf parameter length must equal the number of factors")
    if K != k:
        raise StructureError(f"slicing to curves needs a {k}-dimensional filling")
    _, _, S = leaf_coordinates(space, filling.images)
    S = S[:, : k - 1]
    target = sv[: k - 1]
    order = filling.domain.ordered
    layout = space.layout()
    pts_a, pts_b = [], []
    corner_a = []
    bd = set(tuple(sorted(f)) for f in filling.domain.boundary_faces.tolist())
    bmask = filling.domain.boundary_mask
    end_keys = set()
    ends = []
    on_face = set()
    for simplex in order:
        M = np.vstack([S[simplex].T, np.ones(K + 1)])
        rhs = np.r_[target, 1.0]
        b0, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.linalg.norm(M @ b0 - rhs) > 1e-9:
            continue
        _, sv_, vt = np.linalg.svd(M)
        d = vt[-1]
        lo, hi = -math.inf, math.inf
        for bi, di in zip(b0, d):
            if abs(di) < 1e-15:
                if bi < -1e-12:
                    lo, hi = 1.0, 0.0
                continue
            t = -bi / di
            if di > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
        if not lo < hi:
            continue
        ba = np.clip(b0 + lo * d, 0.0, None)
        bb = np.clip(b0 + hi * d, 0.0, None)
        ba /= ba.sum()
        bb /= bb.sum()
        # a segment along a shared face is reported by every simplex containing it
        support = tuple(int(v) for v, wa, wb in zip(simplex, ba, bb) if wa > 1e-12 or wb > 1e-12)
        if len(support) <= K:
            key = tuple(sorted(support))
            if key in on_face:
                continue
            on_face.add(key)
        pts_a.append(ba)
        pts_b.append(bb)
        corner_a.append(simplex)
        for bary in (ba, bb):
            face = tuple(sorted(int(v) for v, w in zip(simplex, bary) if w > 1e-12))
            on_bd = face in bd if len(face) == K else bool(np.all(bmask[list(face)]))
            key = (face, tuple(np.round(np.sort(bary[bary > 1e-12]), 9)))
            if on_bd and key not in end_keys:
                end_keys.add(key)
                ends.append((len(pts_a) - 1, bary))
    if not pts_a:
        return LeafSlice(0.0, [], 0, True)
    C = filling.images[np.array(corner_a)]
    A_ = kernels.cone_eval(C, np.array(pts_a), layout)
    B_ = kernels.cone_eval(C, np.array(pts_b), layout)
    seg = kernels.pair_dist(A_, B_, layout)
    endpoints = [kernels.cone_eval(C[i][None], bary[None], layout)[0] for i, bary in ends]
    return LeafSlice(float(pairwise_sum(seg)), endpoints, len(seg), False)


def coarea_integral(filling: ManifoldMap, samples: int = 41, radius: float = 1.0) -> float:
    """Integral of leaf-slice lengths over leaf parameters ``|s| <= radius``
    for a product of two factors: ``s = (sigma, -sigma)``, weight ``sqrt 2``."""
    if len(filling.space.factors) != 2:
        raise StructureError("the co-area integral is implemented for two factors")
    sig = np.linspace(-radius / math.sqrt(2), radius / math.sqrt(2), samples)
    lengths = np.array([leaf_slice(filling, LeafParam.from_pair(x)).length for x in sig])
    return float(math.sqrt(2) * np.trapezoid(lengths, sig))


def coarea_report(filling: ManifoldMap, area: float | None = None, samples: int = 41) -> VerificationReport:
    from .simplicial import k_volume

    area = k_volume(filling) if area is None else area
    return VerificationReport("coarea_slice_integral", coarea_integral(filling, samples), 1.1 * area)


# ---------------------------------------------------------------------------
# growth


@dataclass
class GrowthSeries:
    points: list  # (r, value) pairs of admissible radii
    fit: dict | None = None
    rows: list = field(default_factory=list)  # (r, volume, admissible, seed_best)

    def __post_init__(self):
        rs = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise GeometryError("radii must be strictly increasing")
        if any(p[1] <= 0 for p in self.points):
            raise GeometryError("values must be positive")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "volume", "admissible", "seed_best"])
        rows = self.rows or [(r, v, True, 0) for r, v in self.points]
        for r, v, ok, seed in rows:
            w.writerow([_fmt(r), _fmt(v), "true" if ok else "false", int(seed)])
        return buf.getvalue()

    def fit_json(self) -> str:
        return json.dumps(self.fit, sort_keys=True)


def _fmt(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def _linfit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def fit_growth(points, tie: float = 0.01) -> dict:
    """Classify ``value(r)`` as polynomial or exponential.

    Regresses ``log v`` on ``log r`` (slope = degree) and on ``r`` (slope =
    rate); the higher coefficient of determination wins, and a difference
    below ``tie`` is reported as ``"inconclusive"``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 4:
        raise GeometryError("need at least 4 points")
    r, v = pts[:, 0], pts[:, 1]
    if np.any(v <= 0) or np.any(r <= 0):
        raise GeometryError("values and radii must be positive")
    if np.any(np.diff(r) <= 0):
        raise GeometryError("radii must be strictly increasing")
    deg, _, r2p = _linfit(np.log(r), np.log(v))
    rate, _, r2e = _linfit(r, np.log(v))
    poly = {"kind": "polynomial", "parameter": deg, "r_squared": r2p}
    expo = {"kind": "exponential", "parameter": rate, "r_squared": r2e}
    win, alt = (expo, poly) if r2e > r2p else (poly, expo)
    out = dict(win)
    if abs(r2e - r2p) < tie:
        out["kind"] = "inconclusive"
        out["leading"] = win["kind"]
    out["alternative"] = alt
    return out


def _threads() -> int:
    env = os.environ.get("DIVKIT_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise GeometryError(f"DIVKIT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def sphere_candidate(space: ModelSpace, k: int, r: float, generator: str | Callable, depth: int = 3) -> ManifoldMap:
    """Hard sphere candidates: ``antipodal_pair`` (k = 0), ``flat_sphere``
    (k = number of factors - 1), ``suspended`` (suspension of the round
    (k-1)-sphere of the ``X`` factor of ``X x R``), or a callable ``r -> map``."""
    if callable(generator):
        return generator(r)
    if generator == "antipodal_pair":
        if k != 0:
            raise StructureError("antipodal pairs are 0-spheres")
        return antipodal_pair(space, r)
    if generator == "flat_sphere":
        if k != len(space.factors) - 1:
            raise StructureError("flat spheres have dimension (number of factors - 1)")
        return flat_sphere(space, r, depth)
    if generator == "suspended":
        X = ModelSpace(space.factors[:-1])
        base = antipodal_pair(X, r) if k == 1 else round_sphere(X, k - 1, r, depth)
        return suspend(space, base, r, levels=2 * 2 ** max(depth, 1))
    if generator == "round_sphere":
        return round_sphere(space, k, r, depth)
    raise StructureError(f"unknown sphere generator {generator!r}")


def estimate_divergence(
    space: ModelSpace,
    k: int,
    rho: float,
    A: float,
    radii,
    sphere_generator: str | Callable,
    config: OptimizerConfig | None = None,
    depth: int = 3,
    keep_fillings: dict | None = None,
) -> GrowthSeries:
    """Optimized filling volumes of a hard sphere candidate over a radius grid.

    Radii whose candidate fails admissibility are flagged and left out of
    the fit.  Radii run concurrently on up to ``DIVKIT_THREADS`` threads;
    results are merged in radius order.
    """
    config = config or OptimizerConfig()
    radii = [float(x) for x in radii]

    def one(r: float):
        f = sphere_candidate(space, k, r, sphere_generator, depth)
        try:
            prob = FillingProblem(space, f, r, rho, A)
        except GeometryError:
            return r, math.nan, False, -1, None
        start = initial_filling(prob, config.layers)
        m, vol, seed = _optimize(prob, start, config)
        return r, vol, True, seed, m

    workers = min(_threads(), len(radii)) or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, radii))
    else:
        results = [one(r) for r in radii]
    rows = [(r, v, ok, seed) for r, v, ok, seed, _ in results]
    if keep_fillings is not None:
        for r, _, ok, _, m in results:
            if ok:
                keep_fillings[r] = m
    pts = [(r, v) for r, v, ok, _ in rows if ok]
    fit = fit_growth(pts) if len(pts) >= 4 else None
    return GrowthSeries(pts, fit, rows)
