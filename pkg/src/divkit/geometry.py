"""Metric geometry of finite products of hyperbolic and Euclidean spaces.

Points are stored as flat float arrays in *ambient* coordinates: each
hyperbolic factor ``H^m`` occupies ``m + 1`` hyperboloid coordinates
``(x0, x1, ..., xm)`` and each Euclidean factor ``R^m`` occupies ``m``
coordinates.  All operations broadcast over leading axes.

Distances in hyperbolic factors use the polar (haversine) form of the
hyperbolic law of cosines,

    sinh^2(d/2) = sinh^2((R1 - R2)/2) + sinh R1 sinh R2 sin^2(theta/2),

which stays accurate far from the model origin where the usual
``arccosh(-<p, q>)`` loses all precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

POINT_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid point, geodesic or space description."""


class StructureError(GeometryError):
    """Arity or dimension mismatch between a point and its space."""


@dataclass(frozen=True)
class Factor:
    kind: str  # "hyperbolic" | "euclidean"
    dim: int

    def __post_init__(self):
        if self.kind not in ("hyperbolic", "euclidean"):
            raise StructureError(f"unknown factor kind {self.kind!r}")
        if self.dim < 1:
            raise StructureError("factor dimension must be >= 1")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.kind == "hyperbolic" else self.dim

    @property
    def hyperbolic(self) -> bool:
        return self.kind == "hyperbolic"


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """A product ``X = X_1 x ... x X_n`` of constant curvature factors.

    ``basepoint`` defaults to the hyperboloid vertex in every hyperbolic
    factor and the origin in every Euclidean one.
    """

    factors: tuple[Factor, ...]
    basepoint: np.ndarray = field(default=None)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise StructureError("a model space needs at least one factor")
        object.__setattr__(self, "factors", factors)
        offsets = np.cumsum([0] + [f.ambient_dim for f in factors])
        object.__setattr__(self, "_offsets", offsets)
        if self.basepoint is None:
            base = np.zeros(offsets[-1])
            for f, off in zip(factors, offsets):
                if f.hyperbolic:
                    base[off] = 1.0
            object.__setattr__(self, "basepoint", base)
        else:
            base = np.asarray(self.basepoint, dtype=float)
            validate(self, base)
            object.__setattr__(self, "basepoint", normalize(self, base))
        self.basepoint.setflags(write=False)

    # construction helpers -------------------------------------------------

    @classmethod
    def product(cls, *specs: tuple[str, int] | Factor) -> "ModelSpace":
        """``ModelSpace.product(("hyperbolic", 2), ("euclidean", 1))``"""
        facs = [s if isinstance(s, Factor) else Factor(*s) for s in specs]
        return cls(tuple(facs))

    @classmethod
    def hyperbolic(cls, *dims: int) -> "ModelSpace":
        return cls(tuple(Factor("hyperbolic", d) for d in dims))

    @classmethod
    def euclidean(cls, dim: int) -> "ModelSpace":
        return cls((Factor("euclidean", dim),))

    def times(self, other: "ModelSpace") -> "ModelSpace":
        return ModelSpace(self.factors + other.factors)

    # layout ----------------------------------------------------------------

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @property
    def ambient_dim(self) -> int:
        return int(self._offsets[-1])

    @property
    def standard_basepoint(self) -> bool:
        """True when every hyperbolic factor is based at the hyperboloid vertex."""
        return bool(np.allclose(self.basepoint, ModelSpace(self.factors).basepoint, atol=0))

    def slices(self) -> list[slice]:
        off = self._offsets
        return [slice(int(off[i]), int(off[i + 1])) for i in range(len(self.factors))]

    def layout(self) -> np.ndarray:
        """``(F, 3)`` int array of ``(is_hyperbolic, offset, ambient_dim)`` rows."""
        return np.array(
            [[int(f.hyperbolic), int(o), f.ambient_dim] for f, o in zip(self.factors, self._offsets)],
            dtype=np.int64,
        )

    def parts(self, p: np.ndarray) -> list[np.ndarray]:
        p = np.asarray(p, dtype=float)
        return [p[..., s] for s in self.slices()]

    def point(self, parts: Sequence[Sequence[float]]) -> np.ndarray:
        """Assemble a product point from per-factor coordinate arrays.

        Hyperbolic parts may be given either in full hyperboloid form
        (length ``m + 1``) or by their spatial part only (length ``m``).
        """
        if len(parts) != len(self.factors):
            raise StructureError(f"expected {len(self.factors)} parts, got {len(parts)}")
        out = []
        for f, part in zip(self.factors, parts):
            part = np.asarray(part, dtype=float)
            if f.hyperbolic and part.shape[-1] == f.dim:
                part = lift(part)
            if part.shape[-1] != f.ambient_dim:
                raise StructureError(f"part of length {part.shape[-1]} does not fit {f}")
            out.append(part)
        return np.concatenate(out, axis=-1)

    # serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {"factors": [{"kind": f.kind, "dim": f.dim} for f in self.factors]}

    @classmethod
    def from_json(cls, obj: dict | str) -> "ModelSpace":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            factors = tuple(Factor(d["kind"], int(d["dim"])) for d in obj["factors"])
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed space description: {exc}") from exc
        space = cls(factors)
        if "basepoint" in obj:
            space = cls(factors, point_from_json(space, obj["basepoint"]))
        return space

    def __eq__(self, other):
        return (
            isinstance(other, ModelSpace)
            and self.factors == other.factors
            and np.array_equal(self.basepoint, other.basepoint)
        )

    def __hash__(self):
        return hash(self.factors)

    def __repr__(self):
        names = " x ".join(("H" if f.hyperbolic else "R") + f"^{f.dim}" for f in self.factors)
        return f"ModelSpace({names})"


def point_to_json(space: ModelSpace, p: np.ndarray) -> list:
    return [part.tolist() for part in space.parts(p)]


def point_from_json(space: ModelSpace, obj: list) -> np.ndarray:
    return space.point(obj)


# ---------------------------------------------------------------------------
# hyperboloid primitives (single factor, spatial part x, time part x0)


def lift(spatial: np.ndarray) -> np.ndarray:
    """Hyperboloid point with the given spatial coordinates."""
    spatial = np.asarray(spatial, dtype=float)
    x0 = np.sqrt(1.0 + np.sum(spatial * spatial, axis=-1, keepdims=True))
    return np.concatenate([x0, spatial], axis=-1)


def minkowski(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def _hyp_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    xs, ys = x[..., 1:], y[..., 1:]
    nx = np.linalg.norm(xs, axis=-1)
    ny = np.linalg.norm(ys, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(nx[..., None] > 0, xs / nx[..., None], 0.0)
        uy = np.where(ny[..., None] > 0, ys / ny[..., None], 0.0)
    chord2 = np.sum((ux - uy) ** 2, axis=-1)
    # sinh((A - B)/2) for radii A, B, free of transcendental calls
    sh = (nx - ny) / np.sqrt(2.0 * (1.0 + np.sqrt(1.0 + nx * nx) * np.sqrt(1.0 + ny * ny) + nx * ny))
    s = sh * sh + 0.25 * nx * ny * chord2
    return 2.0 * np.arcsinh(np.sqrt(s))


def _hyp_geodesic(x: np.ndarray, y: np.ndarray, t, d: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    small = d < 1e-12
    dd = np.where(small, 1.0, d)
    a = np.where(small, 1.0 - t, np.sinh((1.0 - t) * dd) / np.sinh(dd))
    b = np.where(small, t, np.sinh(t * dd) / np.sinh(dd))
    spatial = a[..., None] * x[..., 1:] + b[..., None] * y[..., 1:]
    return lift(spatial)


def hyperbolic_frame(x: np.ndarray) -> np.ndarray:
    """Orthonormal tangent frame at hyperboloid points ``x``.

    Returns an array of shape ``x.shape[:-1] + (m, m + 1)``: the parallel
    transport of the coordinate basis from the vertex along the geodesic.
    """
    m = x.shape[-1] - 1
    xs = x[..., 1:]
    coef = xs / (1.0 + x[..., :1])
    frame = np.zeros(x.shape[:-1] + (m, m + 1))
    frame[..., :, 0] = coef
    frame[..., :, 1:] = np.eye(m) + coef[..., :, None] * xs[..., None, :]
    return frame


def hyperbolic_exp(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exponential map at ``x`` of the tangent vector with frame coordinates ``c``."""
    norm = np.linalg.norm(c, axis=-1, keepdims=True)
    xs = x[..., 1:]
    coef = np.sum(xs * c, axis=-1, keepdims=True) / (1.0 + x[..., :1])
    v_spatial = c + coef * xs
    with np.errstate(invalid="ignore", divide="ignore"):
        shc = np.where(norm > 1e-300, np.sinh(norm) / np.where(norm > 0, norm, 1.0), 1.0)
    return lift(np.cosh(norm) * xs + shc * v_spatial)


# ---------------------------------------------------------------------------
# validation


def validate(space: ModelSpace, p: np.ndarray, tol: float = POINT_TOL) -> None:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != space.ambient_dim:
        raise StructureError(
            f"point has {p.shape[-1]} ambient coordinates, space {space!r} needs {space.ambient_dim}"
        )
    if not np.all(np.isfinite(p)):
        raise GeometryError("point has non-finite coordinates")
    for f, s in zip(space.factors, space.slices()):
        if not f.hyperbolic:
            continue
        x = p[..., s]
        x0 = x[..., 0]
        if np.any(x0 < 1.0 - tol):
            raise GeometryError("hyperboloid point on the lower sheet")
        # relative check, the constraint is -1 up to rounding of x0^2
        err = np.abs(minkowski(x, x) + 1.0) / np.maximum(1.0, x0 * x0)
        if np.any(err > tol):
            raise GeometryError("point violates the hyperboloid constraint <x,x> = -1")


def normalize(space: ModelSpace, p: np.ndarray) -> np.ndarray:
    """Re-project hyperbolic parts onto the hyperboloid (x0 from the spatial part)."""
    p = np.array(p, dtype=float, copy=True)
    for f, s in zip(space.factors, space.slices()):
        if f.hyperbolic:
            xs = p[..., s][..., 1:]
            p[..., s.start] = np.sqrt(1.0 + np.sum(xs * xs, axis=-1))
    return p


# ---------------------------------------------------------------------------
# metric operations


def factor_dists(space: ModelSpace, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Per-factor distances, shape ``broadcast(p, q).shape[:-1] + (F,)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = []
    for f, s in zip(space.factors, space.slices()):
        if f.hyperbolic:
            out.append(_hyp_dist(p[..., s], q[..., s]))
        else:
            out.append(np.linalg.norm(p[..., s] - q[..., s], axis=-1))
    return np.stack(np.broadcast_arrays(*out), axis=-1)


def dist(space: ModelSpace, p: np.ndarray, q: np.ndarray, check: bool = True) -> np.ndarray | float:
    """Distance in the product metric (Euclidean combination of factor distances)."""
    if check:
        validate(space, p)
        validate(space, q)
    d = np.sqrt(np.sum(factor_dists(space, p, q) ** 2, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def dist_to_base(space: ModelSpace, p: np.ndarray) -> np.ndarray | float:
    return dist(space, space.basepoint, p, check=False)


def geodesic_point(space: ModelSpace, p: np.ndarray, q: np.ndarray, t, check: bool = True) -> np.ndarray:
    """Point at parameter ``t`` on the geodesic from ``p`` (t=0) to ``q`` (t=1).

    Product geodesics move every factor at the same parameter.  ``t``
    outside ``[0, 1]`` extrapolates along the same geodesic line.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if check:
        validate(space, p)
        validate(space, q)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(p.shape, q.shape, t.shape + (1,))
    out = np.empty(shape)
    for f, s in zip(space.factors, space.slices()):
        x, y = p[..., s], q[..., s]
        if f.hyperbolic:
            out[..., s] = _hyp_geodesic(x, y, t, _hyp_dist(x, y))
        else:
            out[..., s] = x + t[..., None] * (y - x)
    return out


def _hyp_ray(o: np.ndarray, x: np.ndarray, d: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Point at distance ``lam * d`` from ``o`` on the ray through ``x`` (d = d(o, x))."""
    if np.allclose(o[..., 1:], 0.0, atol=0):
        xs = x[..., 1:]
        n = np.linalg.norm(xs, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(n > 0, xs / np.where(n > 0, n, 1.0), 0.0)
        return lift(np.sinh(lam * d)[..., None] * u)
    return _hyp_geodesic(o, x, lam, d)


def radial_project(space: ModelSpace, p: np.ndarray, r: float | np.ndarray) -> np.ndarray:
    """Point at distance ``r`` from the basepoint on the ray through ``p``."""
    p = np.asarray(p, dtype=float)
    validate(space, p)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise GeometryError("projection radius must be positive")
    base = space.basepoint
    fd = factor_dists(space, base, p)
    total = np.sqrt(np.sum(fd * fd, axis=-1))
    if np.any(total < 1e-12):
        raise GeometryError("radial projection of the basepoint is undefined")
    lam = r / total
    out = np.empty(np.broadcast_shapes(p.shape, lam.shape + (1,)))
    for i, (f, s) in enumerate(zip(space.factors, space.slices())):
        o, x = base[s], p[..., s]
        if f.hyperbolic:
            out[..., s] = _hyp_ray(o, x, fd[..., i], lam)
        else:
            out[..., s] = o + lam[..., None] * (x - o)
    return out


def push_outside(space: ModelSpace, p: np.ndarray, radius: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """Radially project every point closer than ``radius`` out to that radius.

    Returns the new points and a boolean mask of moved rows.  Points at the
    basepoint itself are pushed along the first factor's axis.
    """
    p = np.array(p, dtype=float, copy=True)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), p.shape[:-1])
    d = dist_to_base(space, p)
    d = np.broadcast_to(d, p.shape[:-1])
    inside = d < radius
    if np.any(inside):
        idx = np.nonzero(inside)
        sub = p[idx]
        at_base = d[idx] < 1e-12
        if np.any(at_base):
            sub[at_base] = axis_point(space, 0, 1.0)
        p[idx] = radial_project(space, sub, radius[idx])
    return p, inside


# ---------------------------------------------------------------------------
# tangent frames and exponential maps (used by descent)


def tangent_exp(space: ModelSpace, p: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``exp_p(v)`` where ``v`` has coordinates ``c`` (length ``space.dim``) in
    the standard orthonormal frame at ``p``."""
    p = np.asarray(p, dtype=float)
    out = np.empty(np.broadcast_shapes(p.shape, c.shape[:-1] + (space.ambient_dim,)))
    k = 0
    for f, s in zip(space.factors, space.slices()):
        cf = c[..., k : k + f.dim]
        if f.hyperbolic:
            out[..., s] = hyperbolic_exp(p[..., s], cf)
        else:
            out[..., s] = p[..., s] + cf
        k += f.dim
    return out


def base_log(space: ModelSpace, p: np.ndarray) -> np.ndarray:
    """Inverse of ``tangent_exp`` at the basepoint (standard basepoint only)."""
    if not space.standard_basepoint:
        raise GeometryError("base_log needs the standard basepoint")
    p = np.asarray(p, dtype=float)
    out = []
    for f, s in zip(space.factors, space.slices()):
        x = p[..., s]
        if f.hyperbolic:
            xs = x[..., 1:]
            n = np.linalg.norm(xs, axis=-1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                out.append(np.where(n > 0, np.arcsinh(n) * xs / np.where(n > 0, n, 1.0), 0.0))
        else:
            out.append(x)
    return np.concatenate(out, axis=-1)


def axis_point(space: ModelSpace, factor: int, t: float, axis: int = 1) -> np.ndarray:
    """Basepoint with factor ``factor`` moved a signed distance ``t`` along a
    coordinate axis (hyperbolic: the geodesic through the vertex in the
    ``x_axis`` direction)."""
    p = np.array(space.basepoint, dtype=float)
    f = space.factors[factor]
    s = space.slices()[factor]
    if f.hyperbolic:
        if not space.standard_basepoint:
            raise GeometryError("axis points need the standard basepoint")
        part = np.zeros(f.dim + 1)
        part[0] = np.cosh(t)
        part[axis] = np.sinh(t)
    else:
        part = p[s].copy()
        part[axis - 1] += t
    p[s] = part
    return p


def flat_point(space: ModelSpace, coords: np.ndarray, axis: int = 1) -> np.ndarray:
    """Point of the flat spanned by one coordinate geodesic per factor.

    ``coords[..., i]`` is the signed arc-length parameter in factor ``i``.
    """
    coords = np.asarray(coords, dtype=float)
    if not space.standard_basepoint:
        raise GeometryError("flat points need the standard basepoint")
    out = np.broadcast_to(space.basepoint, coords.shape[:-1] + (space.ambient_dim,)).copy()
    for i, (f, s) in enumerate(zip(space.factors, space.slices())):
        c = coords[..., i]
        if f.hyperbolic:
            out[..., s.start] = np.cosh(c)
            out[..., s.start + axis] = np.sinh(c)
        else:
            out[..., s.start + axis - 1] = c
    return out


# ---------------------------------------------------------------------------
# horospherical coordinates


@dataclass(frozen=True)
class OrientedGeodesic:
    """Unit-speed geodesic ``g(t) = cosh t * origin + sinh t * direction``.

    ``origin`` is a hyperboloid point and ``direction`` a unit tangent
    vector at it (Minkowski-orthogonal to ``origin``).  The forward ideal
    endpoint is ``g(+inf)``.
    """

    origin: np.ndarray
    direction: np.ndarray

    @classmethod
    def axis(cls, m: int, axis: int = 1) -> "OrientedGeodesic":
        o = np.zeros(m + 1)
        o[0] = 1.0
        v = np.zeros(m + 1)
        v[axis] = 1.0
        return cls(o, v)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return lift(np.cosh(t) * self.origin[1:] + np.sinh(t) * self.direction[1:])

    def lorentz(self) -> np.ndarray:
        """Lorentz matrix taking the standard axis geodesic onto this one."""
        m = self.origin.shape[0] - 1
        eta = np.diag([-1.0] + [1.0] * m)
        cols = [np.asarray(self.origin, float), np.asarray(self.direction, float)]
        for e in np.eye(m + 1)[1:]:
            if len(cols) == m + 1:
                break
            v = e.copy()
            for c in cols:
                v = v - (c @ eta @ v) / (c @ eta @ c) * c
            n2 = v @ eta @ v
            if n2 > 1e-10:
                cols.append(v / np.sqrt(n2))
        if len(cols) != m + 1:
            raise GeometryError("could not complete a Lorentz frame")
        return np.stack(cols, axis=1)

    @property
    def is_standard(self) -> bool:
        m = self.origin.shape[0] - 1
        std = OrientedGeodesic.axis(m)
        return np.array_equal(self.origin, std.origin) and np.array_equal(self.direction, std.direction)


@dataclass(frozen=True)
class HoroCoords:
    """Horospherical coordinates ``(u, s)``: ``s`` is the height towards the
    forward endpoint (Busemann value ``-s``) and ``u`` the horospherical part."""

    u: np.ndarray
    s: np.ndarray
    geodesic: OrientedGeodesic


def _std_to_horo(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x0, x1, rest = x[..., 0], x[..., 1], x[..., 2:]
    # x0 - x1 without cancellation on the forward side
    big = 1.0 + np.sum(rest * rest, axis=-1)
    diff = np.where(x1 > 0, big / (x0 + x1), x0 - x1)
    s = -np.log(diff)
    u = rest / diff[..., None]
    return u, s


def _std_from_horo(u: np.ndarray, s: np.ndarray) -> np.ndarray:
    y = np.exp(s)
    uu = np.sum(u * u, axis=-1)
    # spatial part only; lift() restores x0
    x1 = 0.5 * (y + uu / y - 1.0 / y)
    rest = u / y[..., None]
    return lift(np.concatenate([x1[..., None], rest], axis=-1))


def to_horospherical(x: np.ndarray, g: OrientedGeodesic | None = None) -> HoroCoords:
    x = np.asarray(x, dtype=float)
    m = x.shape[-1] - 1
    g = g or OrientedGeodesic.axis(m)
    if not g.is_standard:
        L = g.lorentz()
        eta = np.diag([-1.0] + [1.0] * m)
        x = x @ (eta @ L.T @ eta).T
    u, s = _std_to_horo(x)
    return HoroCoords(u, s, g)


def from_horospherical(h: HoroCoords) -> np.ndarray:
    x = _std_from_horo(np.asarray(h.u, dtype=float), np.asarray(h.s, dtype=float))
    if not h.geodesic.is_standard:
        x = x @ h.geodesic.lorentz().T
        x = lift(x[..., 1:])
    return x


def busemann(x: np.ndarray, g: OrientedGeodesic | None = None) -> np.ndarray:
    """Busemann function of the forward endpoint of ``g`` (zero at ``g(0)``)."""
    return -to_horospherical(x, g).s


# ---------------------------------------------------------------------------
# sampling


def sphere_sample(space: ModelSpace, r: float, seed: int | np.random.Generator, count: int) -> np.ndarray:
    """``count`` points on ``S(r)``: uniform unit directions at the basepoint
    pushed out by the exponential map."""
    if r <= 0 or count <= 0:
        raise GeometryError("need r > 0 and count > 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    c = rng.standard_normal((count, space.dim))
    c *= r / np.linalg.norm(c, axis=1, keepdims=True)
    return tangent_exp(space, np.broadcast_to(space.basepoint, (count, space.ambient_dim)), c)


def random_isometry(space: ModelSpace, rng: np.random.Generator, scale: float = 1.0):
    """A random factor-wise isometry, returned as a function on ambient points."""
    maps = []
    for f in space.factors:
        if f.hyperbolic:
            m = f.dim
            q, _ = np.linalg.qr(rng.standard_normal((m, m)))
            rot = np.eye(m + 1)
            rot[1:, 1:] = q
            v = rng.standard_normal(m)
            v *= scale * rng.random() / max(np.linalg.norm(v), 1e-300)
            target = lift(np.sinh(np.linalg.norm(v)) * v / max(np.linalg.norm(v), 1e-300))
            boost = _boost_to(target)
            maps.append(boost @ rot)
        else:
            q, _ = np.linalg.qr(rng.standard_normal((f.dim, f.dim)))
            shift = scale * rng.standard_normal(f.dim)
            maps.append((q, shift))

    def apply(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.empty_like(p)
        for f, s, mp in zip(space.factors, space.slices(), maps):
            if f.hyperbolic:
                out[..., s] = lift((p[..., s] @ mp.T)[..., 1:])
            else:
                q, shift = mp
                out[..., s] = p[..., s] @ q.T + shift
        return out

    return apply


def _boost_to(target: np.ndarray) -> np.ndarray:
    """Lorentz boost taking the vertex to ``target``."""
    m = target.shape[0] - 1
    x0, xs = target[0], target[1:]
    B = np.eye(m + 1)
    B[0, 0] = x0
    B[0, 1:] = xs
    B[1:, 0] = xs
    B[1:, 1:] = np.eye(m) + np.outer(xs, xs) / (1.0 + x0)
    return B


def pairwise_distances(space: ModelSpace, pts: Iterable[np.ndarray]) -> np.ndarray:
    pts = np.asarray(list(pts) if not isinstance(pts, np.ndarray) else pts, dtype=float)
    return dist(space, pts[:, None, :], pts[None, :, :], check=False)
