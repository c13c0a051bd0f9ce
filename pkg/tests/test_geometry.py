import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SPACES, random_points
from divkit.geometry import (
    GeometryError,
    ModelSpace,
    OrientedGeodesic,
    StructureError,
    axis_point,
    base_log,
    busemann,
    dist,
    dist_to_base,
    factor_dists,
    flat_point,
    from_horospherical,
    geodesic_point,
    lift,
    minkowski,
    pairwise_distances,
    push_outside,
    radial_project,
    random_isometry,
    sphere_sample,
    tangent_exp,
    to_horospherical,
    validate,
)

H2 = ModelSpace.hyperbolic(2)

# frozen closed-form values
# d((cosh 1, sinh 1, 0), (cosh 2, 0, sinh 2)) via cosh d = cosh 1 cosh 2
D_RIGHT_ANGLE = math.acosh(math.cosh(1.0) * math.cosh(2.0))


def test_right_angle_oracle():
    p = axis_point(H2, 0, 1.0, 1)
    q = axis_point(H2, 0, 2.0, 2)
    assert dist(H2, p, q) == pytest.approx(D_RIGHT_ANGLE, abs=1e-12)
    assert D_RIGHT_ANGLE == pytest.approx(2.4444289498610536, abs=1e-12)


def test_stable_distance_matches_arccosh_at_moderate_range(rng):
    P = random_points(H2, rng, 200, 1.5)
    Q = random_points(H2, rng, 200, 1.5)
    naive = np.arccosh(np.maximum(1.0, -minkowski(P, Q)))
    assert np.allclose(dist(H2, P, Q), naive, atol=1e-7)


def test_tiny_distances_are_accurate():
    p = axis_point(H2, 0, 3.0)
    q = axis_point(H2, 0, 3.0 + 1e-10)
    assert dist(H2, p, q) == pytest.approx(1e-10, rel=1e-5)


def test_product_distance_is_euclidean_combination(rng):
    sp = SPACES["H2xH2"]
    P = random_points(sp, rng, 50)
    Q = random_points(sp, rng, 50)
    fd = factor_dists(sp, P, Q)
    assert np.allclose(dist(sp, P, Q), np.hypot(fd[:, 0], fd[:, 1]), atol=1e-12)


def test_far_points_keep_finite_distances():
    sp = SPACES["H2xR"]
    p = axis_point(sp, 0, 40.0)
    q = axis_point(sp, 0, -40.0)
    assert dist(sp, p, q) == pytest.approx(80.0, rel=1e-9)


def test_validate_rejects_bad_points():
    with pytest.raises(GeometryError):
        validate(H2, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(GeometryError):
        validate(H2, np.array([-1.0, 0.0, 0.0]))
    with pytest.raises(StructureError):
        validate(H2, np.zeros(2))
    with pytest.raises(GeometryError):
        validate(H2, np.array([np.nan, 0.0, 0.0]))


def test_sphere_sample_is_on_sphere(space):
    P = sphere_sample(space, 2.5, 3, 100)
    assert np.allclose(dist_to_base(space, P), 2.5, atol=1e-9)
    with pytest.raises(GeometryError):
        sphere_sample(space, -1.0, 0, 5)


def test_sphere_sample_is_seeded(space):
    assert np.array_equal(sphere_sample(space, 1.0, 7, 10), sphere_sample(space, 1.0, 7, 10))


def test_metric_axioms_on_triples(space):
    rng = np.random.default_rng(1)
    n = 10_000
    P, Q, R = (random_points(space, rng, n, 3.0) for _ in range(3))
    dpq, dqp = dist(space, P, Q), dist(space, Q, P)
    assert np.array_equal(dpq, dqp)
    assert np.all(dpq <= dist(space, P, R) + dist(space, R, Q) + 1e-9)
    assert np.all(dist(space, P, P) < 1e-7)


def test_geodesic_points_stay_on_hyperboloid(space, rng):
    P = random_points(space, rng, 500, 4.0)
    Q = random_points(space, rng, 500, 4.0)
    G = geodesic_point(space, P, Q, rng.uniform(-0.5, 1.5, 500))
    for f, s in zip(space.factors, space.slices()):
        if f.hyperbolic:
            x = G[:, s]
            assert np.all(np.abs(minkowski(x, x) + 1.0) / x[:, 0] ** 2 < 1e-9)


def test_geodesic_endpoints(space, rng):
    P = random_points(space, rng, 20)
    Q = random_points(space, rng, 20)
    assert np.allclose(geodesic_point(space, P, Q, 0.0), P, atol=1e-9)
    assert np.allclose(geodesic_point(space, P, Q, 1.0), Q, atol=1e-9)


@given(
    name=st.sampled_from(sorted(SPACES)),
    seed=st.integers(0, 2**31),
    s=st.floats(-1.0, 2.0),
    t=st.floats(-1.0, 2.0),
)
def test_geodesic_additivity(name, seed, s, t):
    space = SPACES[name]
    rng = np.random.default_rng(seed)
    p, q = random_points(space, rng, 2, 2.0)
    d = dist(space, p, q)
    a = geodesic_point(space, p, q, s)
    b = geodesic_point(space, p, q, t)
    assert dist(space, a, b) == pytest.approx(abs(s - t) * d, abs=1e-9 * max(1.0, d))


@given(name=st.sampled_from(sorted(SPACES)), seed=st.integers(0, 2**31), r=st.floats(0.1, 6.0))
def test_radial_project_fixes_sphere(name, seed, r):
    space = SPACES[name]
    P = sphere_sample(space, r, seed, 5)
    assert np.allclose(radial_project(space, P, r), P, atol=1e-9 * math.cosh(r))


@given(name=st.sampled_from(sorted(SPACES)), seed=st.integers(0, 2**31), r=st.floats(0.1, 5.0))
def test_radial_project_is_1_lipschitz_outside_ball(name, seed, r):
    space = SPACES[name]
    rng = np.random.default_rng(seed)
    P = radial_project(space, sphere_sample(space, r, rng, 50), r * rng.uniform(1.0, 3.0, 50))
    Q = radial_project(space, sphere_sample(space, r, rng, 50), r * rng.uniform(1.0, 3.0, 50))
    before = dist(space, P, Q)
    after = dist(space, radial_project(space, P, r), radial_project(space, Q, r))
    assert np.all(after <= before + 1e-9)


def test_radial_project_rejects_basepoint(space):
    with pytest.raises(GeometryError):
        radial_project(space, space.basepoint, 1.0)


def test_push_outside_moves_only_inside_points(space, rng):
    P = random_points(space, rng, 100, 2.0)
    d = dist_to_base(space, P)
    Q, moved = push_outside(space, P, 1.5)
    assert np.array_equal(moved, d < 1.5)
    assert np.array_equal(Q[~moved], P[~moved])
    assert np.all(dist_to_base(space, Q) >= 1.5 - 1e-9)


@given(seed=st.integers(0, 2**31), m=st.integers(2, 4))
def test_horospherical_round_trip(seed, m):
    rng = np.random.default_rng(seed)
    sp = ModelSpace.hyperbolic(m)
    x = random_points(sp, rng, 20, 3.0)
    g = OrientedGeodesic.axis(m)
    assert np.max(np.abs(from_horospherical(to_horospherical(x, g)) - x)) < 1e-9 * np.max(x[:, 0])


def test_horospherical_round_trip_other_geodesic(rng):
    sp = ModelSpace.hyperbolic(3)
    iso = random_isometry(sp, rng, 1.0)
    o = iso(sp.basepoint)
    v = iso(axis_point(sp, 0, 1e-3)) - o
    v = v / math.sqrt(minkowski(v, v))
    v = v + minkowski(v, o) * o
    v = v / math.sqrt(minkowski(v, v))
    g = OrientedGeodesic(o, v)
    x = random_points(sp, rng, 30, 2.0)
    assert np.max(np.abs(from_horospherical(to_horospherical(x, g)) - x)) < 1e-9 * np.max(x[:, 0])


def test_busemann_along_axis_and_metric():
    g = OrientedGeodesic.axis(2)
    t = np.linspace(-3, 3, 7)
    assert np.allclose(busemann(g(t), g), -t, atol=1e-12)
    # horospherical metric: ds^2 = dh^2 + e^{-2h} |du|^2 on a horosphere
    h = to_horospherical(g(1.0), g)
    from divkit.geometry import HoroCoords

    p = from_horospherical(HoroCoords(np.array([0.0]), np.array(1.0), g))
    q = from_horospherical(HoroCoords(np.array([1e-6]), np.array(1.0), g))
    assert dist(H2, p, q) == pytest.approx(1e-6 * math.exp(-1.0), rel=1e-5)
    assert float(h.s) == pytest.approx(1.0)


def test_tangent_exp_and_base_log_are_inverse(space, rng):
    c = rng.normal(0, 2, (50, space.dim))
    p = tangent_exp(space, np.broadcast_to(space.basepoint, (50, space.ambient_dim)), c)
    assert np.allclose(base_log(space, p), c, atol=1e-9)
    assert np.allclose(dist_to_base(space, p), np.linalg.norm(c, axis=1), atol=1e-9)


def test_random_isometry_preserves_distances(space, rng):
    f = random_isometry(space, rng, 2.0)
    P = random_points(space, rng, 100)
    Q = random_points(space, rng, 100)
    assert np.allclose(dist(space, f(P), f(Q)), dist(space, P, Q), atol=1e-8)


def test_flat_point_is_isometric_embedding(rng):
    sp = SPACES["H2xH2"]
    a, b = rng.normal(0, 3, (2, 40, 2))
    assert np.allclose(dist(sp, flat_point(sp, a), flat_point(sp, b)), np.linalg.norm(a - b, axis=1), atol=1e-9)


def test_pairwise_distances_symmetric(space, rng):
    D = pairwise_distances(space, list(random_points(space, rng, 6)))
    assert np.array_equal(D, D.T)
    assert np.all(np.diag(D) < 1e-7)


def test_lift_and_space_json():
    x = lift(np.array([0.3, -0.4]))
    assert x[0] == pytest.approx(math.sqrt(1.25))
    sp = SPACES["H2xR2"]
    assert ModelSpace.from_json(sp.to_json()) == sp
    with pytest.raises(StructureError):
        ModelSpace(())
