import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from divkit.constructions import (
    LeafParam,
    QIMap,
    VerificationReport,
    antipodal_pair,
    embed_Y_point,
    embed_Z_point,
    equator_index,
    flat_sphere,
    flat_sphere_volume,
    identity_map,
    leaf_coordinate,
    leaf_coordinates,
    meridian_lengths,
    nonconvexity_gap,
    nonconvexity_split,
    perturb_loop,
    polyline_length,
    pulloff_filling,
    pulloff_report,
    round_sphere,
    straighten_map,
    straighten_report,
    suspend,
    tilted_flat_circle,
    transport_report,
    transport_sphere,
    y_intrinsic_dist,
    y_path,
    y_sphere_half_length,
)
from divkit.geometry import GeometryError, ModelSpace, StructureError, dist, dist_to_base, random_isometry
from divkit.simplicial import check_admissible, k_volume, triangulate_ball

H2 = ModelSpace.hyperbolic(2)
H2R = H2.times(ModelSpace.euclidean(1))
H2R2 = H2.times(ModelSpace.euclidean(2))
H22 = ModelSpace.hyperbolic(2, 2)
H222 = ModelSpace.hyperbolic(2, 2, 2)


# -- reports and small types


def test_verification_report_round_trip():
    rep = VerificationReport("x", 1.0, 2.0)
    assert rep.passed
    back = VerificationReport.from_json(rep.to_json())
    assert back.recheck() and back.to_json() == rep.to_json()
    assert not VerificationReport("y", 3.0, 2.0).passed
    assert VerificationReport("z", 3.0, 2.0, ">=").passed
    assert not VerificationReport("n", math.nan, 1.0).passed
    with pytest.raises(StructureError):
        VerificationReport("w", 1.0, 1.0, "<")


def test_leaf_param_sums_to_zero():
    assert np.array_equal(LeafParam.from_pair(0.5).s, [0.5, -0.5])
    with pytest.raises(GeometryError):
        LeafParam(np.array([1.0, 0.5]))


# -- spheres


def test_flat_sphere_volume_formula():
    assert flat_sphere_volume(2, 3.0) == pytest.approx(2 * math.pi * 3.0)
    assert flat_sphere_volume(3, 2.0) == pytest.approx(4 * math.pi * 4.0)


def test_flat_sphere_on_sphere():
    m = flat_sphere(H222, 2.0, 4)
    assert np.allclose(dist_to_base(H222, m.images), 2.0, atol=1e-9)
    assert k_volume(m) == pytest.approx(flat_sphere_volume(3, 2.0), rel=0.02)
    with pytest.raises(StructureError):
        flat_sphere(H2R, 1.0, 2)


def test_antipodal_pair():
    m = antipodal_pair(H2, 2.0)
    assert dist(H2, m.images[0], m.images[1]) == pytest.approx(4.0)


def test_tilted_flat_circle_is_admissible():
    g = tilted_flat_circle(H2R2, 3.0, 5)
    assert np.allclose(dist_to_base(H2R2, g.images), 3.0, atol=1e-9)
    assert k_volume(g) == pytest.approx(2 * math.pi * 3.0, rel=1e-3)
    assert np.min(np.linalg.norm(g.images[:, 3:], axis=1)) >= 3.0 * math.sin(math.pi / 4) - 1e-12


# -- suspension


@pytest.mark.parametrize("r", [1.0, 2.0, 3.0])
def test_suspension_properties(r):
    f = round_sphere(H2, 1, r, 4)
    s = suspend(H2R, f, r, 16)
    assert np.max(np.abs(dist_to_base(H2R, s.images) - r)) < 1e-6
    eq = s.images[equator_index(f.domain.n_vertices, 16), :3]
    assert np.array_equal(eq, f.images) or np.max(np.abs(eq - f.images)) < 1e-12
    mer = meridian_lengths(s, f.domain.n_vertices)
    assert np.all(np.abs(mer / (math.pi * r) - 1) < 0.01)
    assert s.domain.is_closed() and s.domain.euler_characteristic() == 2


def test_suspension_rejects_bad_input():
    with pytest.raises(StructureError):
        suspend(H22, round_sphere(H2, 1, 1.0, 2), 1.0)
    with pytest.raises(GeometryError):
        suspend(H2R, round_sphere(H2, 1, 1.0, 2), 2.0)
    with pytest.raises(StructureError):
        suspend(H2R, round_sphere(H2, 1, 1.0, 2), 1.0, levels=5)


# -- perturbing planar loops


def _loop(rng, centre, rad, n=6):
    th = np.sort(rng.uniform(0, 2 * math.pi, n))
    pts = centre + rad * np.stack([np.cos(th), np.sin(th)], 1)
    return np.vstack([pts, pts[:1]])


@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["outside", "inside", "mixed"]))
def test_perturb_loop_bounds(seed, kind):
    rng = np.random.default_rng(seed)
    if kind == "outside":
        beta = _loop(rng, np.array([4.0, 0.0]), 1.0)
    elif kind == "inside":
        beta = _loop(rng, np.zeros(2), 0.5)
    else:
        beta = _loop(rng, np.array([0.8, 0.0]), 1.2)
    L = polyline_length(beta)
    loop, hom = perturb_loop(beta, L, 1.0)
    assert loop.min_norm() >= 1 - 1e-9
    assert loop.length() <= math.pi * L + 1e-6
    assert k_volume(hom) <= 2 * math.pi * L + 1e-9
    if kind == "mixed" and np.min(np.linalg.norm(beta, axis=1)) < 1:
        assert loop.case in ("mixed", "inside")


def test_perturb_loop_cases_and_errors():
    square = np.array([[3.0, 0], [0, 3], [-3, 0], [0, -3], [3, 0]])
    loop, hom = perturb_loop(square, 20, 1.0)
    assert loop.case == "outside" and k_volume(hom) == 0.0
    tiny = 0.1 * square
    loop, _ = perturb_loop(tiny, 20, 1.0)
    assert loop.case == "inside"
    assert loop.min_norm() >= 1.0 - 1e-12
    through = np.array([[2.0, 0], [-2, 0.0], [2.0, 0]])
    loop, _ = perturb_loop(through, 20, 1.0)
    assert loop.case == "mixed"
    # both passes through the disc are replaced by half circles
    assert loop.length() == pytest.approx(4.0 + 2 * math.pi, rel=1e-9)
    with pytest.raises(GeometryError):
        perturb_loop(square, 1.0, 1.0)
    with pytest.raises(StructureError):
        perturb_loop(np.array([[1.0, 0], [2, 0], [3, 1]]), 20, 1.0)


def test_loop_json():
    loop, _ = perturb_loop(np.array([[2.0, 0], [-2, 0.0], [2.0, 0]]), 20, 1.0)
    obj = loop.to_json()
    assert obj["case"] == "mixed" and {s["kind"] for s in obj["segments"]} == {"line", "arc"}


# -- pulloff fillings


@pytest.mark.parametrize("r", [2.0, 4.0, 8.0])
def test_pulloff_filling_bounds(r):
    A = 7.0
    g = tilted_flat_circle(H2R2, r, 5)
    fl = pulloff_filling(H2R2, g, A, r)
    reps = pulloff_report(fl, A, r)
    assert all(rep.passed for rep in reps)
    assert np.array_equal(fl.images[fl.domain.boundary_vertices], g.images[np.arange(g.domain.n_vertices)])


def test_pulloff_rejects_loops_through_the_axis():
    g = flat_sphere(H2.times(ModelSpace.hyperbolic(2)), 2.0, 3)
    with pytest.raises(StructureError):
        pulloff_filling(H22, g, 7.0, 2.0)


# -- horosphere products and leaves


def test_embed_Y_and_leaf_coordinates_round_trip(rng):
    for _ in range(20):
        s = LeafParam.from_pair(rng.uniform(-2, 2))
        t, u = rng.uniform(-3, 3), rng.normal(0, 2, 2)
        p = embed_Y_point(H22, t, u, s)
        t2, u2, s2 = leaf_coordinates(H22, p)
        assert t2 == pytest.approx(t, abs=1e-9)
        assert np.allclose(u2, u, atol=1e-9)
        assert np.allclose(s2, s.s, atol=1e-9)
        assert np.allclose(leaf_coordinate(H22, p).s, s.s, atol=1e-9)


def test_leaf_metric_matches_intrinsic_formula():
    # tiny horizontal and vertical moves inside a leaf
    k = 2
    p = embed_Y_point(H22, 0.7, np.array([0.3, -0.2]))
    q = embed_Y_point(H22, 0.7, np.array([0.3 + 1e-6, -0.2]))
    assert dist(H22, p, q) == pytest.approx(1e-6 * math.exp(-0.7 / math.sqrt(k)), rel=1e-4)
    q = embed_Y_point(H22, 0.7 + 1e-6, np.array([0.3, -0.2]))
    assert dist(H22, p, q) == pytest.approx(1e-6, rel=1e-4)
    assert y_intrinsic_dist((0.7, [0.3, -0.2]), (0.7, [0.3 + 1e-6, -0.2]), k) == pytest.approx(
        1e-6 * math.exp(-0.7 / math.sqrt(k)), rel=1e-4
    )


def test_leaf_geodesic_along_diagonal():
    # the t axis of a leaf is the diagonal geodesic: ambient and leaf distances agree
    p = embed_Y_point(H22, -2.0, np.zeros(2))
    q = embed_Y_point(H22, 3.0, np.zeros(2))
    assert dist(H22, p, q) == pytest.approx(5.0, abs=1e-9)
    assert y_intrinsic_dist((-2.0, [0, 0]), (3.0, [0, 0]), 2) == pytest.approx(5.0, abs=1e-9)


def test_embed_Z_point_levels():
    p = embed_Z_point(H22, 1.4, np.zeros(1), np.zeros(1))
    assert dist_to_base(H22, p) == pytest.approx(1.4, abs=1e-9)
    with pytest.raises(StructureError):
        embed_Z_point(H22, 0.0, np.zeros(2), np.zeros(1))


@given(seed=st.integers(0, 2**31))
def test_y_path_sandwich(seed):
    rng = np.random.default_rng(seed)
    k = 2
    s = LeafParam.from_pair(rng.uniform(-2, 2))
    a = embed_Y_point(H22, rng.uniform(-4, 4), rng.normal(0, 3, 2), s)
    b = embed_Y_point(H22, rng.uniform(-4, 4), rng.normal(0, 3, 2), s)
    path, length = y_path(H22, a, b)
    d = dist(H22, a, b)
    c = 2 * math.sqrt(k)
    assert d <= length + 1e-9
    assert length <= c * d + c + 1e-6
    assert np.sum(dist(H22, path[:-1], path[1:])) <= length + 1e-6


def test_y_path_rejects_different_leaves():
    a = embed_Y_point(H22, 0.0, np.zeros(2), LeafParam.from_pair(0.0))
    b = embed_Y_point(H22, 0.0, np.zeros(2), LeafParam.from_pair(1.0))
    with pytest.raises(GeometryError):
        y_path(H22, a, b)


@given(seed=st.integers(0, 2**31), k=st.sampled_from([2, 3]))
def test_leaf_separation_bound(seed, k):
    space = ModelSpace.hyperbolic(*([2] * k))
    rng = np.random.default_rng(seed)
    s1, s2 = rng.uniform(-3, 3, (2, k))
    s1 -= s1.mean()
    s2 -= s2.mean()
    a = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, k), s1)
    b = embed_Y_point(space, rng.uniform(-4, 4), rng.normal(0, 3, k), s2)
    assert dist(space, a, b) >= np.linalg.norm(s1 - s2) - 1e-9


def test_leaf_separation_equality_for_pure_translation():
    s1, s2 = np.array([0.4, -0.4]), np.array([-0.7, 0.7])
    a = embed_Y_point(H22, 0.0, np.zeros(2), s1)
    b = embed_Y_point(H22, 0.0, np.zeros(2), s2)
    assert dist(H22, a, b) == pytest.approx(np.linalg.norm(s1 - s2), abs=1e-6)


def test_nonconvexity():
    assert nonconvexity_gap(15.0, 2) == 15.0 / math.sqrt(2)
    assert nonconvexity_gap(15.0, 2) > 10
    l1, l2 = nonconvexity_split(6.0, 3)
    assert l1 + l2 == pytest.approx(6.0)
    assert math.hypot(math.sqrt(2) * l1, l2) == pytest.approx(nonconvexity_gap(6.0, 3))
    with pytest.raises(GeometryError):
        nonconvexity_gap(1.0, 1)


def test_y_sphere_half_length():
    assert y_sphere_half_length(1.0, 1) == pytest.approx(math.pi * math.sinh(1.0))
    assert y_sphere_half_length(2.0, 2) == pytest.approx(math.pi * math.sqrt(2) * math.sinh(2 / math.sqrt(2)))


# -- transport and straightening


def test_transport_by_isometries_preserves_admissibility(rng):
    f = flat_sphere(H22, 2.0, 4)
    base = check_admissible(f, 2.0, 1.0, 10.0, "sphere")
    rot = QIMap(random_isometry(H22, rng, 0.0), 1.0, 0.0, 0.0, H22, H22)
    for F in (identity_map(H22), rot):
        g = transport_sphere(F, f, 2.0)
        rep = check_admissible(g, 2.0, 1.0, 10.0, "sphere")
        assert rep.sphere_admissible == base.sphere_admissible
        assert rep.volume == pytest.approx(base.volume, abs=1e-6)
        assert transport_report(F, f, 2.0, 10.0).passed


def test_transport_by_scaling_map():
    # a 2-lipschitz radial map of R^2 transported back onto S(r / K)
    R2 = ModelSpace.euclidean(2)
    F = QIMap(lambda p: 2.0 * p, 2.0, 0.0, 0.0, R2, R2)
    f = round_sphere(R2, 1, 4.0, 5)
    g = transport_sphere(F, f, 4.0)
    assert np.allclose(dist_to_base(R2, g.images), 2.0)
    assert F.spot_check(f.images, f.images[::-1]) <= 1e-12


def test_straighten_isometry_is_exact(rng):
    ball = triangulate_ball(4, depth=1, layers=2)
    from divkit.geometry import tangent_exp

    net = tangent_exp(H22, np.broadcast_to(H22.basepoint, (ball.n_vertices, 6)), ball.vertices)
    F = QIMap(random_isometry(H22, rng, 1.0), 1.0, 0.0, 0.0, H22, H22)
    reps = straighten_report(F, ball, net)
    assert all(r.passed for r in reps)
    assert reps[1].measured < 1e-9
    m = straighten_map(F, ball, net)
    assert m.domain is ball
    with pytest.raises(StructureError):
        straighten_map(F, ball, net[:-1])
