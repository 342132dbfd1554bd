"""Bodies, tangent cones, hull iteration, and the audits."""

import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull, Delaunay, cKDTree

from riemlab.convex import (
    BodyError,
    BoundaryGeodesicError,
    catalog_body,
    classify_extreme,
    cloud_body,
    contains,
    hull_iterate,
    key_lemma_audit,
    strict_convexity_audit,
    sublevel_body,
    tangent_cone_sample,
)
from riemlab.geodesics import shoot_geodesic
from riemlab.metrics import catalog_metric


@pytest.fixture(scope="module")
def ball3(euclid3):
    return catalog_body(euclid3, "ball", {"radius": 1.0})


@pytest.fixture(scope="module")
def slab3(euclid3):
    return catalog_body(euclid3, "slab", {})


@pytest.fixture(scope="module")
def hemi(product_sl):
    return catalog_body(product_sl, "hemisphere-line", {})


def test_contains_trit(ball3):
    assert contains(ball3, [0, 0, 0]) == "inside"
    assert contains(ball3, [1.0, 0, 0]) == "boundary-band"
    assert contains(ball3, [1.5, 0, 0]) == "outside"


def test_convexity_spot_check_rejects_nonconvex(euclid2):
    # an annulus is not convex: chords cross the hole
    def f(P):
        P = np.asarray(P, dtype=float)
        r2 = np.sum(P * P, axis=-1)
        return (r2 - 1.0) * (0.25 - r2)

    with pytest.raises(BodyError):
        sublevel_body(euclid2, f, name="annulus", seed=4)


def test_cone_interior_full_rank(ball3):
    cone = tangent_cone_sample(ball3, [0.1, 0.0, 0.0])
    assert cone.rank == 3


def test_cone_slab_face(slab3):
    cone = tangent_cone_sample(slab3, [0.3, -0.2, 0.0], directions=64)
    assert cone.rank == 2
    # the estimated plane is horizontal
    assert np.max(np.abs(cone.linear_basis[2, :])) < 1e-4
    # half-space cone: roughly half of the probes are generators
    frac = np.mean(cone.generator_mask)
    assert 0.35 < frac < 0.65


def test_cone_ball_boundary_rank_zero(ball3):
    # strictly convex: tangent probes exit, so no full line stays in
    cone = tangent_cone_sample(ball3, [1.0, 0.0, 0.0], directions=64)
    assert cone.rank == 0
    # generators fill the inward half space only
    for v in cone.generators:
        assert v[0] < 1e-6


def test_cone_generator_recheck(slab3):
    cone = tangent_cone_sample(slab3, [0.0, 0.0, 0.0], directions=64)
    from riemlab.convex import _ladder_violation
    viol = _ladder_violation(slab3, np.zeros(3), cone.generators,
                             cone.t0 / 2)
    assert np.max(viol) <= slab3.delta_mem


def test_cone_rank_monotone_in_scale(hemi):
    p = np.array([1.0, 0.0, 0.0])
    ranks = []
    for t0 in (0.12, 0.06, 0.03):
        ranks.append(tangent_cone_sample(hemi, p, directions=64,
                                         t0=t0).rank)
    assert ranks[0] >= ranks[1] >= ranks[2]
    assert ranks[-1] == 2


def test_classify_extreme_slab_and_ball(slab3, ball3):
    verdict = classify_extreme(slab3, [0.3, -0.2, 0.0])
    assert not verdict.extreme
    assert abs(verdict.witness[2]) < 1e-6  # horizontal witness
    assert classify_extreme(ball3, [1.0, 0.0, 0.0]).extreme


def test_segment_cloud_body(euclid3):
    seg = cloud_body(euclid3, np.array([[0.0, 0, 0], [1.0, 0, 0]]),
                     closure_level=3, name="segment")
    mid = classify_extreme(seg, np.array([0.5, 0, 0]), t0=0.1)
    assert not mid.extreme
    end = classify_extreme(seg, np.array([1.0, 0, 0]), t0=0.1)
    assert end.extreme


def test_hull_single_point_fixed(euclid3):
    res = hull_iterate(euclid3, np.array([[0.2, 0.1, 0.0]]), rounds=3)
    assert res.gaps == [0.0, 0.0, 0.0]
    assert all(len(c) == 1 for c in res.clouds)


def test_hull_triangle_stabilizes(euclid2):
    tri = np.array([[0.0, 0.0], [0.6, 0.1], [0.2, 0.5]])
    h = euclid2.domain.scale / 200.0
    res = hull_iterate(euclid2, tri, rounds=4, density=300, net_h=h, seed=1)
    # Caratheodory in the plane: stable from round m+1 = 3 on
    assert res.gaps[2] <= 2 * h
    assert res.gaps[3] <= 2 * h
    # nested within net resolution: each round's cloud is close to the next
    for a, b in zip(res.clouds, res.clouds[1:]):
        tree = cKDTree(b)
        d, _ = tree.query(a)
        assert np.max(d) <= h


def test_hull_sphere_small_cloud(sphere2_stereo):
    pts = np.array([[0.05, 0.0], [0.25, 0.05], [0.1, 0.2]])
    h = sphere2_stereo.domain.scale / 200.0
    res = hull_iterate(sphere2_stereo, pts, rounds=4, density=300, net_h=h,
                       seed=2)
    assert res.gaps[2] <= 2 * h
    assert res.gaps[3] <= 2 * h


def hull_agreement_gap(points, cloud, h):
    """Two-sided gap between the classical hull of `points` and `cloud`."""
    hull = Delaunay(points[ConvexHull(points).vertices])
    inside = hull.find_simplex(cloud) >= 0
    # distance of outside cloud points to the hull (sampled on facets)
    bound = ConvexHull(points)
    verts = points[bound.vertices]
    dense = [verts]
    for simplex in bound.simplices:
        seg = points[simplex]
        w = np.linspace(0, 1, 40)[:, None]
        dense.append(seg[0] * (1 - w) + seg[1] * w)
    facet_pts = np.vstack(dense)
    tree_facets = cKDTree(facet_pts)
    out_gap = 0.0
    if np.any(~inside):
        d, _ = tree_facets.query(cloud[~inside])
        out_gap = float(np.max(d))
    # coverage: grid points of the hull within h of the cloud
    lo, hi = points.min(axis=0), points.max(axis=0)
    xs = np.arange(lo[0], hi[0] + h, h)
    ys = np.arange(lo[1], hi[1] + h, h)
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    grid = grid[hull.find_simplex(grid) >= 0]
    tree_cloud = cKDTree(cloud)
    d, _ = tree_cloud.query(grid)
    cover_gap = float(np.max(d)) if len(d) else 0.0
    return max(out_gap, cover_gap)


def test_hull_matches_classical_oracle(euclid2):
    rng = np.random.default_rng(10)
    h = euclid2.domain.scale / 200.0
    for _ in range(3):
        pts = rng.uniform(-0.5, 0.5, (4, 2))
        res = hull_iterate(euclid2, pts, rounds=3, density=400, net_h=h,
                           seed=3)
        gap = hull_agreement_gap(pts, res.clouds[-1], h)
        assert gap <= 2 * h


def test_key_lemma_slab(euclid3, slab3):
    geo = shoot_geodesic(euclid3, [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0)
    audit = key_lemma_audit(slab3, geo)
    assert audit.cone_rank == 2
    assert audit.parallelism_deviation <= 1e-6
    assert audit.parallelism_violation <= 1e-6
    assert audit.condition_b_residual <= 1e-6
    assert audit.condition_a_residual <= 1e-6


def test_key_lemma_hemisphere_line(product_sl, hemi):
    geo = shoot_geodesic(product_sl, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0,
                         n=96)
    audit = key_lemma_audit(hemi, geo)
    assert audit.cone_rank == 2
    assert audit.parallelism_deviation <= 1e-6
    assert audit.condition_b_residual <= 1e-6
    assert audit.condition_a_residual <= 1e-6


def test_key_lemma_hyperbolic_refusal(hyperbolic3):
    body = catalog_body(hyperbolic3, "geodesic-ball", {"radius": 0.6})
    cr = math.tanh(0.3)
    geo = shoot_geodesic(hyperbolic3, [cr, 0.0, 0.0], [0.0, 1.0, 0.0], 0.5)
    with pytest.raises(BoundaryGeodesicError):
        key_lemma_audit(body, geo)


def test_key_lemma_rejects_constant_geodesic(euclid3, slab3):
    geo = shoot_geodesic(euclid3, [0.0, 0.0, 0.5], [0.0, 0.0, 0.0], 1.0)
    with pytest.raises(BoundaryGeodesicError):
        key_lemma_audit(slab3, geo)


def test_strict_convexity_slab_flags_rank_two(slab3):
    rep = strict_convexity_audit(slab3, samples=8, seed=2)
    assert len(rep.non_extreme) == 8
    assert len(rep.flagged) == 8
    assert all(rank == 2 for _, rank in rep.flagged)


def test_strict_convexity_hyperbolic_ball(hyperbolic3):
    body = catalog_body(hyperbolic3, "geodesic-ball", {"radius": 0.6})
    rep = strict_convexity_audit(body, samples=6, seed=2)
    assert len(rep.non_extreme) == 0
    assert rep.extreme_count == 6


def test_strict_convexity_hemisphere_flags(hemi):
    rep = strict_convexity_audit(hemi, samples=10, seed=5)
    # equator points are non-extreme of rank 2; side caps are interior-free
    assert len(rep.flagged) >= 1
    assert all(rank == 2 for _, rank in rep.flagged)
