"""Invariant-subspace detection: commutant criterion, scans, surveys."""

import math

import numpy as np
import pytest

from riemlab.exceptional import (
    OperatorFamily,
    brute_force_common_invariant,
    direction_grid,
    exceptional_at,
    irreducibility_margin,
    random_curvature_jet,
    random_jet_survey,
    restrict_to_orthogonal,
    scan_directions,
    scan_geodesic,
    symmetric_commutant_dim,
)
from riemlab.geodesics import shoot_geodesic
from riemlab.jets import normal_jet_from_curvature, prescribe_jacobi_operators
from riemlab.metrics import metric_from_jet

TAU_MARGIN = 1e-7


def test_restrict_examples():
    A = np.zeros((3, 3))
    B, Q = restrict_to_orthogonal([A], [1.0, 0, 0])
    assert np.allclose(B[0], 0)
    A2 = np.zeros((3, 3))
    A2[1, 1] = 1.0
    B, Q = restrict_to_orthogonal([A2], [1.0, 0, 0])
    assert np.allclose(sorted(np.linalg.eigvalsh(B[0])), [0.0, 1.0])
    # constant curvature: A = K P_perp restricts to K I
    x = np.array([0.0, 0.0, 2.0])
    K = 1.5
    A3 = K * ((x @ x) * np.eye(3) - np.outer(x, x)) / (x @ x)
    B, Q = restrict_to_orthogonal([A3], x)
    assert np.allclose(B[0], K * np.eye(2), atol=1e-12)


def test_commutant_dims_small():
    assert symmetric_commutant_dim([np.eye(2)])[0] == 3
    assert symmetric_commutant_dim([np.diag([1.0, 2.0])])[0] == 2
    off = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert symmetric_commutant_dim([np.diag([1.0, 2.0]), off])[0] == 1


def test_commutant_brute_force_small():
    # the dimension-3 solve against an explicit 3-unknown linear system
    B1 = np.diag([1.0, 2.0])
    B2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    # unknown symmetric C = [[a, b], [b, c]] with [C, B] = 0 for both
    rows = []
    for B in (B1, B2):
        # commutator entries as linear forms in (a, b, c)
        for (i, j) in ((0, 1),):
            row = np.zeros(3)
            # (CB - BC)[0,1] = a B[0,1] + b B[1,1] - B[0,0] b - B[0,1] c
            row[0] = B[0, 1]
            row[1] = B[1, 1] - B[0, 0]
            row[2] = -B[0, 1]
            rows.append(row)
    null = np.linalg.svd(np.array(rows))[2][-1]
    # brute solve says only multiples of the identity commute
    assert abs(null[1]) < 1e-12 and abs(null[0] - null[2]) < 1e-12
    assert symmetric_commutant_dim([B1, B2])[0] == 1


def test_margin_examples():
    smin, smax = irreducibility_margin([np.eye(2)])
    assert smin == 0.0
    off = np.array([[0.0, 1.0], [1.0, 0.0]])
    smin, smax = irreducibility_margin([np.diag([1.0, 2.0]), off])
    assert smin > 0.1
    K = 2.0
    smin, _ = irreducibility_margin([K * np.eye(2), np.zeros((2, 2))])
    assert smin == 0.0


def _random_family(rng, n, count=2):
    out = []
    for _ in range(count):
        S = rng.standard_normal((n, n))
        out.append(0.5 * (S + S.T))
    return out


def _reducible_family(rng, n, dsplit, count=2):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    out = []
    for _ in range(count):
        C = rng.standard_normal((dsplit, dsplit))
        D = rng.standard_normal((n - dsplit, n - dsplit))
        B = np.zeros((n, n))
        B[:dsplit, :dsplit] = 0.5 * (C + C.T)
        B[dsplit:, dsplit:] = 0.5 * (D + D.T)
        out.append(Q @ B @ Q.T)
    return out


@pytest.mark.parametrize("n", [2, 3])
def test_criterion_matches_brute_force(n):
    """Commutant verdict against the independent common-eigenvector search
    on 1000 random families (half generic, half constructed reducible)."""
    rng = np.random.default_rng(42 + n)
    disagreements = 0
    checked = 0
    for trial in range(1000):
        if trial % 2 == 0:
            fam = _random_family(rng, n, count=2 + trial % 2)
            # generic: margin clearly positive
        else:
            dsplit = 1 + (trial // 2) % max(n - 1, 1)
            fam = _reducible_family(rng, n, dsplit)
        dim, _ = symmetric_commutant_dim(fam)
        commutant_says = dim >= 2
        smin, smax = irreducibility_margin(fam)
        margin = smin / smax if smax > 0 else 0.0
        if TAU_MARGIN < margin < 10 * TAU_MARGIN:
            continue  # inconclusive band
        brute_says = brute_force_common_invariant(fam)
        checked += 1
        if commutant_says != brute_says:
            disagreements += 1
    assert checked > 900
    assert disagreements == 0


def test_scale_invariance_of_verdict():
    rng = np.random.default_rng(3)
    fam = _reducible_family(rng, 3, 1)
    for c in (1.0, 17.0, 1e-3):
        scaled = [c * B for B in fam]
        assert symmetric_commutant_dim(scaled)[0] >= 2
        smin, smax = irreducibility_margin(scaled)
        assert (smin / max(smax, 1e-300)) <= TAU_MARGIN


def test_euclidean_always_exceptional(euclid3):
    rng = np.random.default_rng(0)
    for _ in range(3):
        rep = exceptional_at(euclid3, rng.uniform(-0.5, 0.5, 3),
                             rng.standard_normal(3), 5)
        assert rep.verdict == "exceptional"
        assert rep.witness is not None
        # witness soundness: x in V, 1 < dim V < m
        assert 1 < rep.witness_dim < 3 or rep.witness_dim == 2


def test_sphere_exceptional_with_witness(sphere3_normal):
    rep = exceptional_at(sphere3_normal, [0.2, 0.1, -0.15],
                         [0.3, 0.9, 0.1], 4)
    assert rep.verdict == "exceptional"
    assert rep.commutant_dim >= 2
    V = rep.witness
    x = rep.direction_frame / np.linalg.norm(rep.direction_frame)
    # the direction lies in the witness span (frame coordinates)
    xf = V @ (V.T @ x)
    assert np.linalg.norm(xf - x) < 1e-6


def test_prescribed_family_not_exceptional():
    x = [1, 0, 0]
    A2 = np.diag([0.0, 1.0, 2.0])
    A3 = np.zeros((3, 3))
    A3[1, 2] = A3[2, 1] = 1.0
    jet = prescribe_jacobi_operators(x, [A2, A3])
    M = metric_from_jet(jet)
    rep = exceptional_at(M, [0, 0, 0], x, 3)
    assert rep.verdict == "not-exceptional"
    assert rep.margin > 10 * TAU_MARGIN
    # brute force agrees on the restricted family
    Bs, _ = restrict_to_orthogonal([A2, A3], x)
    assert not brute_force_common_invariant(Bs)


def test_m2_has_no_exceptional_subspaces(euclid2):
    rep = exceptional_at(euclid2, [0.0, 0.0], [1.0, 0.0], 3)
    assert rep.verdict == "not-exceptional"


def test_direction_grids():
    assert len(direction_grid(2, 16)) == 16
    d3 = direction_grid(3, 64)
    assert len(d3) >= 64
    assert np.allclose(np.linalg.norm(d3, axis=1), 1.0)
    d4 = direction_grid(4, 64)
    assert len(d4) >= 64
    assert np.allclose(np.linalg.norm(d4, axis=1), 1.0)


def test_scan_directions_sphere_all_exceptional(sphere3_normal):
    scan = scan_directions(sphere3_normal, [0.1, 0.0, 0.2], 4, grid=42,
                           refine=False)
    assert scan.min_margin <= TAU_MARGIN
    assert len(scan.exceptional_directions) == len(scan.rows)


def test_scan_directions_prescribed_jet():
    x = [1, 0, 0]
    A2 = np.diag([0.0, 1.0, 2.0])
    A3 = np.zeros((3, 3))
    A3[1, 2] = A3[2, 1] = 1.0
    jet = prescribe_jacobi_operators(x, [A2, A3])
    M = metric_from_jet(jet)
    scan = scan_directions(M, [0, 0, 0], 3, grid=42, refine=False)
    # the margin at e1 matches the direct family computation
    row = min(scan.rows,
              key=lambda r: np.linalg.norm(r["direction"] - np.array(x, float)))
    rep = exceptional_at(M, [0, 0, 0], x, 3)
    assert abs(row["margin"] - rep.margin) < 1e-9


def test_scan_geodesic_flat_exceptional(euclid3):
    path = shoot_geodesic(euclid3, [0, 0, 0], [1, 0, 0], 1.0)
    scan = scan_geodesic(euclid3, path, 3)
    assert scan.verdict == "exceptional"
    assert len(scan.witnesses) >= 1


def test_scan_geodesic_product_witness(product_sl):
    path = shoot_geodesic(product_sl, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.2,
                          n=96)
    scan = scan_geodesic(product_sl, path, 3)
    assert scan.verdict == "exceptional"
    # some witness contains the line direction e3 (parallel, frame-constant)
    from riemlab.geodesics import JacobiSystem
    system = JacobiSystem(path)
    t0 = scan.sample_times[0]
    e3f = system.frame_components(t0, np.array([0.0, 0.0, 1.0]))
    e3f /= np.linalg.norm(e3f)
    found = False
    for V in scan.witnesses:
        proj = V @ (V.T @ e3f)
        if np.linalg.norm(proj - e3f) < 1e-6:
            found = True
    assert found


def test_scan_geodesic_perturbed_not_exceptional(perturbed_sphere3):
    rng = np.random.default_rng(8)
    count = 0
    for _ in range(3):
        p = rng.uniform(-0.2, 0.2, 3)
        v = rng.standard_normal(3)
        v /= np.linalg.norm(v)
        path = shoot_geodesic(perturbed_sphere3, p, v, 0.5, n=48)
        if path.truncated:
            continue
        scan = scan_geodesic(perturbed_sphere3, path, 3)
        assert scan.verdict == "not-exceptional"
        assert min(scan.margins) > TAU_MARGIN
        count += 1
    assert count >= 2


def test_survey_determinism_and_k2():
    r1 = random_jet_survey(3, 3, 4, seed=5, grid=42)
    r2 = random_jet_survey(3, 3, 4, seed=5, grid=42)
    assert [row.min_margin for row in r1.rows] == \
        [row.min_margin for row in r2.rows]
    # order 2 alone is always reducible
    assert all(row.min_margin_k2 <= TAU_MARGIN for row in r1.rows)


def test_survey_zero_jet_degenerate():
    # a zero curvature jet has margin 0 at every direction
    from riemlab.jets import CurvatureJet
    from riemlab.polynomials import TensorPoly
    zero = CurvatureJet(3, 3, (TensorPoly.zero(3, (3, 3)),
                               TensorPoly.zero(3, (3, 3))))
    M = metric_from_jet(normal_jet_from_curvature(zero))
    scan = scan_directions(M, [0, 0, 0], 3, grid=42, refine=False)
    assert scan.min_margin == 0.0
