"""Exact jet calculus: forward map oracles, inverse round trips, prescription."""

import numpy as np
import pytest

from riemlab.polynomials import QQ, TensorPoly, _zeros, scalar_mul
from riemlab.jets import (
    CurvatureJet,
    MetricJet,
    check_normal,
    component_basis,
    curvature_jet,
    curvature_map_differential_rank,
    curvature_space_dim,
    jet_from_text,
    jet_to_text,
    normal_jet_from_curvature,
    normalize_jet,
    prescribe_jacobi_operators,
)
from riemlab.exceptional import random_curvature_jet


def sphere_normal_jet(m, k, K=QQ(1)):
    """Series jet of the constant-curvature normal-form metric.

    g = I - K*psi(K r^2) (r^2 I - p p^T) with
    psi(u) = 1/3 - 2u/45 + u^2/315 - 2u^3/14175 + O(u^4).
    """
    psis = [QQ(1, 3), QQ(-2, 45), QQ(1, 315), QQ(-2, 14175)]
    terms = {}
    for a in range(m):
        for c in range(m):
            e = [0] * m
            e[c] += 2
            mat = terms.setdefault(tuple(e), _zeros((m, m)))
            mat[a, a] = mat[a, a] + QQ(1)
    for a in range(m):
        for b in range(m):
            e = [0] * m
            e[a] += 1
            e[b] += 1
            mat = terms.setdefault(tuple(e), _zeros((m, m)))
            mat[a, b] = mat[a, b] - QQ(1)
    Q = TensorPoly(m, (m, m), terms)  # r^2 I - p p^T
    r2 = TensorPoly(m, (), {tuple(2 if j == c else 0 for j in range(m)):
                            np.array(QQ(1), dtype=object).reshape(())
                            for c in range(m)})
    comps = [TensorPoly.zero(m, (m, m)) for _ in range(k)]
    cur = Q
    power = QQ(1)
    deg = 2
    idx = 0
    while deg <= k and idx < len(psis):
        comps[deg - 1] = cur.scale(-psis[idx] * K * power)
        cur = scalar_mul(r2, cur)
        power *= K
        idx += 1
        deg += 2
    return MetricJet(m, k, tuple(comps)), Q


@pytest.mark.parametrize("m", [2, 3])
def test_sphere_jet_constant_curvature(m):
    # the whole exact pipeline against the classical normal form: the
    # curvature jet must be exactly K(r^2 I - pp^T)/2 with no higher terms
    jet, Q = sphere_normal_jet(m, 6)
    assert check_normal(jet)[0]
    cj = curvature_jet(jet)
    assert cj.component(2) == Q.scale(QQ(1, 2))
    for i in range(3, 7):
        assert cj.component(i).is_zero()


def test_sphere_jet_curvature_scales():
    jet, Q = sphere_normal_jet(2, 6, K=QQ(3, 2))
    cj = curvature_jet(jet)
    assert cj.component(2) == Q.scale(QQ(3, 2) * QQ(1, 2))


def test_zero_jet_is_flat():
    m = 3
    jet = MetricJet(m, 4, tuple(TensorPoly.zero(m, (m, m)) for _ in range(4)))
    cj = curvature_jet(jet)
    assert cj.is_zero()


@pytest.mark.parametrize("m,k", [(2, 2), (2, 4), (2, 6), (3, 3), (3, 5)])
def test_single_component_leading_ratio(m, k):
    # a jet with a single nonzero degree-k component satisfies
    # G^k = a_k R^k with a_k = -2(k-1)/(k+1), exactly
    a_k = QQ(-2 * (k - 1), k + 1)
    for E in component_basis(m, k)[:3]:
        comps = [TensorPoly.zero(m, (m, m)) for _ in range(k)]
        comps[k - 1] = E
        jet = MetricJet(m, k, tuple(comps))
        cj = curvature_jet(jet)
        assert cj.component(k).scale(a_k) == E
        assert all(cj.component(i).is_zero() for i in range(2, k))


def test_check_normal_certificate():
    # G^2 = |w|^2 I violates the radial identity; certificate names it
    m = 2
    terms = {}
    for c in range(m):
        e = [0] * m
        e[c] = 2
        mat = _zeros((m, m))
        mat[0, 0] = mat[1, 1] = QQ(1)
        terms[tuple(e)] = mat
    bad = TensorPoly(m, (m, m), terms)
    jet = MetricJet(m, 2, (TensorPoly.zero(m, (m, m)), bad))
    flag, cert = check_normal(jet)
    assert not flag
    assert cert["degree"] == 2
    good, _ = sphere_normal_jet(2, 4)
    assert check_normal(good)[0]


def test_inverse_single_component():
    # curvature jet with only the order-2 component: G^2 = -(2/3) R^2 and
    # higher components carry the correction terms
    m = 3
    R2 = component_basis(m, 2)[0]
    zero = TensorPoly.zero(m, (m, m))
    cjet = CurvatureJet(m, 4, (R2, zero, zero))
    jet = normal_jet_from_curvature(cjet)
    assert jet.component(2) == R2.scale(QQ(-2, 3))
    assert jet.component(3).is_zero()
    assert not jet.component(4).is_zero()  # order-4 correction of R2
    back = curvature_jet(jet)
    for i in range(2, 5):
        assert back.component(i) == cjet.component(i)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_trip_random(seed):
    rng = np.random.default_rng(seed)
    m, k = 3, 5
    R = random_curvature_jet(m, k, rng)
    jet = normal_jet_from_curvature(R)
    assert check_normal(jet)[0]
    back = curvature_jet(jet)
    for i in range(2, k + 1):
        assert back.component(i) == R.component(i)


def test_normalize_idempotent_and_curvature_preserving():
    rng = np.random.default_rng(7)
    R = random_curvature_jet(3, 4, rng)
    jet = normal_jet_from_curvature(R)
    again = normalize_jet(jet)
    for i in range(1, 5):
        assert again.component(i) == jet.component(i)


def test_normalize_flat_skewed_chart():
    # pullback of the flat metric by a degree-2 polynomial chart change has
    # zero curvature, so its normal representative is the zero jet
    m = 2
    eye = TensorPoly.constant(np.eye(m, dtype=object), m)
    d1 = TensorPoly(m, (m, m), {
        (1, 0): np.array([[QQ(1), QQ(1)], [QQ(0), QQ(0)]], dtype=object),
        (0, 1): np.array([[QQ(1), QQ(0)], [QQ(0), QQ(1, 2)]], dtype=object)})
    Dphi = eye + d1
    g = Dphi.transpose((1, 0)).dot(Dphi, 1, 0).truncate(3)
    comps = tuple(g.homogeneous_part(i) for i in range(1, 4))
    jet = MetricJet(m, 3, comps)
    assert not check_normal(jet)[0]
    normal = normalize_jet(jet)
    assert normal.is_zero()


def test_prescribe_simple_rank_one():
    x = [1, 0, 0]
    A2 = np.zeros((3, 3))
    A2[1, 1] = 1.0
    jet = prescribe_jacobi_operators(x, [A2])
    cj = curvature_jet(jet)
    got = cj.operator_at(x, 2)
    assert all(got[i, j] == QQ(1 if i == j == 1 else 0)
               for i in range(3) for j in range(3))


def test_prescribe_two_orders_exact():
    x = [1, 0, 0]
    A2 = np.diag([0.0, 1.0, 2.0])
    A3 = np.zeros((3, 3))
    A3[1, 2] = A3[2, 1] = 1.0
    jet = prescribe_jacobi_operators(x, [A2, A3])
    assert check_normal(jet)[0]
    cj = curvature_jet(jet)
    got2 = cj.operator_at(x, 2)
    got3 = cj.operator_at(x, 3)
    for i in range(3):
        for j in range(3):
            assert got2[i, j] == QQ(int(A2[i, j]))
            assert got3[i, j] == QQ(int(A3[i, j]))


def test_prescribe_rejects_bad_input():
    x = [1, 0, 0]
    bad = np.zeros((3, 3))
    bad[0, 0] = 1.0  # does not annihilate x
    with pytest.raises(Exception):
        prescribe_jacobi_operators(x, [bad])
    asym = np.zeros((3, 3))
    asym[1, 2] = 1.0
    with pytest.raises(Exception):
        prescribe_jacobi_operators(x, [asym])


def test_prescribe_nontrivial_direction():
    # rational x that is not an axis; everything stays exact
    x = [QQ(2), QQ(1), QQ(-1)]
    xf = np.array([2.0, 1.0, -1.0])
    rng = np.random.default_rng(3)
    S = rng.integers(-3, 4, (3, 3))
    S = S + S.T
    # project to the annihilator of x symmetrically: A = P S P with P = I - xx^T/|x|^2
    P = np.eye(3) - np.outer(xf, xf) / (xf @ xf)
    A = P @ S @ P
    A_rat = [[QQ(int(round(v * 36)), 36) for v in row] for row in A]
    # rationalize exactly: recompute with exact arithmetic instead
    from riemlab.polynomials import rational_array
    Sq = rational_array(S.tolist())
    xq = rational_array([2, 1, -1])
    xx = sum(v * v for v in xq)
    Pq = np.eye(3, dtype=object) - np.outer(xq, xq) * (QQ(1) / xx)
    Aq = Pq.dot(Sq).dot(Pq)
    jet = prescribe_jacobi_operators(x, [Aq])
    cj = curvature_jet(jet)
    got = cj.operator_at(x, 2)
    assert all(got[i, j] == Aq[i, j] for i in range(3) for j in range(3))


def test_rank_restricted_is_bijective_zero_jet():
    m, k = 2, 3
    zero = MetricJet(m, k, tuple(TensorPoly.zero(m, (m, m)) for _ in range(k)))
    rep = curvature_map_differential_rank(zero, restrict_to_normal=True)
    assert rep.rank == rep.curvature_dim
    assert rep.domain_dim == rep.curvature_dim


def test_rank_full_space_is_submersion_zero_jet():
    m, k = 2, 3
    zero = MetricJet(m, k, tuple(TensorPoly.zero(m, (m, m)) for _ in range(k)))
    rep = curvature_map_differential_rank(zero, restrict_to_normal=False)
    assert rep.rank == rep.curvature_dim
    assert rep.domain_dim > rep.curvature_dim


def test_rank_random_base():
    rng = np.random.default_rng(9)
    m, k = 2, 4
    R = random_curvature_jet(m, k, rng)
    base = normal_jet_from_curvature(R)
    rep = curvature_map_differential_rank(base, restrict_to_normal=False)
    assert rep.rank == rep.curvature_dim == curvature_space_dim(m, k)


def test_serialization_round_trip():
    x = [1, 0, 0]
    A2 = np.diag([0.0, 1.0, 2.0])
    jet = prescribe_jacobi_operators(x, [A2])
    text = jet_to_text(jet)
    back = jet_from_text(text)
    assert isinstance(back, MetricJet)
    for i in range(1, jet.k + 1):
        assert back.component(i) == jet.component(i)
    assert jet_to_text(back) == text  # canonical form is stable


def test_serialization_curvature_jet():
    rng = np.random.default_rng(4)
    R = random_curvature_jet(2, 3, rng)
    text = jet_to_text(R)
    back = jet_from_text(text)
    assert isinstance(back, CurvatureJet)
    for i in range(2, 4):
        assert back.component(i) == R.component(i)


def test_component_space_dims_known_small_case():
    # m = 2: quadratic symmetric-valued P with P_x.x = 0: one free basis
    # element per classical count of planar curvature jets
    dims = [len(component_basis(2, i)) for i in range(2, 5)]
    assert dims[0] == 1  # a single sectional curvature in the plane
    assert all(d >= 1 for d in dims)
    assert curvature_space_dim(2, 4) == sum(dims)
