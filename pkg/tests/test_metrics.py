"""Catalog metrics, connection/curvature oracles, and operator stacks."""

import math

import numpy as np
import pytest

from conftest import constant_curvature_operator
from riemlab.polynomials import QQ
from riemlab.jets import normal_jet_from_curvature
from riemlab.exceptional import random_curvature_jet
from riemlab.metrics import (
    CatalogError,
    DomainError,
    catalog_metric,
    christoffel,
    curvature,
    curvature_operator,
    jacobi_operator_stack,
    metric_eval,
    metric_from_jet,
    orthonormal_frame,
)

TAU_SYM = 1e-8
TAU_CURV = 1e-8
TAU_HOM = 1e-6
TAU_CROSS = 1e-5


def test_euclidean_is_identity(euclid3):
    for p in ([0, 0, 0], [0.3, -0.4, 1.2]):
        assert np.allclose(metric_eval(euclid3, p), np.eye(3))


def test_metric_eval_outside_domain(euclid3):
    with pytest.raises(DomainError):
        metric_eval(euclid3, [10.0, 0, 0])


def test_hyperbolic_at_origin(hyperbolic3):
    # Poincare ball closed form: 4/(1-|p|^2)^2 * I = 4I at the origin
    assert np.allclose(metric_eval(hyperbolic3, [0, 0, 0]), 4 * np.eye(3))
    p = np.array([0.1, 0.2, -0.1])
    lam = 4.0 / (1.0 - p @ p) ** 2
    assert np.allclose(metric_eval(hyperbolic3, p), lam * np.eye(3))


def test_sphere_normal_chart_limit(sphere3_normal):
    assert np.allclose(metric_eval(sphere3_normal, [1e-9, 0, 0]), np.eye(3),
                       atol=1e-12)
    # closed form at a sample point: P^rad + (sin^2 r / r^2) P^perp
    p = np.array([0.6, 0.2, -0.3])
    r = np.linalg.norm(p)
    Pr = np.outer(p, p) / r ** 2
    expected = Pr + (math.sin(r) ** 2 / r ** 2) * (np.eye(3) - Pr)
    assert np.allclose(metric_eval(sphere3_normal, p), expected, atol=1e-12)


def test_unknown_catalog_name():
    with pytest.raises(CatalogError):
        catalog_metric("moebius", {})


def test_perturbed_too_large_is_rejected():
    with pytest.raises(CatalogError):
        catalog_metric("perturbed", {"base": "euclidean",
                                     "base_params": {"m": 3},
                                     "seed": 1, "amplitude": 10.0})


def test_christoffel_flat_and_normal_jet(euclid3):
    assert np.allclose(christoffel(euclid3, [0.2, 0.1, 0.0]), 0.0)
    # Christoffel symbols vanish at the center of a normal jet metric
    rng = np.random.default_rng(2)
    jet = normal_jet_from_curvature(random_curvature_jet(3, 3, rng))
    M = metric_from_jet(jet)
    assert np.max(np.abs(christoffel(M, [0.0, 0.0, 0.0]))) < 1e-12


def test_christoffel_conformal_oracle(sphere2_stereo):
    # g = lambda^2 I with lambda = 2/(1+r^2):
    # Gamma^k_ij = d_i phi delta_kj + d_j phi delta_ki - d_k phi delta_ij,
    # phi = log lambda (hand-differentiated conformal closed form)
    p = np.array([0.3, -0.5])
    r2 = p @ p
    dphi = -2.0 * p / (1.0 + r2)
    m = 2
    expected = np.zeros((m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(m):
                expected[k, i, j] = (dphi[i] * (k == j) + dphi[j] * (k == i)
                                     - dphi[k] * (i == j))
    got = christoffel(sphere2_stereo, p)
    assert np.allclose(got, expected, atol=1e-10)


def test_christoffel_symmetry_in_lower_indices(perturbed_sphere3):
    g = christoffel(perturbed_sphere3, [0.2, 0.1, -0.3])
    assert np.allclose(g, np.swapaxes(g, 1, 2), atol=1e-12)


@pytest.mark.parametrize("fixture", ["sphere3_normal", "hyperbolic3",
                                     "perturbed_sphere3"])
def test_curvature_tensor_identities(fixture, request):
    M = request.getfixturevalue(fixture)
    rng = np.random.default_rng(0)
    for _ in range(3):
        p = rng.uniform(-0.25, 0.25, 3)
        cd = curvature(M, p)
        g = M.g(p)
        RL = np.einsum("al,lijk->ijka", g, cd.rm)
        assert np.max(np.abs(RL + np.einsum("jika->ijka", RL))) < TAU_CURV
        assert np.max(np.abs(RL + np.einsum("ijak->ijka", RL))) < TAU_CURV
        assert np.max(np.abs(RL - np.einsum("kaij->ijka", RL))) < TAU_CURV
        bianchi = (RL + np.einsum("jkia->ijka", RL)
                   + np.einsum("kija->ijka", RL))
        assert np.max(np.abs(bianchi)) < TAU_CURV


def test_curvature_operator_flat(euclid3):
    A, _ = curvature_operator(euclid3, [0.1, 0.2, 0.3], [1.0, 0.0, 0.0])
    assert np.allclose(A, 0.0)


@pytest.mark.parametrize("fixture,K", [("sphere3_normal", 1.0),
                                       ("sphere2_stereo", 1.0),
                                       ("hyperbolic3", -1.0)])
def test_constant_curvature_operator_oracle(fixture, K, request):
    M = request.getfixturevalue(fixture)
    rng = np.random.default_rng(1)
    for _ in range(4):
        p = rng.uniform(-0.4, 0.4, M.m)
        x = rng.standard_normal(M.m)
        A, E = curvature_operator(M, p, x)
        xf = E.T @ M.g(p) @ x
        assert np.allclose(A, constant_curvature_operator(K, xf), atol=1e-9)


def test_product_line_direction_flat(product_sl):
    A, _ = curvature_operator(product_sl, [0.2, 0.1, 0.4], [0.0, 0.0, 1.0])
    assert np.max(np.abs(A)) < 1e-10


def test_revolution_product_is_normal_polynomial():
    M = catalog_metric("revolution-product", {"c1": "-1/6", "c2": "1/60",
                                              "m": 3})
    from riemlab.jets import check_normal
    assert M.jet is not None
    assert check_normal(M.jet)[0]
    # radial direction in the symmetry plane keeps unit length (Gauss form)
    p = np.array([0.4, 0.3, 0.2])
    q = np.array([p[0], p[1], 0.0])
    g = M.g(p)
    assert abs(q @ g @ q - q @ q) < 1e-12


def test_stack_flat_all_zero(euclid3):
    st = jacobi_operator_stack(euclid3, [0.1, -0.2, 0.3], [0.5, 1.0, -0.7], 5)
    for i in range(2, 6):
        assert np.max(np.abs(st.operator(i))) < 1e-12
    assert np.max(np.abs(st.operator(1))) == 0.0  # convention R^1 = 0


def test_stack_sphere_oracle(sphere3_normal):
    st = jacobi_operator_stack(sphere3_normal, [0.2, 0.05, -0.1],
                               [0.4, 0.8, 0.2], 4)
    oracle = constant_curvature_operator(1.0, st.x_frame)
    assert np.max(np.abs(st.operator(2) - oracle)) < 1e-9
    # covariant derivatives of a parallel tensor vanish
    assert np.max(np.abs(st.operator(3))) < 1e-8
    assert np.max(np.abs(st.operator(4))) < 1e-7


def test_stack_invariants_random(perturbed_sphere3):
    rng = np.random.default_rng(5)
    M = perturbed_sphere3
    for _ in range(3):
        p = rng.uniform(-0.2, 0.2, 3)
        x = rng.standard_normal(3)
        x /= math.sqrt(float(x @ M.g(p) @ x))
        st = jacobi_operator_stack(M, p, x, 5)
        scale = max(st.scale(), 1.0)
        assert st.symmetry_defect < TAU_SYM
        for i in range(2, 6):
            A = st.operator(i)
            assert np.linalg.norm(A @ st.x_frame) < TAU_SYM * scale * \
                np.linalg.norm(st.x_frame) * 10


@pytest.mark.parametrize("lam", [-1.0, 0.5, 2.0])
def test_stack_homogeneity(sphere3_normal, lam):
    M = sphere3_normal
    p = np.array([0.15, -0.1, 0.2])
    x = np.array([0.6, 0.3, -0.5])
    st1 = jacobi_operator_stack(M, p, x, 4)
    st2 = jacobi_operator_stack(M, p, lam * x, 4)
    scale = max(st1.scale(), 1.0)
    for i in range(2, 5):
        diff = st2.operator(i) - lam ** i * st1.operator(i)
        assert np.max(np.abs(diff)) < TAU_HOM * abs(lam) ** i * scale


def test_stack_exact_mode_matches_prescription():
    from riemlab.jets import prescribe_jacobi_operators
    x = [1, 0, 0]
    A2 = np.diag([0.0, 1.0, 2.0])
    A3 = np.zeros((3, 3))
    A3[1, 2] = A3[2, 1] = 1.0
    jet = prescribe_jacobi_operators(x, [A2, A3])
    M = metric_from_jet(jet)
    st = jacobi_operator_stack(M, [0, 0, 0], x, 3, mode="exact")
    got2 = np.array(st.operator(2), dtype=float)
    got3 = np.array(st.operator(3), dtype=float)
    assert np.array_equal(got2, A2)
    assert np.array_equal(got3, A3)


def test_stack_cross_mode_agreement():
    # exact polynomial covariant differentiation against the transported-
    # operator derivative along geodesics, on a tame degree-5 jet metric
    rng = np.random.default_rng(11)
    R = random_curvature_jet(3, 5, rng)
    from riemlab.jets import CurvatureJet
    tame = CurvatureJet(3, 5, tuple(R.component(i).scale(QQ(1, 24))
                                    for i in range(2, 6)))
    M = metric_from_jet(normal_jet_from_curvature(tame))
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    st_e = jacobi_operator_stack(M, [0, 0, 0], x, 5, mode="exact")
    st_n = jacobi_operator_stack(M, [0, 0, 0], x, 5, mode="numerical",
                                 h0=0.04)
    scale = max(np.max(np.abs(np.array(st_e.operator(i), dtype=float)))
                for i in range(2, 6))
    for i in range(2, 6):
        exact = np.array(st_e.operator(i), dtype=float)
        assert np.max(np.abs(exact - st_n.operator(i))) < TAU_CROSS * max(
            scale, 1.0)


def test_stack_rejects_bad_input(euclid3):
    with pytest.raises(ValueError):
        jacobi_operator_stack(euclid3, [0, 0, 0], [0, 0, 0], 3)
    with pytest.raises(ValueError):
        jacobi_operator_stack(euclid3, [0, 0, 0], [1, 0, 0], 1)


def test_finite_difference_mode_matches_analytic():
    # the same conformal sphere metric through the pure finite-difference
    # derivative engine
    def gfun(P):
        P = np.asarray(P)
        r2 = np.sum(P * P, axis=-1)
        lam = 4.0 / (1.0 + r2) ** 2
        eye = np.eye(2, dtype=P.dtype)
        return lam[..., None, None] * eye

    from riemlab.metrics import Box, MetricField
    M_fd = MetricField("sphere-fd", 2, Box.cube(2.0, 2), "finite-difference",
                       gfun)
    M_cs = catalog_metric("round-sphere", {"K": 1.0, "m": 2,
                                           "chart": "stereographic"})
    p = np.array([0.3, -0.2])
    assert np.allclose(christoffel(M_fd, p), christoffel(M_cs, p), atol=1e-8)
    A_fd, _ = curvature_operator(M_fd, p, [1.0, 0.5])
    A_cs, _ = curvature_operator(M_cs, p, [1.0, 0.5])
    assert np.allclose(A_fd, A_cs, atol=1e-6)


def test_orthonormal_frame_property(perturbed_sphere3):
    p = np.array([0.2, -0.1, 0.15])
    E = orthonormal_frame(perturbed_sphere3, p)
    g = perturbed_sphere3.g(p)
    assert np.allclose(E.T @ g @ E, np.eye(3), atol=1e-12)
