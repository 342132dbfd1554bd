"""Iterated-transport recursion and the pinched boundary-value expansion."""

import math

import numpy as np
import pytest

from conftest import constant_curvature_operator
from riemlab.geodesics import JacobiSystem, shoot_geodesic
from riemlab.transport import (
    iterated_transport,
    pinched_jacobi_expansion,
    pinched_quadratic_richardson,
    transport_convergence_report,
)


def test_flat_exact_for_all_k(euclid3):
    path = shoot_geodesic(euclid3, [0, 0, 0], [1, 0, 0], 1.6)
    v0 = np.array([0.3, -0.7, 0.2])
    for k in (2, 8, 32, 64):
        out = iterated_transport(path, 0.0, 1.0, v0, k)
        assert np.linalg.norm(out - v0) < 1e-12


def test_path_too_short(euclid3):
    path = shoot_geodesic(euclid3, [0, 0, 0], [1, 0, 0], 1.2)
    with pytest.raises(ValueError):
        iterated_transport(path, 0.0, 1.0, [1, 0, 0], 2)


def test_sphere_convergence_and_inflation(sphere2_stereo):
    # norm error follows the closed form 1/cos(h)^k - 1 on constant
    # curvature; the direction error vanishes to solver precision
    path = shoot_geodesic(sphere2_stereo, [1.0, 0.0], [0.0, 1.0], 1.3, n=128)
    system = JacobiSystem(path)
    v0 = np.array([1.0, 0.0])
    ref = system.frame_components(0.0, v0)
    for k in (8, 64):
        got = iterated_transport(path, 0.0, 1.0, v0, k, system=system,
                                 return_frame=True)
        raw = np.linalg.norm(got - ref)
        predicted = 1.0 / math.cos(1.0 / k) ** k - 1.0
        assert abs(raw - predicted) < 1e-8
        scaled = got * np.linalg.norm(ref) / np.linalg.norm(got)
        assert np.linalg.norm(scaled - ref) < 1e-10


def test_convergence_report_rows(sphere2_stereo):
    path = shoot_geodesic(sphere2_stereo, [1.0, 0.0], [0.0, 1.0], 1.3, n=128)
    spec = [{"id": "eq", "path": path, "a": 0.0, "b": 1.0,
             "v0": [1.0, 0.0], "ks": [8, 16, 32, 64]}]
    reports = transport_convergence_report(sphere2_stereo, spec)
    rep = reports[0]
    assert rep.monotone
    # error(2k) <= 0.6 error(k)
    for e1, e2 in zip(rep.errors, rep.errors[1:]):
        assert e2 <= 0.6 * e1
    assert rep.errors[-1] <= rep.errors[0] / 4
    rows = rep.rows()
    assert [r["k"] for r in rows] == [8, 16, 32, 64]


def test_report_deterministic(sphere2_stereo):
    path = shoot_geodesic(sphere2_stereo, [1.0, 0.0], [0.0, 1.0], 1.3, n=128)
    spec = [{"id": "eq", "path": path, "a": 0.0, "b": 1.0,
             "v0": [1.0, 0.0], "ks": [8, 16]}]
    r1 = transport_convergence_report(sphere2_stereo, spec)[0]
    r2 = transport_convergence_report(sphere2_stereo, spec)[0]
    assert r1.errors == r2.errors


def test_perturbed_sphere_report(perturbed_sphere3):
    path = shoot_geodesic(perturbed_sphere3, [0.05, 0.0, -0.05],
                          [0.7, 0.5, 0.2], 1.4, n=128)
    spec = [{"id": "p", "path": path, "a": 0.0, "b": 1.0,
             "v0": [0.0, 0.4, 0.8], "ks": [8, 16, 32, 64]}]
    rep = transport_convergence_report(perturbed_sphere3, spec)[0]
    finite = [e for e in rep.errors if np.isfinite(e)]
    assert len(finite) == 4
    assert rep.monotone
    assert rep.errors[-1] <= 1e-2


def test_pinched_flat_exact(euclid3):
    path = shoot_geodesic(euclid3, [0, 0, 0], [1, 0, 0], 1.0)
    v = np.array([0.2, 0.5, -0.1])
    out = pinched_jacobi_expansion(path, 0.5, v, 1e-2)
    assert np.linalg.norm(out.value - v) < 1e-12
    assert np.linalg.norm(out.quadratic) < 1e-8


def test_pinched_sphere_matches_operator(sphere2_stereo):
    # Richardson-extrapolated quadratic coefficient equals the order-2
    # operator applied to the vector (constant-curvature oracle)
    path = shoot_geodesic(sphere2_stereo, [1.0, 0.0], [0.0, 1.0], 1.0, n=64)
    a = 0.5
    system = JacobiSystem(path, t_lo=a - 2e-2, t_hi=a + 2e-2)
    E = system.frame(a)
    g = sphere2_stereo.g(path.position(a))
    gam_f = E.T @ g @ path.velocity(a)
    perp = np.array([-gam_f[1], gam_f[0]])
    perp /= np.linalg.norm(perp)
    v = E @ perp
    rich, _ = pinched_quadratic_richardson(path, a, v, 1e-2, system=system)
    oracle = constant_curvature_operator(1.0, gam_f) @ perp
    assert np.linalg.norm(rich - oracle) / np.linalg.norm(oracle) < 1e-6


def test_pinched_velocity_direction_zero(perturbed_sphere3):
    # the operator annihilates the velocity, so the coefficient vanishes
    path = shoot_geodesic(perturbed_sphere3, [0.1, 0.0, 0.0],
                          [0.6, 0.4, 0.1], 1.0, n=64)
    a = 0.5
    rich, _ = pinched_quadratic_richardson(path, a, path.velocity(a), 1e-2)
    assert np.linalg.norm(rich) < 1e-6


def test_pinched_interval_validation(euclid3):
    path = shoot_geodesic(euclid3, [0, 0, 0], [1, 0, 0], 1.0)
    with pytest.raises(ValueError):
        pinched_jacobi_expansion(path, 0.0, [0, 1, 0], 0.1)
