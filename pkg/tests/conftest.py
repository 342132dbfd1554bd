import numpy as np
import pytest

from riemlab.metrics import catalog_metric

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def euclid3():
    return catalog_metric("euclidean", {"m": 3})


@pytest.fixture(scope="session")
def euclid2():
    return catalog_metric("euclidean", {"m": 2})


@pytest.fixture(scope="session")
def sphere2_stereo():
    return catalog_metric("round-sphere", {"K": 1.0, "m": 2,
                                           "chart": "stereographic"})


@pytest.fixture(scope="session")
def sphere3_normal():
    return catalog_metric("round-sphere", {"K": 1.0, "m": 3,
                                           "chart": "normal"})


@pytest.fixture(scope="session")
def hyperbolic3():
    return catalog_metric("hyperbolic-ball", {"m": 3})


@pytest.fixture(scope="session")
def product_sl():
    return catalog_metric("product-sphere-line", {"K": 1.0})


@pytest.fixture(scope="session")
def perturbed_sphere3():
    return catalog_metric("perturbed", {
        "base": "round-sphere",
        "base_params": {"K": 1.0, "m": 3, "chart": "normal"},
        "seed": 11, "amplitude": 0.05})


def constant_curvature_operator(K, x_frame):
    """Frame-coordinates oracle: Rm(v, x)x = K(|x|^2 v - <v, x> x)."""
    x = np.asarray(x_frame, dtype=float)
    return K * ((x @ x) * np.eye(len(x)) - np.outer(x, x))
