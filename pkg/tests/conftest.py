import sys

import numpy as np
import pytest

from slcone.calib_core import flat_structure
from slcone.hl_cone import sample_cone
from slcone.local_models import plane_radius_for_ball, sample_model


def random_frames(rng, n_frames, m=3):
    """Orthonormal m-frames in R^{2m} drawn from the Haar measure."""
    A = rng.normal(size=(n_frames, 2 * m, m))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diagonal(R, axis1=-2, axis2=-1))[:, None, :]
    return np.swapaxes(Q, -1, -2)


def random_su(rng, m=3):
    """Haar-random determinant-one unitary."""
    A = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    Q, R = np.linalg.qr(A)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    return Q / np.linalg.det(Q) ** (1.0 / m)


@pytest.fixture(scope="session")
def S3():
    return flat_structure(3)


@pytest.fixture(scope="session")
def cone_B2():
    return sample_cone(0.0, 2.0, 200, 16)


@pytest.fixture(scope="session")
def cone_A12():
    return sample_cone(1.0, 2.0, 64, 16)


@pytest.fixture(scope="session")
def l1_B8():
    """L1 sampled exactly over its part inside B_8."""
    return sample_model("L1", plane_radius_for_ball(8.0), 400, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
