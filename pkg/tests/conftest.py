import pathlib
import sys

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from sensact.plant import (
    CwParams,
    SystemModel,
    build_cw_continuous,
    discretize_zoh,
    mode_matrices,
    synthesize_gains,
)

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
CW_CONFIG = REPO_ROOT / "configs" / "cw.json"


@pytest.fixture(scope="session")
def cw_model():
    """The rendezvous case-study plant: CW dynamics, 30 s ZOH sampling,
    140 kg chaser, 0.001 rad/s mean motion, position measurements."""
    a_c, b_c = build_cw_continuous(CwParams(mass=140.0, mean_motion=0.001, ts=30.0))
    a, b = discretize_zoh(a_c, b_c, 30.0)
    return SystemModel(
        a=a,
        b=b,
        c=np.hstack([np.eye(3), np.zeros((3, 3))]),
        sigma_w=1e-4 * np.eye(6),
        sigma_v=1e-2 * np.eye(3),
        ts=30.0,
    )


@pytest.fixture(scope="session")
def cw_gains(cw_model):
    return synthesize_gains(cw_model, np.eye(6), np.eye(3))


@pytest.fixture(scope="session")
def cw_mm(cw_model, cw_gains):
    return mode_matrices(cw_model, cw_gains)
