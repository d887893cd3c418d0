import numpy as np
import pytest

from mecanum_ftc.estimation import NoiseConfig
from mecanum_ftc.params import RobotParams


@pytest.fixture
def params() -> RobotParams:
    return RobotParams()


@pytest.fixture
def noise() -> NoiseConfig:
    return NoiseConfig.from_scalars()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def random_spd(rng: np.random.Generator, n: int, cond: float, scale: float = 1.0) -> np.ndarray:
    """Random SPD matrix with condition number at most ``cond``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lo, hi = 1.0 / np.sqrt(cond), np.sqrt(cond)
    eigs = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n)) * scale
    return q @ np.diag(eigs) @ q.T
