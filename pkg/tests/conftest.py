"""
测试公共夹具
"""

import math

import numpy as np
import pytest

from src.core.models import EmitterParams, NoiseParams

# 实验平台参数（γ_1D = 6.182 GHz，γ′ = 98 MHz）
PLATFORM_PURCELL = 63.1


@pytest.fixture
def ideal_params() -> EmitterParams:
    """P = ∞，Δ = 0"""
    return EmitterParams(purcell=math.inf)


@pytest.fixture
def platform_params() -> EmitterParams:
    return EmitterParams(purcell=PLATFORM_PURCELL, detuning=0.0)


@pytest.fixture
def lossy_params() -> EmitterParams:
    """有损且失谐，所有分支都非零"""
    return EmitterParams(purcell=20.0, detuning=0.07)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_noise(rng: np.random.Generator) -> NoiseParams:
    """|γ|² + |δ|² = 1 的随机复噪声参数"""
    vector = rng.normal(size=4)
    vector /= np.linalg.norm(vector)
    return NoiseParams(gamma=complex(vector[0], vector[1]), delta=complex(vector[2], vector[3]))


def random_params(rng: np.random.Generator) -> EmitterParams:
    """P ∈ [0.5, 10⁴]（对数均匀），Δ ∈ [−0.5, 0.5]"""
    purcell = float(10 ** rng.uniform(math.log10(0.5), 4.0))
    return EmitterParams(purcell=purcell, detuning=float(rng.uniform(-0.5, 0.5)))
