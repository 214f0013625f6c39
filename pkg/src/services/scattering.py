"""
单光子散射核心
计算四能级发射体在一维波导中的反射/透射系数，以及有限带宽光子的成功概率 p_s

r = −1 / (1 + 1/P − 2iΔ/γ_1D)，t = 1 + r
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from src.core.config import settings
from src.core.exceptions import ParameterError
from src.core.models import EmitterParams, FilterSide, ScatterCoefficients

logger = logging.getLogger(__name__)


def compute_coefficients(params: EmitterParams) -> ScatterCoefficients:
    """
    计算散射系数

    P = ∞ 时取极限 r = −1/(1 − 2iΔ)，损耗严格为 0。
    有限 P 时损耗使用闭式 2|r|²/P，与 1 − |r|² − |t|² 等价但没有舍入误差。

    Args:
        params: 发射体参数

    Returns:
        ScatterCoefficients
    """
    if params.purcell <= 0:
        raise ParameterError("purcell must be positive", {"purcell": params.purcell})

    if params.is_ideal:
        denominator = complex(1.0, -2.0 * params.detuning)
    else:
        denominator = complex(1.0 + 1.0 / params.purcell, -2.0 * params.detuning)

    r = -1.0 / denominator
    t = 1.0 + r
    loss = 0.0 if params.is_ideal else 2.0 * abs(r) ** 2 / params.purcell
    return ScatterCoefficients(r=r, t=t, loss=min(max(loss, 0.0), 1.0))


def reflection_probability(params: EmitterParams) -> float:
    """单色光子的成功概率 |r|²"""
    return compute_coefficients(params).reflectance


def purcell_factor(gamma_1d: float, gamma_prime: float) -> float:
    """
    由衰减率计算 Purcell 因子 P = γ_1D / γ′（两者单位相同）

    例如 γ_1D = 6.182 GHz、γ′ = 98 MHz 给出 P ≈ 63.1。
    """
    if gamma_1d <= 0 or not math.isfinite(gamma_1d):
        raise ParameterError("gamma_1d must be positive and finite", {"gamma_1d": gamma_1d})
    if gamma_prime < 0 or math.isnan(gamma_prime):
        raise ParameterError("gamma_prime must be non-negative", {"gamma_prime": gamma_prime})
    if gamma_prime == 0:
        return math.inf
    return gamma_1d / gamma_prime


@dataclass(frozen=True)
class SpectralWavepacket:
    """
    离散化的光子频谱波包
    detunings 为相对中心失谐的偏移（单位 γ_1D），amplitudes 已包含格点权重
    """

    detunings: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        detunings = np.asarray(self.detunings, dtype=float).reshape(-1)
        amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)

        if detunings.size == 0:
            raise ParameterError("wavepacket needs at least one bin")
        if detunings.shape != amplitudes.shape:
            raise ParameterError(
                "detunings and amplitudes must have the same length",
                {"detunings": detunings.size, "amplitudes": amplitudes.size},
            )
        if not np.all(np.isfinite(detunings)):
            raise ParameterError("bin detunings must be finite")
        if detunings.size > 1 and not np.all(np.diff(detunings) > 0):
            raise ParameterError("bin detunings must be strictly increasing")
        if float(np.sum(np.abs(amplitudes) ** 2)) > 1.0 + settings.simulation.norm_atol:
            raise ParameterError("wavepacket norm must not exceed 1")

        detunings.setflags(write=False)
        amplitudes.setflags(write=False)
        object.__setattr__(self, "detunings", detunings)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def bins(self) -> list[tuple[float, complex]]:
        """(失谐, 振幅) 列表"""
        return list(zip(self.detunings.tolist(), self.amplitudes.tolist()))

    @property
    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm_squared - 1.0) <= settings.simulation.norm_atol

    def __len__(self) -> int:
        return int(self.detunings.size)

    @classmethod
    def single_bin(cls, offset: float = 0.0) -> "SpectralWavepacket":
        """单色光子（单个频率格点）"""
        return cls(detunings=np.array([offset]), amplitudes=np.array([1.0 + 0.0j]))

    @classmethod
    def gaussian(
        cls,
        sigma: float,
        center: float = 0.0,
        bins: int | None = None,
        span: float | None = None,
    ) -> "SpectralWavepacket":
        """
        高斯波包，|amplitude|² 为标准差 σ 的高斯分布

        Args:
            sigma: 频谱宽度 σ（单位 γ_1D）
            center: 中心偏移
            bins: 格点数（默认取配置，101）
            span: 截断范围 ±span·σ（默认取配置，5）

        Returns:
            归一化波包
        """
        if bins is None:
            bins = settings.simulation.gaussian_bins
        if span is None:
            span = settings.simulation.gaussian_span
        if sigma <= 0 or not math.isfinite(sigma):
            raise ParameterError("sigma must be positive and finite", {"sigma": sigma})
        if bins < 1:
            raise ParameterError("bins must be at least 1", {"bins": bins})
        if span <= 0 or not math.isfinite(span):
            raise ParameterError("span must be positive and finite", {"span": span})

        if bins == 1:
            return cls.single_bin(center)

        grid = np.linspace(center - span * sigma, center + span * sigma, bins)
        envelope = np.exp(-((grid - center) ** 2) / (4.0 * sigma**2))
        amplitudes = envelope / np.sqrt(np.sum(envelope**2))
        return cls(detunings=grid, amplitudes=amplitudes.astype(complex))


def _coefficient_profile(
    wp: SpectralWavepacket,
    params: EmitterParams,
    which: FilterSide,
) -> np.ndarray:
    """逐格点计算 r(Δ) 或 t(Δ)"""
    values = []
    for offset in wp.detunings:
        coefficients = compute_coefficients(params.shifted(float(offset)))
        values.append(coefficients.r if which == FilterSide.REFLECTED else coefficients.t)
    return np.asarray(values, dtype=complex)


def filter_wavepacket(
    wp: SpectralWavepacket,
    params: EmitterParams,
    which: FilterSide = FilterSide.REFLECTED,
) -> SpectralWavepacket:
    """
    散射滤波：每个格点乘以 r(Δ_bin) 或 t(Δ_bin)

    Args:
        wp: 输入波包（norm ≤ 1）
        params: 发射体参数，格点失谐叠加在 params.detuning 上
        which: 反射或透射分量

    Returns:
        滤波后的波包（norm ≤ 输入 norm）
    """
    profile = _coefficient_profile(wp, params, FilterSide(which))
    return SpectralWavepacket(detunings=wp.detunings, amplitudes=profile * wp.amplitudes)


def _require_normalized(wp: SpectralWavepacket) -> None:
    if not wp.is_normalized:
        raise ParameterError(
            "success probability requires a normalized wavepacket",
            {"norm_squared": wp.norm_squared},
        )


def overlap_success_probability(wp: SpectralWavepacket, params: EmitterParams) -> float:
    """
    散射成功概率 p_s = |⟨ψ|φ_r⟩|²

    单格点时严格等于 |r|²。
    """
    _require_normalized(wp)
    reflected = filter_wavepacket(wp, params, FilterSide.REFLECTED)
    overlap = np.vdot(wp.amplitudes, reflected.amplitudes)
    return float(min(abs(overlap) ** 2, 1.0))


def raw_herald_probability(wp: SpectralWavepacket, params: EmitterParams) -> float:
    """
    原始预告概率 ⟨φ_r|φ_r⟩

    宽带光子时 ≥ p_s；单色时两者相等。
    """
    _require_normalized(wp)
    return filter_wavepacket(wp, params, FilterSide.REFLECTED).norm_squared


def success_threshold_region(
    purcell_min: float = 50.0,
    purcell_max: float = 1e4,
    detuning_max: float = 0.13,
    points: int = 100,
) -> tuple[float, tuple[float, float]]:
    """
    在 {P ≥ purcell_min, |Δ| ≤ detuning_max} 网格上求 p_s 的最小值

    P 轴按对数间隔采样；|r|² 对 P 单调递增、对 |Δ| 单调递减，
    因此最小值出现在角点 (purcell_min, detuning_max)。

    Returns:
        (最小 p_s, 对应的 (P, Δ))
    """
    best = math.inf
    where = (purcell_min, 0.0)
    for purcell in np.geomspace(purcell_min, purcell_max, points):
        for detuning in np.linspace(-detuning_max, detuning_max, points):
            value = reflection_probability(EmitterParams(purcell=float(purcell), detuning=float(detuning)))
            if value < best:
                best = value
                where = (float(purcell), float(detuning))
    logger.debug(f"Threshold region minimum p_s={best} at P={where[0]}, detuning={where[1]}")
    return best, where
