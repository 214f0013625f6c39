"""
核心数据模型定义
使用 Pydantic 定义领域模型（物理参数、系数、测量记录、协议汇总）
"""

import math
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class SubsystemKind(str, Enum):
    """二能级子系统类型"""

    ATOM = "atom"  # 原子 |g−⟩/|g+⟩
    PHOTON_POLARIZATION = "photon-polarization"  # 光子偏振 H/V
    PATH_MODE = "path-mode"  # 路径或时间窗 (1/2, S/L)


class MeasurementBasis(str, Enum):
    """测量基"""

    COMPUTATIONAL = "computational"  # |0⟩/|1⟩
    HADAMARD = "hadamard"  # |+⟩/|−⟩


class FilterSide(str, Enum):
    """散射后保留的分量"""

    REFLECTED = "reflected"
    TRANSMITTED = "transmitted"


class HeraldTag(str, Enum):
    """散射模块的输出分支"""

    SUCCESS = "success"  # 偏振翻转
    HERALD_FAIL = "herald-fail"  # 偏振未翻转，被探测并丢弃
    LOSS = "loss"  # 光子丢失，无探测


class Detector(str, Enum):
    """单光子探测器"""

    D1 = "D1"
    D2 = "D2"
    D3 = "D3"
    D4 = "D4"


class PauliWord(str, Enum):
    """单比特 Pauli 修正（ZX 表示先作用 σ_x 再作用 σ_z）"""

    I = "I"  # noqa: E741
    Z = "Z"
    X = "X"
    ZX = "ZX"


class EvaluationMode(str, Enum):
    """协议求值方式"""

    ENUMERATE = "enumerate"
    SAMPLE = "sample"


class EmitterParams(BaseModel):
    """
    发射体参数
    只保留无量纲比值：Purcell 因子 P = γ_1D/γ′ 与失谐 Δ/γ_1D
    """

    model_config = ConfigDict(frozen=True)

    purcell: float = Field(description="Purcell 因子，允许 inf（理想镜面极限）")
    detuning: float = Field(default=0.0, description="失谐 Δ/γ_1D")

    @field_validator("purcell")
    @classmethod
    def validate_purcell(cls, v: float) -> float:
        """验证 Purcell 因子"""
        if math.isnan(v) or v <= 0:
            raise ValueError("purcell must be positive (inf allowed)")
        return v

    @field_validator("detuning")
    @classmethod
    def validate_detuning(cls, v: float) -> float:
        """验证失谐"""
        if not math.isfinite(v):
            raise ValueError("detuning must be finite")
        return v

    @property
    def is_ideal(self) -> bool:
        """是否为无损极限 P = ∞"""
        return math.isinf(self.purcell)

    def shifted(self, offset: float) -> "EmitterParams":
        """返回失谐平移 offset 后的参数（频率格点使用）"""
        return EmitterParams(purcell=self.purcell, detuning=self.detuning + offset)


class ScatterCoefficients(BaseModel):
    """
    单光子散射系数
    r 为反射振幅，t = 1 + r 为透射振幅，loss = 1 − |r|² − |t|²
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    r: complex = Field(description="反射振幅")
    t: complex = Field(description="透射振幅")
    loss: float = Field(ge=0.0, le=1.0, description="损耗概率")

    @field_validator("r", "t", mode="before")
    @classmethod
    def coerce_complex(cls, v: Any) -> complex:
        return complex(v)

    @property
    def reflectance(self) -> float:
        """|r|²"""
        return abs(self.r) ** 2

    @property
    def transmittance(self) -> float:
        """|t|²"""
        return abs(self.t) ** 2


class NoiseParams(BaseModel):
    """
    集体噪声参数
    |V⟩ → γ|V⟩ + δ|H⟩，|γ|² + |δ|² = 1
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    gamma: complex = Field(default=1.0 + 0.0j, description="γ")
    delta: complex = Field(default=0.0 + 0.0j, description="δ")

    @field_validator("gamma", "delta", mode="before")
    @classmethod
    def coerce_complex(cls, v: Any) -> complex:
        return complex(v)

    @model_validator(mode="after")
    def validate_normalization(self) -> "NoiseParams":
        norm = abs(self.gamma) ** 2 + abs(self.delta) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"|gamma|^2 + |delta|^2 must equal 1, got {norm!r}")
        return self

    @classmethod
    def identity(cls) -> "NoiseParams":
        """无噪声信道"""
        return cls(gamma=1.0, delta=0.0)


class MeasurementRecord(BaseModel):
    """
    测量记录
    probability 为相对于测量前 norm² 的 Born 概率
    """

    model_config = ConfigDict(frozen=True)

    subsystem: str = Field(description="被测子系统 ID")
    basis: MeasurementBasis = Field(description="测量基")
    outcome: int = Field(ge=0, le=1, description="测量结果（hadamard 基中 0 表示 +，1 表示 −）")
    probability: float = Field(ge=0.0, le=1.0 + 1e-12, description="结果概率")

    @property
    def label(self) -> str:
        """可读标签"""
        if self.basis == MeasurementBasis.HADAMARD:
            return "+" if self.outcome == 0 else "-"
        return str(self.outcome)


class ProtocolSummary(BaseModel):
    """
    协议运行汇总
    success + herald_fail + loss = 1（枚举模式）
    """

    protocol: str = Field(description="协议名称")
    mode: EvaluationMode = Field(description="求值方式")
    success_probability: float = Field(description="成功概率")
    herald_fail_probability: float = Field(description="预告失败概率")
    loss_probability: float = Field(description="损耗概率")
    fidelity: float | None = Field(default=None, description="成功分支修正后的平均保真度")
    extra: dict[str, float] = Field(default_factory=dict, description="协议特有的附加量")

    def as_pairs(self) -> list[tuple[str, Any]]:
        """按固定顺序输出 key/value（CLI 使用）"""
        pairs: list[tuple[str, Any]] = [
            ("protocol", self.protocol),
            ("mode", self.mode.value),
            ("success_probability", self.success_probability),
            ("herald_fail_probability", self.herald_fail_probability),
            ("loss_probability", self.loss_probability),
        ]
        if self.fidelity is not None:
            pairs.append(("fidelity", self.fidelity))
        pairs.extend(sorted(self.extra.items()))
        return pairs
