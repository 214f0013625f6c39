"""
run 子命令的配置
来源只有两个：--config 指定的 key=value 文件，以及命令行参数（优先）
"""

import logging
import math
from pathlib import Path
from typing import Any, Literal

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.exceptions import ConfigError
from src.core.models import EmitterParams, EvaluationMode, NoiseParams

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """一次协议运行的全部参数"""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    protocol: Literal["creation", "swap", "purify"] = Field(description="协议名称")
    purcell: float = Field(default=math.inf, description="Purcell 因子")
    detuning: float = Field(default=0.0, description="失谐 Δ/γ_1D")
    noise: tuple[complex, complex] | None = Field(default=None, description="集体噪声 (γ, δ)")
    fidelity: float | None = Field(default=None, description="提纯输入保真度")
    spectral: bool = Field(default=False, description="是否使用高斯频谱波包")
    sigma: float | None = Field(default=None, gt=0, description="波包宽度 σ")
    bins: int | None = Field(default=None, ge=1, description="频率格点数")
    wfc: bool = Field(default=True, description="是否启用波形校正")
    enumerate: bool = Field(default=False, description="精确枚举")
    trials: int | None = Field(default=None, ge=1, description="抽样试验次数")
    seed: int | None = Field(default=None, ge=0, description="抽样种子")
    workers: int | None = Field(default=None, ge=1, description="并行进程数")
    output: str | None = Field(default=None, description="逐次试验 / 逐结果 CSV 路径")

    @field_validator("noise", mode="before")
    @classmethod
    def parse_noise(cls, v: Any) -> Any:
        """接受 "γ,δ" 字符串，分量可以是复数（如 0.6,0.8j）"""
        if isinstance(v, str):
            parts = [p.strip() for p in v.split(",")]
            if len(parts) != 2:
                raise ValueError("noise must be given as gamma,delta")
            return tuple(complex(p.replace(" ", "")) for p in parts)
        return v

    @model_validator(mode="after")
    def validate_mode(self) -> "RunConfig":
        if self.enumerate and self.trials is not None:
            raise ValueError("enumerate and trials are mutually exclusive")
        if self.trials is not None and self.seed is None:
            raise ValueError("sample mode needs a seed")
        if self.protocol == "purify" and self.fidelity is None:
            raise ValueError("purify needs --fidelity")
        if self.protocol != "creation" and (self.spectral or self.noise is not None or not self.wfc):
            raise ValueError("noise, spectral and wfc options apply to creation only")
        if self.spectral and self.sigma is None:
            raise ValueError("spectral runs need --sigma")
        if self.sigma is not None and not self.spectral:
            raise ValueError("--sigma needs --spectral")
        return self

    @property
    def evaluation(self) -> EvaluationMode:
        return EvaluationMode.SAMPLE if self.trials is not None else EvaluationMode.ENUMERATE

    def emitter_params(self) -> EmitterParams:
        return EmitterParams(purcell=self.purcell, detuning=self.detuning)

    def noise_params(self) -> NoiseParams:
        if self.noise is None:
            return NoiseParams.identity()
        gamma, delta = self.noise
        return NoiseParams(gamma=gamma, delta=delta)


def read_config_file(path: str | Path) -> dict[str, str]:
    """
    读取 key=value 配置文件

    Raises:
        ConfigError: 文件不存在或包含空值键
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    values = dotenv_values(config_path)
    missing = [key for key, value in values.items() if value is None]
    if missing:
        raise ConfigError("config keys without a value", {"keys": ", ".join(sorted(missing))})
    logger.debug(f"Loaded {len(values)} keys from {config_path}")
    return {key.strip().lower(): value for key, value in values.items() if value is not None}


def build_run_config(protocol: str, overrides: dict[str, Any], config_file: str | Path | None = None) -> RunConfig:
    """
    合并配置文件与命令行参数（命令行优先，值为 None 的参数视为未给出）

    Raises:
        ConfigError: 未知键或取值不合法
    """
    merged: dict[str, Any] = dict(read_config_file(config_file)) if config_file else {}
    if "protocol" in merged:
        raise ConfigError("protocol is chosen on the command line, not in the config file")
    merged.update({key: value for key, value in overrides.items() if value is not None})
    merged["protocol"] = protocol
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError("invalid run configuration", {"errors": "; ".join(_describe(err) for err in e.errors())}) from e


def _describe(error: Any) -> str:
    location = ".".join(str(part) for part in error.get("loc", ())) or "config"
    return f"{location}: {error.get('msg', 'invalid value')}"
