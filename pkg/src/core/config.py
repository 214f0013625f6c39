"""
heraldsim 配置管理
使用 pydantic-settings 解析环境变量（仅限日志与执行等环境性配置）
物理运行参数只来自配置文件和命令行，见 src/cli/config.py
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

ENV_FILE = Path(__file__).parent.parent.parent / ".env"


class LogSettings(BaseSettings):
    """日志配置"""

    model_config = SettingsConfigDict(
        env_prefix="HERALDSIM_LOG_",
        env_file=str(ENV_FILE),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="WARNING", description="日志级别"
    )
    format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="日志格式",
    )
    json_format: bool = Field(default=False, description="是否输出 JSON 格式日志")
    file_path: str | None = Field(default=None, description="日志文件路径（为空则只输出到 stderr）")
    max_bytes: int = Field(default=10485760, description="日志文件最大大小（10MB）")
    backup_count: int = Field(default=5, description="日志文件备份数量")


class SimulationSettings(BaseSettings):
    """数值模拟配置"""

    model_config = SettingsConfigDict(
        env_prefix="HERALDSIM_SIM_",
        env_file=str(ENV_FILE),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    gaussian_bins: int = Field(default=101, ge=1, description="高斯波包默认频率格点数")
    gaussian_span: float = Field(default=5.0, gt=0, description="高斯波包截断范围（单位 σ）")
    default_trials: int = Field(default=100_000, ge=1, description="Monte Carlo 默认试验次数")
    workers: int = Field(default=1, ge=1, description="Monte Carlo 并行进程数")
    trial_chunk_size: int = Field(default=10_000, ge=1, description="每个并行任务处理的试验数")
    unitary_atol: float = Field(default=1e-12, gt=0, description="幺正性检查容差")
    norm_atol: float = Field(default=1e-9, gt=0, description="波包归一化检查容差")
    max_oracle_qubits: int = Field(default=12, ge=1, description="密度矩阵 oracle 最大量子比特数")


class Settings(BaseSettings):
    """全局配置"""

    model_config = SettingsConfigDict(
        env_file=str(ENV_FILE),
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log: LogSettings = Field(default_factory=LogSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)


@lru_cache
def get_settings() -> Settings:
    """
    获取配置单例
    使用 lru_cache 确保配置只加载一次
    """
    return Settings()


# 全局配置实例
settings = get_settings()


def init_logging(level: str | None = None) -> None:
    """
    初始化日志系统

    Args:
        level: 覆盖配置中的日志级别（命令行 --verbose 使用）
    """
    import logging.handlers

    log_settings = settings.log
    effective_level = (level or log_settings.level).upper()

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, effective_level))

    # 清除现有处理器
    root_logger.handlers.clear()

    if log_settings.json_format:
        from pythonjsonlogger import jsonlogger

        formatter: logging.Formatter = jsonlogger.JsonFormatter(log_settings.format)
    else:
        formatter = logging.Formatter(log_settings.format)

    # 控制台处理器（stderr，stdout 留给机器可读输出）
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    # 文件处理器（按大小轮转）
    if log_settings.file_path:
        log_path = Path(log_settings.file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=log_settings.max_bytes,
            backupCount=log_settings.backup_count,
            encoding="utf-8",
        )
        file_handler.setFormatter(formatter)
        root_logger.addHandler(file_handler)

    logger.debug(f"Logging initialized: {effective_level}")


# 导出配置
__all__ = ["settings", "get_settings", "init_logging", "LogSettings", "SimulationSettings"]
