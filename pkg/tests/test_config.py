"""
环境配置与日志初始化测试
"""

import logging

import pytest

from src.core.config import LogSettings, SimulationSettings, init_logging, settings


def test_simulation_defaults(monkeypatch):
    monkeypatch.delenv("HERALDSIM_SIM_WORKERS", raising=False)
    simulation = SimulationSettings(_env_file=None)
    assert simulation.default_trials == 100_000
    assert simulation.workers == 1
    assert simulation.max_oracle_qubits == 12


def test_environment_override(monkeypatch):
    monkeypatch.setenv("HERALDSIM_SIM_WORKERS", "3")
    monkeypatch.setenv("HERALDSIM_LOG_LEVEL", "DEBUG")
    assert SimulationSettings(_env_file=None).workers == 3
    assert LogSettings(_env_file=None).level == "DEBUG"


def test_invalid_environment_value(monkeypatch):
    monkeypatch.setenv("HERALDSIM_SIM_GAUSSIAN_BINS", "0")
    with pytest.raises(ValueError):
        SimulationSettings(_env_file=None)


def test_init_logging_level():
    init_logging("DEBUG")
    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert len(root.handlers) == 1
    init_logging()
    assert logging.getLogger().level == getattr(logging, settings.log.level)


def test_init_logging_writes_file(tmp_path, monkeypatch):
    log_file = tmp_path / "logs" / "heraldsim.log"
    monkeypatch.setattr(settings.log, "file_path", str(log_file))
    monkeypatch.setattr(settings.log, "json_format", True)
    init_logging("INFO")
    logging.getLogger("heraldsim.test").info("hello")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert '"message": "hello"' in log_file.read_text(encoding="utf-8")
    monkeypatch.setattr(settings.log, "file_path", None)
    init_logging()
