"""
Monte Carlo 试验
每次试验使用独立的随机数子流 trial_rng(seed, i)，结果与执行顺序、进程数无关
"""

import logging
import math
from collections import Counter
from collections.abc import Iterator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.config import settings
from src.core.exceptions import ParameterError
from src.core.models import Detector, EmitterParams, EvaluationMode, HeraldTag, NoiseParams, ProtocolSummary
from src.services.creation import run_creation
from src.services.protocols import validate_fidelity
from src.services.purification import sample_purification
from src.services.scattering import SpectralWavepacket
from src.services.state_engine import trial_rng
from src.services.swapping import run_swapping

logger = logging.getLogger(__name__)

ProtocolName = Literal["creation", "swap", "purify"]

# 各协议中计为“散射全部成功”的结果
SUCCESS_OUTCOMES: dict[str, tuple[str, ...]] = {
    "creation": tuple(d.value for d in Detector),
    "swap": (Detector.D1.value, Detector.D2.value),
    "purify": ("kept", "discarded"),
}


class TrialSpec(BaseModel):
    """一组试验的完整描述（可序列化，供子进程使用）"""

    model_config = ConfigDict(frozen=True)

    protocol: ProtocolName = Field(description="协议名称")
    params: EmitterParams = Field(description="发射体参数")
    noise: NoiseParams = Field(default_factory=NoiseParams.identity, description="创建协议的信道噪声")
    fidelity: float | None = Field(default=None, description="提纯协议的输入保真度")
    sigma: float | None = Field(default=None, gt=0, description="创建协议的高斯波包宽度；为空表示单色")
    bins: int | None = Field(default=None, ge=1, description="高斯波包格点数")
    wfc: bool = Field(default=True, description="创建协议是否启用波形校正")

    @model_validator(mode="after")
    def validate_protocol_fields(self) -> "TrialSpec":
        if self.protocol == "purify":
            if self.fidelity is None:
                raise ValueError("purify trials need an input fidelity")
            validate_fidelity(self.fidelity)
        return self

    def wavepacket(self) -> SpectralWavepacket | None:
        if self.sigma is None:
            return None
        return SpectralWavepacket.gaussian(self.sigma, bins=self.bins)


@dataclass(frozen=True)
class TrialRecord:
    """单次试验：序号、结果名、成功时的保真度"""

    index: int
    outcome: str
    fidelity: float | None = None


@dataclass(frozen=True)
class TrialStatistics:
    """按序号排序的试验记录与计数"""

    protocol: str
    seed: int
    records: tuple[TrialRecord, ...]
    counts: dict[str, int] = field(default_factory=dict)
    fidelity_sum: float = 0.0

    @property
    def trials(self) -> int:
        return len(self.records)

    def count(self, key: str) -> int:
        return self.counts.get(key, 0)

    def frequency(self, key: str) -> float:
        return self.count(key) / self.trials if self.trials else 0.0

    @property
    def success_count(self) -> int:
        return sum(self.count(key) for key in SUCCESS_OUTCOMES[self.protocol])

    @property
    def fidelity_count(self) -> int:
        return sum(1 for r in self.records if r.fidelity is not None)

    @property
    def mean_fidelity(self) -> float | None:
        n = self.fidelity_count
        return self.fidelity_sum / n if n else None

    def within_sigma(self, key: str, probability: float, n_sigma: float = 4.0) -> bool:
        """观测频率与期望概率的偏差不超过 n_sigma 个二项标准差"""
        return within_binomial_error(self.count(key), self.trials, probability, n_sigma)

    def summary(self) -> ProtocolSummary:
        extra = {f"count_{key}": float(value) for key, value in self.counts.items()}
        extra["trials"] = float(self.trials)
        extra["seed"] = float(self.seed)
        return ProtocolSummary(
            protocol=self.protocol,
            mode=EvaluationMode.SAMPLE,
            success_probability=self.success_count / self.trials,
            herald_fail_probability=self.frequency(HeraldTag.HERALD_FAIL.value),
            loss_probability=self.frequency(HeraldTag.LOSS.value),
            fidelity=self.mean_fidelity,
            extra=extra,
        )


def binomial_sigma(probability: float, trials: int) -> float:
    """二项分布频率的标准差 √(p(1−p)/n)"""
    if trials <= 0:
        raise ParameterError("trials must be positive", {"trials": trials})
    return math.sqrt(max(probability * (1.0 - probability), 0.0) / trials)


def within_binomial_error(count: int, trials: int, probability: float, n_sigma: float = 4.0) -> bool:
    sigma = binomial_sigma(probability, trials)
    deviation = abs(count / trials - probability)
    if sigma == 0.0:
        # p 为 0 或 1 时只允许精确相等（留浮点余量）
        return deviation <= 1e-12
    return deviation <= n_sigma * sigma


def sample_trial(spec: TrialSpec, index: int, seed: int) -> TrialRecord:
    """用第 index 个子流抽样一次协议"""
    rng = trial_rng(seed, index)
    if spec.protocol == "creation":
        creation = run_creation(
            spec.params,
            noise=spec.noise,
            wavepacket=spec.wavepacket(),
            evaluation=EvaluationMode.SAMPLE,
            rng=rng,
            wfc=spec.wfc,
        )
        return TrialRecord(index, creation.herald, creation.fidelity)  # type: ignore[union-attr]
    if spec.protocol == "swap":
        swap = run_swapping(spec.params, evaluation=EvaluationMode.SAMPLE, rng=rng)
        return TrialRecord(index, swap.herald, swap.fidelity)  # type: ignore[union-attr]

    assert spec.fidelity is not None
    purify = sample_purification(spec.fidelity, spec.params, rng)
    return TrialRecord(index, purify.herald, purify.output_fidelity)


def _run_chunk(spec: TrialSpec, seed: int, start: int, stop: int) -> list[TrialRecord]:
    return [sample_trial(spec, index, seed) for index in range(start, stop)]


def _chunks(trials: int, chunk_size: int) -> Iterator[tuple[int, int]]:
    for start in range(0, trials, chunk_size):
        yield start, min(start + chunk_size, trials)


def aggregate(protocol: str, seed: int, records: list[TrialRecord]) -> TrialStatistics:
    """
    汇总试验记录

    先按序号排序，再计数与累加保真度，保证并行与串行结果逐位一致。
    """
    ordered = tuple(sorted(records, key=lambda r: r.index))
    counts = Counter(r.outcome for r in ordered)
    fidelity_sum = math.fsum(r.fidelity for r in ordered if r.fidelity is not None)
    return TrialStatistics(
        protocol=protocol,
        seed=seed,
        records=ordered,
        counts=dict(sorted(counts.items())),
        fidelity_sum=fidelity_sum,
    )


def run_trials(
    spec: TrialSpec,
    seed: int,
    trials: int | None = None,
    workers: int | None = None,
    chunk_size: int | None = None,
) -> TrialStatistics:
    """
    运行 Monte Carlo 试验

    Args:
        spec: 协议与参数
        seed: 主种子
        trials: 试验次数（默认取配置）
        workers: 进程数；大于 1 时使用进程池
        chunk_size: 每个任务的试验数

    Returns:
        TrialStatistics
    """
    trials = settings.simulation.default_trials if trials is None else trials
    workers = workers or settings.simulation.workers
    chunk_size = chunk_size or settings.simulation.trial_chunk_size
    if trials < 1:
        raise ParameterError("trials must be at least 1", {"trials": trials})
    if seed < 0:
        raise ParameterError("seed must be non-negative", {"seed": seed})

    tasks = list(_chunks(trials, chunk_size))
    logger.info(f"Running {trials} {spec.protocol} trials (seed={seed}, workers={workers}, chunks={len(tasks)})")

    records: list[TrialRecord] = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_run_chunk, spec, seed, start, stop) for start, stop in tasks]
            for future in futures:
                records.extend(future.result())
    else:
        for start, stop in tasks:
            records.extend(_run_chunk(spec, seed, start, stop))

    statistics = aggregate(spec.protocol, seed, records)
    logger.debug(f"Trial counts for {spec.protocol}: {statistics.counts}")
    return statistics
