"""
协议公共部分
分支执行器（枚举 / 抽样）、集体噪声信道、解析成功概率与提纯保真度映射
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from src.core.exceptions import ParameterError
from src.core.models import EmitterParams, EvaluationMode, HeraldTag, NoiseParams
from src.services.optics import HeraldBranch
from src.services.scattering import SpectralWavepacket, overlap_success_probability
from src.services.state_engine import NORM_ATOL, JointState, apply_local_unitary

logger = logging.getLogger(__name__)

# 一次分支展开的结果：(标签, 结果名, 条件概率, 态)
Outcome = tuple[HeraldTag, str | None, float, JointState | None]


@dataclass(frozen=True)
class Branch:
    """
    协议执行中的一个分支
    weight 为绝对概率，state 已归一化；非 success 分支不再演化
    """

    weight: float
    state: JointState | None
    tag: HeraldTag = HeraldTag.SUCCESS
    outcomes: tuple[str, ...] = ()

    @property
    def alive(self) -> bool:
        return self.tag == HeraldTag.SUCCESS and self.state is not None


class BranchRunner:
    """
    分支执行器

    enumerate 模式保留所有子分支；sample 模式按条件概率用 rng 只保留一个。
    所有展开函数都按枚举方式返回结果，抽样统一在这里完成。
    """

    def __init__(self, evaluation: EvaluationMode = EvaluationMode.ENUMERATE, rng: np.random.Generator | None = None):
        self.evaluation = EvaluationMode(evaluation)
        if self.evaluation == EvaluationMode.SAMPLE and rng is None:
            raise ParameterError("sample mode needs a random generator")
        self.rng = rng
        self.branches: list[Branch] = []

    @property
    def sampling(self) -> bool:
        return self.evaluation == EvaluationMode.SAMPLE

    def start(self, state: JointState, label: str | None = None) -> "BranchRunner":
        return self.start_ensemble([(1.0, state, label)])

    def start_ensemble(self, cases: Sequence[tuple[float, JointState, str | None]]) -> "BranchRunner":
        """
        以混合输入开始（例如提纯的四种输入情形）

        Args:
            cases: (权重, 态, 情形名)
        """
        branches = [
            Branch(weight=w, state=s.normalized(), outcomes=(label,) if label else ())
            for w, s, label in cases
            if w > 0.0
        ]
        if not branches:
            raise ParameterError("runner needs at least one input case with positive weight")
        if self.sampling:
            branches = [self._pick(branches, [b.weight for b in branches])]
        self.branches = branches
        return self

    def _pick(self, items: Sequence, weights: Sequence[float]):
        assert self.rng is not None
        total = float(sum(weights))
        threshold = self.rng.random() * total
        cumulative = 0.0
        for item, weight in zip(items, weights):
            cumulative += weight
            if threshold < cumulative:
                return item
        return items[-1]

    def evolve(self, fn: Callable[[JointState], JointState]) -> "BranchRunner":
        """对存活分支作用确定性演化（线性光学元件、噪声）"""
        self.branches = [
            Branch(b.weight, fn(b.state), b.tag, b.outcomes) if b.alive and b.state is not None else b
            for b in self.branches
        ]
        return self

    def correct(self, fn: Callable[[JointState, tuple[str, ...]], JointState]) -> "BranchRunner":
        """按分支的测量历史作用修正"""
        self.branches = [
            Branch(b.weight, fn(b.state, b.outcomes), b.tag, b.outcomes) if b.alive and b.state is not None else b
            for b in self.branches
        ]
        return self

    def expand(self, fn: Callable[[JointState], Iterable[Outcome]]) -> "BranchRunner":
        """对存活分支作用一次多结果操作（散射模块或探测）"""
        children: list[Branch] = []
        for branch in self.branches:
            if not branch.alive or branch.state is None:
                children.append(branch)
                continue

            outcomes = list(fn(branch.state))
            # 舍去浮点残差量级的分支
            cutoff = NORM_ATOL * sum(o[2] for o in outcomes)
            outcomes = [o for o in outcomes if o[2] > cutoff]
            if self.sampling and outcomes:
                outcomes = [self._pick(outcomes, [o[2] for o in outcomes])]

            for tag, label, probability, state in outcomes:
                children.append(
                    Branch(
                        weight=branch.weight * probability,
                        state=None if state is None else state.normalized(),
                        tag=tag,
                        outcomes=branch.outcomes + ((label,) if label else ()),
                    )
                )
        self.branches = children
        return self

    def herald(self, fn: Callable[[JointState], list[HeraldBranch]]) -> "BranchRunner":
        """散射模块：输入态已归一化，分支权重即条件概率"""
        return self.expand(lambda state: [(hb.tag, None, hb.weight, hb.state) for hb in fn(state)])

    def detect(self, fn: Callable[[JointState], Iterable[tuple[str, float, JointState | None]]]) -> "BranchRunner":
        """探测 / 测量：(结果名, 条件概率, 坍缩态)"""
        return self.expand(lambda state: [(HeraldTag.SUCCESS, label, p, s) for label, p, s in fn(state)])

    def total(self, tag: HeraldTag) -> float:
        return sum(b.weight for b in self.branches if b.tag == tag)

    def successes(self) -> list[Branch]:
        return [b for b in self.branches if b.tag == HeraldTag.SUCCESS and b.state is not None]


def noise_matrix(noise: NoiseParams) -> np.ndarray:
    """|V⟩→γ|V⟩+δ|H⟩，补全为 |H⟩→γ*|H⟩−δ*|V⟩"""
    gamma, delta = noise.gamma, noise.delta
    return np.array([[gamma.conjugate(), delta], [-delta.conjugate(), gamma]], dtype=complex)


def apply_collective_noise(state: JointState, noise: NoiseParams, pol_id: str) -> JointState:
    """
    集体噪声：同一个单比特映射同时作用在 S、L 两个时间窗上

    时间窗是独立的寄存器，作用在偏振上的算符对两个时间窗分量相同。
    """
    return apply_local_unitary(state, [pol_id], noise_matrix(noise))


def analytic_protocol_success(
    params: EmitterParams,
    wavepacket: SpectralWavepacket | None = None,
) -> tuple[float, float, float]:
    """
    解析成功概率 (p1, p2, p3) = (p_s³, p_s², p_s⁴)

    创建、交换、提纯分别包含三次、两次、四次散射。
    """
    p_s = overlap_success_probability(wavepacket or SpectralWavepacket.single_bin(), params)
    return p_s**3, p_s**2, p_s**4


def validate_fidelity(fidelity: float) -> None:
    if not (0.0 < fidelity <= 1.0) or math.isnan(fidelity):
        raise ParameterError("fidelity must lie in (0, 1]", {"fidelity": fidelity})


def purification_fidelity_map(fidelity: float) -> float:
    """F′ = F² / (F² + (1−F)²)"""
    validate_fidelity(fidelity)
    keep = fidelity**2 + (1.0 - fidelity) ** 2
    return fidelity**2 / keep


def purification_keep_probability(fidelity: float) -> float:
    """散射全部成功时的保留概率 F² + (1−F)²"""
    validate_fidelity(fidelity)
    return fidelity**2 + (1.0 - fidelity) ** 2


def iterate_fidelity(fidelity: float, rounds: int) -> list[float]:
    """
    重复提纯的保真度序列（只用闭式，不模拟多轮调度）

    Returns:
        [F, F′, F″, ...]，长度 rounds + 1
    """
    if rounds < 0:
        raise ParameterError("rounds must be non-negative", {"rounds": rounds})
    values = [fidelity]
    for _ in range(rounds):
        values.append(purification_fidelity_map(values[-1]))
    return values
