"""
纠缠交换
光子在原子 c、d 的两个散射模块之间分束，PBS± 探测后再测量 c、d，查表修正原子 a

输入 |φ+⟩_ac ⊗ |φ+⟩_bd，输出 |φ+⟩_ab
光子线路不放 QWP，全程在 H/V 基下写出；c、d 经 Hadamard 后测量，修正表按这一接法推出
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.core.exceptions import ParameterError
from src.core.models import (
    Detector,
    EmitterParams,
    EvaluationMode,
    HeraldTag,
    PauliWord,
    ProtocolSummary,
)
from src.services.corrections import PAULI_MATRICES, CorrectionTable, apply_correction
from src.services.optics import heralded_scatter_block, pbs_hv, pbs_hv_join, pm_detection
from src.services.protocols import Branch, BranchRunner
from src.services.scattering import reflection_probability
from src.services.state_engine import (
    HADAMARD,
    SQRT1_2,
    JointState,
    SubsystemDescriptor,
    apply_local_unitary,
    bell_state,
    compose,
    fidelity,
    measure,
)

logger = logging.getLogger(__name__)

PHOTON = "p"
ARM = "arm"
ATOM_A = "a"
ATOM_B = "b"
ATOM_C = "c"
ATOM_D = "d"

# 臂寄存器：0 经过原子 c，1 经过原子 d
ARM_C, ARM_D = 0, 1

DETECTOR_BY_SIGN = {"+": Detector.D1, "-": Detector.D2}

PROTOCOL_NAME = "swap"

# 判定修正后的态等于 |φ+⟩ 的容差
FIDELITY_ATOL = 1e-10


@dataclass(frozen=True)
class SwapResult:
    """一次交换的预告结果（成功时带 c、d 的测量结果与修正）"""

    herald: str
    probability: float
    c_outcome: int | None = None
    d_outcome: int | None = None
    correction: PauliWord | None = None
    final_state: JointState | None = None
    fidelity: float | None = None

    @property
    def succeeded(self) -> bool:
        return self.herald in (Detector.D1.value, Detector.D2.value)


@dataclass(frozen=True)
class SwapReport:
    params: EmitterParams
    p_s: float
    results: tuple[SwapResult, ...]
    success_probability: float
    herald_fail_probability: float
    loss_probability: float

    @property
    def fidelity(self) -> float | None:
        successes = [r for r in self.results if r.succeeded and r.fidelity is not None]
        if not successes:
            return None
        total = sum(r.probability for r in successes)
        return sum(r.probability * r.fidelity for r in successes if r.fidelity is not None) / total

    def summary(self) -> ProtocolSummary:
        extra = {
            f"p_{d.value}": sum(r.probability for r in self.results if r.herald == d.value)
            for d in DETECTOR_BY_SIGN.values()
        }
        extra["p_s"] = self.p_s
        return ProtocolSummary(
            protocol=PROTOCOL_NAME,
            mode=EvaluationMode.ENUMERATE,
            success_probability=self.success_probability,
            herald_fail_probability=self.herald_fail_probability,
            loss_probability=self.loss_probability,
            fidelity=self.fidelity,
            extra=extra,
        )


def target_state() -> JointState:
    """|φ+⟩_ab"""
    return bell_state(SubsystemDescriptor.atom(ATOM_A), SubsystemDescriptor.atom(ATOM_B), "phi+")


def initial_state() -> JointState:
    """|φ+⟩_ac ⊗ |φ+⟩_bd ⊗ 光子 (|H⟩+|V⟩)/√2，光子在输入臂 0 上"""
    photon = JointState.product(
        [
            (SubsystemDescriptor.polarization(PHOTON), (SQRT1_2, SQRT1_2)),
            (SubsystemDescriptor.path(ARM, ("c", "d")), (1.0, 0.0)),
        ]
    )
    return compose(
        bell_state(SubsystemDescriptor.atom(ATOM_A), SubsystemDescriptor.atom(ATOM_C)),
        bell_state(SubsystemDescriptor.atom(ATOM_B), SubsystemDescriptor.atom(ATOM_D)),
        photon,
    )


def _detect_photon(state: JointState) -> list[tuple[str, float, JointState | None]]:
    return [(DETECTOR_BY_SIGN[sign].value, p, s) for sign, p, s in pm_detection(state, PHOTON, ARM, in_path=0)]


def _measure_atom(atom_id: str):
    """Hadamard 后在计算基测量，原子从态中移除"""

    def detect(state: JointState) -> list[tuple[str, float, JointState | None]]:
        rotated = apply_local_unitary(state, [atom_id], HADAMARD)
        return [
            (f"{atom_id}={record.outcome}", record.probability, collapsed)
            for record, collapsed in measure(rotated, atom_id, discard=True)
        ]

    return detect


def _parse_outcomes(outcomes: tuple[str, ...]) -> tuple[Detector, int, int]:
    detector, c_label, d_label = outcomes[-3:]
    return Detector(detector), int(c_label.split("=")[1]), int(d_label.split("=")[1])


def swapping_circuit(
    params: EmitterParams,
    runner: BranchRunner,
    table: CorrectionTable | None = None,
) -> BranchRunner:
    """
    在 runner 上执行交换线路

    Args:
        params: 发射体参数
        runner: 分支执行器
        table: 修正表；为空时不修正（用于从枚举结果推导修正表）
    """
    runner.start(initial_state())
    runner.evolve(lambda s: pbs_hv(s, PHOTON, ARM, in_path=0, h_path=ARM_D, v_path=ARM_C))
    runner.herald(lambda s: heralded_scatter_block(s, ATOM_C, PHOTON, params, route=(ARM, ARM_C)))
    runner.herald(lambda s: heralded_scatter_block(s, ATOM_D, PHOTON, params, route=(ARM, ARM_D)))
    # 散射后 c 臂为 H、d 臂为 V，从同一个端口合束输出
    runner.evolve(lambda s: pbs_hv_join(s, PHOTON, ARM, h_path=ARM_C, v_path=ARM_D, out_path=0))
    runner.detect(_detect_photon)
    runner.detect(_measure_atom(ATOM_C))
    runner.detect(_measure_atom(ATOM_D))
    if table is not None:
        runner.correct(lambda s, outcomes: apply_correction(s, ATOM_A, table.lookup(*_parse_outcomes(outcomes))))
    return runner


def _result_from_branch(branch: Branch, table: CorrectionTable) -> SwapResult:
    if branch.tag != HeraldTag.SUCCESS or branch.state is None:
        return SwapResult(herald=branch.tag.value, probability=branch.weight)
    detector, c, d = _parse_outcomes(branch.outcomes)
    return SwapResult(
        herald=detector.value,
        probability=branch.weight,
        c_outcome=c,
        d_outcome=d,
        correction=table.lookup(detector, c, d),
        final_state=branch.state,
        fidelity=fidelity(branch.state, target_state()),
    )


def run_swapping(
    params: EmitterParams,
    evaluation: EvaluationMode = EvaluationMode.ENUMERATE,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    table: CorrectionTable | None = None,
) -> SwapReport | SwapResult:
    """
    运行纠缠交换

    Args:
        params: 发射体参数
        evaluation: enumerate 返回 SwapReport，sample 返回一次 SwapResult
        seed: sample 模式的种子
        rng: sample 模式的随机数发生器
        table: 修正表（默认标准表）

    Returns:
        SwapReport 或 SwapResult
    """
    table = table or CorrectionTable.standard()
    if EvaluationMode(evaluation) == EvaluationMode.SAMPLE:
        if rng is None:
            if seed is None:
                raise ParameterError("sample mode needs a seed")
            rng = np.random.default_rng(seed)
        runner = swapping_circuit(params, BranchRunner(EvaluationMode.SAMPLE, rng), table)
        (branch,) = runner.branches
        return _result_from_branch(branch, table)

    runner = swapping_circuit(params, BranchRunner(), table)
    results = [_result_from_branch(b, table) for b in runner.branches if b.tag == HeraldTag.SUCCESS]
    for tag in (HeraldTag.HERALD_FAIL, HeraldTag.LOSS):
        results.append(SwapResult(herald=tag.value, probability=runner.total(tag)))

    report = SwapReport(
        params=params,
        p_s=reflection_probability(params),
        results=tuple(results),
        success_probability=runner.total(HeraldTag.SUCCESS),
        herald_fail_probability=runner.total(HeraldTag.HERALD_FAIL),
        loss_probability=runner.total(HeraldTag.LOSS),
    )
    logger.info(f"Swapping enumerated: P={params.purcell}, detuning={params.detuning}, success={report.success_probability:.12g}")
    return report


def derive_swap_corrections(params: EmitterParams | None = None) -> CorrectionTable:
    """
    由穷举推导修正表：对每个 (探测器, c, d) 成功分支找出使原子 a 回到 |φ+⟩_ab 的 Pauli 字

    Raises:
        ParameterError: 某个分支没有任何 Pauli 字能修正
    """
    params = params or EmitterParams(purcell=float("inf"))
    runner = swapping_circuit(params, BranchRunner(), table=None)
    target = target_state()
    entries: dict[tuple[Detector, int, int], PauliWord] = {}
    for branch in runner.successes():
        assert branch.state is not None
        key = _parse_outcomes(branch.outcomes)
        for word, matrix in PAULI_MATRICES.items():
            corrected = apply_local_unitary(branch.state, [ATOM_A], matrix)
            if fidelity(corrected, target) >= 1.0 - FIDELITY_ATOL:
                entries[key] = word
                break
        else:
            raise ParameterError("no Pauli correction restores the target state", {"key": str(key)})
    logger.debug(f"Derived swap corrections for {len(entries)} outcome patterns")
    return CorrectionTable(entries)
