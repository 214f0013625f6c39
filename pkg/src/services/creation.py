"""
纠缠创建
单光子依次与两个远程原子散射，集体噪声作用在两个时间窗上，PBS± 探测后得到 |φ+⟩_ab

线路：PBS 分出时间窗 → 原子 a 的散射模块（L 窗）→ 信道噪声 → TR 路由 →
原子 b 的散射模块（L 窗）→ 参考臂上的 WFC → PBS 合束 → PBS± 探测 → 条件 σ_x
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
    NoiseParams,
    PauliWord,
    ProtocolSummary,
)
from src.services.corrections import apply_correction, creation_correction
from src.services.optics import (
    HeraldBranch,
    heralded_scatter_block,
    pbs_hv,
    pm_detection,
    time_bin_to_path,
    tr_switch,
    waveform_corrector,
)
from src.services.protocols import Branch, BranchRunner, apply_collective_noise
from src.services.scattering import SpectralWavepacket, overlap_success_probability
from src.services.state_engine import (
    SQRT1_2,
    JointState,
    MixedEnsemble,
    SubsystemDescriptor,
    bell_state,
    fidelity,
    measure,
)

logger = logging.getLogger(__name__)

PHOTON = "p"
TIME_BIN = "bin"
PATH = "path"
ATOM_A = "a"
ATOM_B = "b"

# TR 开关把 S 窗送往参考臂（WFC），L 窗送往原子 b
ARMS = SubsystemDescriptor.path(TIME_BIN, ("reference", "atom-b"))

# (输出路径, PBS± 端口) → 探测器
DETECTOR_BY_PORT = {
    ("1", "+"): Detector.D1,
    ("1", "-"): Detector.D2,
    ("2", "-"): Detector.D3,
    ("2", "+"): Detector.D4,
}

PROTOCOL_NAME = "creation"


@dataclass(frozen=True)
class CreationResult:
    """
    一个预告结果
    herald 为 D1–D4、herald-fail 或 loss；成功时 final_state 为修正后的两原子态
    """

    herald: str
    probability: float
    correction: PauliWord | None = None
    final_state: JointState | MixedEnsemble | None = None
    fidelity: float | None = None

    @property
    def succeeded(self) -> bool:
        return self.herald in {d.value for d in Detector}


@dataclass(frozen=True)
class CreationReport:
    """枚举模式下的完整结果"""

    params: EmitterParams
    noise: NoiseParams
    wfc: bool
    spectral: bool
    p_s: float
    results: tuple[CreationResult, ...]
    success_probability: float
    herald_fail_probability: float
    loss_probability: float
    success_state: MixedEnsemble | None

    @property
    def fidelity(self) -> float | None:
        if self.success_state is None:
            return None
        return fidelity(self.success_state, target_state())

    def detector_probability(self, detector: Detector) -> float:
        return sum(r.probability for r in self.results if r.herald == Detector(detector).value)

    def summary(self) -> ProtocolSummary:
        extra = {f"p_{d.value}": self.detector_probability(d) for d in Detector}
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
    """光子 (|H⟩+|V⟩)/√2 在 S 窗，两个原子各为 (|0⟩+|1⟩)/√2"""
    return JointState.product(
        [
            (SubsystemDescriptor.polarization(PHOTON), (SQRT1_2, SQRT1_2)),
            (SubsystemDescriptor.time_bin(TIME_BIN), (1.0, 0.0)),
            (SubsystemDescriptor.atom(ATOM_A), (SQRT1_2, SQRT1_2)),
            (SubsystemDescriptor.atom(ATOM_B), (SQRT1_2, SQRT1_2)),
        ]
    )


def _corrector_stage(state: JointState, params: EmitterParams) -> list[HeraldBranch]:
    branches = waveform_corrector(state, params, pol_id=PHOTON, route=(TIME_BIN, 0))
    assert isinstance(branches, list)
    return branches


def _detect(state: JointState) -> list[tuple[str, float, JointState | None]]:
    """先确定输出路径，再经 PBS± 落到四个探测器之一"""
    outcomes: list[tuple[str, float, JointState | None]] = []
    for record, collapsed in measure(state, PATH):
        if collapsed is None:
            continue
        port = collapsed.descriptor(PATH).label(record.outcome)
        for sign, probability, absorbed in pm_detection(collapsed, PHOTON, PATH, record.outcome):
            outcomes.append((DETECTOR_BY_PORT[(port, sign)].value, record.probability * probability, absorbed))
    return outcomes


def _correct(state: JointState, outcomes: tuple[str, ...]) -> JointState:
    return apply_correction(state, ATOM_B, creation_correction(Detector(outcomes[-1])))


def creation_circuit(
    params: EmitterParams,
    noise: NoiseParams,
    runner: BranchRunner,
    wfc: bool = True,
) -> BranchRunner:
    """
    在 runner 上执行一次单色创建线路

    wfc=False 时去掉 WFC，散射模块也不再对未散射分量做匹配滤波。
    """
    runner.start(initial_state())
    runner.evolve(lambda s: pbs_hv(s, PHOTON, TIME_BIN, in_path=0, h_path=1, v_path=0))
    runner.herald(lambda s: heralded_scatter_block(s, ATOM_A, PHOTON, params, route=(TIME_BIN, 1), matched=wfc))
    runner.evolve(lambda s: apply_collective_noise(s, noise, PHOTON))
    runner.evolve(lambda s: tr_switch(s, TIME_BIN, {"S": 0, "L": 1}, ARMS))
    runner.herald(lambda s: heralded_scatter_block(s, ATOM_B, PHOTON, params, route=(TIME_BIN, 1), matched=wfc))
    if wfc:
        runner.herald(lambda s: _corrector_stage(s, params))
    runner.evolve(lambda s: tr_switch(s, TIME_BIN, {"reference": 0, "atom-b": 1}, SubsystemDescriptor.time_bin(TIME_BIN)))
    runner.evolve(lambda s: time_bin_to_path(s, TIME_BIN, PHOTON, SubsystemDescriptor.path(PATH)))
    runner.detect(_detect)
    runner.correct(_correct)
    return runner


def _result_from_branch(branch: Branch, weight: float) -> CreationResult:
    if branch.tag != HeraldTag.SUCCESS:
        return CreationResult(herald=branch.tag.value, probability=weight)
    detector = Detector(branch.outcomes[-1])
    return CreationResult(
        herald=detector.value,
        probability=weight,
        correction=creation_correction(detector),
        final_state=branch.state,
        fidelity=fidelity(branch.state, target_state()),
    )


def _enumerate(
    params: EmitterParams,
    noise: NoiseParams,
    wavepacket: SpectralWavepacket,
    wfc: bool,
    spectral: bool,
) -> CreationReport:
    totals = {tag: 0.0 for tag in HeraldTag}
    per_detector: dict[Detector, list[tuple[float, JointState]]] = {d: [] for d in Detector}

    for offset, amplitude in wavepacket.bins:
        bin_weight = abs(amplitude) ** 2
        if bin_weight == 0.0:
            continue
        runner = creation_circuit(params.shifted(offset), noise, BranchRunner(), wfc)
        for branch in runner.branches:
            weight = bin_weight * branch.weight
            totals[branch.tag] += weight
            if branch.tag == HeraldTag.SUCCESS and branch.state is not None and weight > 0.0:
                per_detector[Detector(branch.outcomes[-1])].append((weight, branch.state))

    results: list[CreationResult] = []
    success_pairs: list[tuple[float, JointState]] = []
    for detector, pairs in per_detector.items():
        if not pairs:
            continue
        probability = sum(w for w, _ in pairs)
        state: JointState | MixedEnsemble
        if len(pairs) == 1:
            state = pairs[0][1]
        else:
            state = MixedEnsemble(tuple((w / probability, s) for w, s in pairs))
        results.append(
            CreationResult(
                herald=detector.value,
                probability=probability,
                correction=creation_correction(detector),
                final_state=state,
                fidelity=fidelity(state, target_state()),
            )
        )
        success_pairs.extend(pairs)

    for tag in (HeraldTag.HERALD_FAIL, HeraldTag.LOSS):
        results.append(CreationResult(herald=tag.value, probability=totals[tag]))

    report = CreationReport(
        params=params,
        noise=noise,
        wfc=wfc,
        spectral=spectral,
        p_s=overlap_success_probability(wavepacket, params),
        results=tuple(results),
        success_probability=totals[HeraldTag.SUCCESS],
        herald_fail_probability=totals[HeraldTag.HERALD_FAIL],
        loss_probability=totals[HeraldTag.LOSS],
        success_state=MixedEnsemble(tuple(success_pairs)) if success_pairs else None,
    )
    logger.info(
        f"Creation enumerated: P={params.purcell}, detuning={params.detuning}, bins={len(wavepacket)}, "
        f"wfc={wfc}, success={report.success_probability:.12g}"
    )
    return report


def _sample(
    params: EmitterParams,
    noise: NoiseParams,
    wavepacket: SpectralWavepacket,
    wfc: bool,
    rng: np.random.Generator,
) -> CreationResult:
    weights = np.abs(wavepacket.amplitudes) ** 2
    index = 0
    if len(wavepacket) > 1:
        index = int(np.searchsorted(np.cumsum(weights), rng.random() * float(weights.sum()), side="right"))
        index = min(index, len(wavepacket) - 1)
    offset = float(wavepacket.detunings[index])

    runner = creation_circuit(params.shifted(offset), noise, BranchRunner(EvaluationMode.SAMPLE, rng), wfc)
    (branch,) = runner.branches
    return _result_from_branch(branch, float(weights[index]) * branch.weight)


def run_creation(
    params: EmitterParams,
    noise: NoiseParams | None = None,
    wavepacket: SpectralWavepacket | None = None,
    evaluation: EvaluationMode = EvaluationMode.ENUMERATE,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    wfc: bool = True,
) -> CreationReport | CreationResult:
    """
    运行纠缠创建

    Args:
        params: 发射体参数
        noise: 信道集体噪声（默认无噪声）
        wavepacket: 频谱波包；为空表示单色光子
        evaluation: enumerate 返回 CreationReport，sample 返回一次 CreationResult
        seed: sample 模式的种子（未提供 rng 时使用）
        rng: sample 模式的随机数发生器
        wfc: 是否启用波形校正

    Returns:
        CreationReport 或 CreationResult
    """
    noise = noise or NoiseParams.identity()
    spectral = wavepacket is not None
    wavepacket = wavepacket or SpectralWavepacket.single_bin()
    if not wavepacket.is_normalized:
        raise ParameterError("creation needs a normalized wavepacket", {"norm_squared": wavepacket.norm_squared})

    if EvaluationMode(evaluation) == EvaluationMode.ENUMERATE:
        return _enumerate(params, noise, wavepacket, wfc, spectral)

    if rng is None:
        if seed is None:
            raise ParameterError("sample mode needs a seed")
        rng = np.random.default_rng(seed)
    return _sample(params, noise, wavepacket, wfc, rng)
