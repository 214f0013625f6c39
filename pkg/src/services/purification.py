"""
纠缠提纯
Alice、Bob 各用一个光子对本地两个原子做宇称测量，符合计数决定保留或丢弃，
保留时对 a2、b2 做 Hadamard 测量并按结果在 a1 上作用 σ_z

输入 ρ⊗ρ，ρ = F|φ+⟩⟨φ+| + (1−F)|ψ+⟩⟨ψ+|；保留时 F′ = F²/(F²+(1−F)²)
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.core.exceptions import ParameterError
from src.core.models import (
    Detector,
    EmitterParams,
    EvaluationMode,
    HeraldTag,
    MeasurementBasis,
    PauliWord,
    ProtocolSummary,
)
from src.services.corrections import apply_correction, pauli_matrix, purification_correction
from src.services.density_oracle import (
    DensityState,
    apply_operator_rho,
    apply_unitary_rho,
    density_matrix,
    extend_rho,
    partial_trace,
    project_rho,
)
from src.services.optics import (
    block_operators,
    heralded_scatter_block,
    pbs_hv,
    pbs_hv_join,
    pbs_hv_join_matrix,
    pbs_hv_matrix,
    pbs_pm_matrix,
    pm_detection,
)
from src.services.protocols import (
    Branch,
    BranchRunner,
    purification_fidelity_map,
    purification_keep_probability,
    validate_fidelity,
)
from src.services.scattering import ScatterCoefficients, compute_coefficients, reflection_probability
from src.services.state_engine import (
    HADAMARD,
    SQRT1_2,
    JointState,
    MixedEnsemble,
    SubsystemDescriptor,
    apply_local_unitary,
    bell_state,
    compose,
    fidelity,
    measure,
)

logger = logging.getLogger(__name__)

PROTOCOL_NAME = "purify"

ATOM_A1, ATOM_B1, ATOM_A2, ATOM_B2 = "a1", "b1", "a2", "b2"


@dataclass(frozen=True)
class Party:
    """一方的光子与本地两个原子；V 分量去 first_atom，H 分量去 second_atom"""

    photon: str
    arm: str
    first_atom: str
    second_atom: str
    plus: Detector
    minus: Detector


ALICE = Party(photon="pa", arm="arm_a", first_atom=ATOM_A1, second_atom=ATOM_A2, plus=Detector.D1, minus=Detector.D2)
BOB = Party(photon="pb", arm="arm_b", first_atom=ATOM_B1, second_atom=ATOM_B2, plus=Detector.D3, minus=Detector.D4)
PARTIES = (ALICE, BOB)

# 臂寄存器：0 经过第一个原子，1 经过第二个原子
FIRST_ARM, SECOND_ARM = 0, 1

KEPT_COINCIDENCES = frozenset({"D1D3", "D2D4"})
DISCARDED_COINCIDENCES = frozenset({"D1D4", "D2D3"})

INPUT_CASES = ("phi+phi+", "phi+psi+", "psi+phi+", "psi+psi+")


@dataclass(frozen=True)
class PurifyResult:
    """一次提纯的结果；kept 为 True 时 final_state 为修正后的 (a1, b1)"""

    herald: str
    probability: float
    input_case: str | None = None
    coincidence: str | None = None
    kept: bool = False
    a2_outcome: int | None = None
    b2_outcome: int | None = None
    correction: PauliWord | None = None
    final_state: JointState | None = None
    output_fidelity: float | None = None


@dataclass(frozen=True)
class PurificationReport:
    """枚举模式的精确结果"""

    input_fidelity: float
    params: EmitterParams
    p_s: float
    results: tuple[PurifyResult, ...]
    success_probability: float
    herald_fail_probability: float
    loss_probability: float
    kept_probability: float
    output_state: MixedEnsemble | None

    @property
    def keep_probability(self) -> float:
        """散射全部成功条件下的保留概率"""
        if self.success_probability == 0.0:
            return 0.0
        return self.kept_probability / self.success_probability

    @property
    def output_fidelity(self) -> float | None:
        if self.output_state is None:
            return None
        return fidelity(self.output_state, target_state())

    def summary(self) -> ProtocolSummary:
        extra = {
            "F_in": self.input_fidelity,
            "F_expected": purification_fidelity_map(self.input_fidelity),
            "keep_probability": self.keep_probability,
            "kept_probability": self.kept_probability,
            "p_s": self.p_s,
        }
        if self.output_fidelity is not None:
            extra["F_out"] = self.output_fidelity
        return ProtocolSummary(
            protocol=PROTOCOL_NAME,
            mode=EvaluationMode.ENUMERATE,
            success_probability=self.success_probability,
            herald_fail_probability=self.herald_fail_probability,
            loss_probability=self.loss_probability,
            fidelity=self.output_fidelity,
            extra=extra,
        )


@dataclass(frozen=True)
class PurificationStatistics:
    """抽样模式的统计结果"""

    input_fidelity: float
    trials: int
    counts: dict[str, int] = field(default_factory=dict)
    fidelity_sum: float = 0.0

    def count(self, key: str) -> int:
        return self.counts.get(key, 0)

    @property
    def kept(self) -> int:
        return self.count("kept")

    @property
    def discarded(self) -> int:
        return self.count("discarded")

    @property
    def scattered(self) -> int:
        return self.kept + self.discarded

    @property
    def keep_frequency(self) -> float:
        return self.kept / self.scattered if self.scattered else 0.0

    @property
    def output_fidelity(self) -> float | None:
        return self.fidelity_sum / self.kept if self.kept else None

    def summary(self) -> ProtocolSummary:
        extra: dict[str, float] = {
            "F_in": self.input_fidelity,
            "keep_probability": self.keep_frequency,
            "trials": float(self.trials),
        }
        if self.output_fidelity is not None:
            extra["F_out"] = self.output_fidelity
        return ProtocolSummary(
            protocol=PROTOCOL_NAME,
            mode=EvaluationMode.SAMPLE,
            success_probability=self.scattered / self.trials,
            herald_fail_probability=self.count(HeraldTag.HERALD_FAIL.value) / self.trials,
            loss_probability=self.count(HeraldTag.LOSS.value) / self.trials,
            fidelity=self.output_fidelity,
            extra=extra,
        )


def target_state() -> JointState:
    """|φ+⟩_{a1b1}"""
    return bell_state(SubsystemDescriptor.atom(ATOM_A1), SubsystemDescriptor.atom(ATOM_B1), "phi+")


def _photon(party: Party) -> JointState:
    return JointState.product(
        [
            (SubsystemDescriptor.polarization(party.photon), (SQRT1_2, SQRT1_2)),
            (SubsystemDescriptor.path(party.arm, (party.first_atom, party.second_atom)), (1.0, 0.0)),
        ]
    )


def atom_cases(fidelity_in: float) -> list[tuple[float, JointState, str]]:
    """
    四种输入情形：(权重, 四个原子的初态, 名称)

    (a1,b1)、(a2,b2) 各自为 |φ+⟩（概率 F）或 |ψ+⟩（概率 1−F）
    """
    validate_fidelity(fidelity_in)
    kinds = {"phi+": fidelity_in, "psi+": 1.0 - fidelity_in}
    atom = SubsystemDescriptor.atom
    cases = []
    for first in ("phi+", "psi+"):
        for second in ("phi+", "psi+"):
            state = compose(
                bell_state(atom(ATOM_A1), atom(ATOM_B1), first),  # type: ignore[arg-type]
                bell_state(atom(ATOM_A2), atom(ATOM_B2), second),  # type: ignore[arg-type]
            )
            cases.append((kinds[first] * kinds[second], state, f"{first}{second}"))
    return cases


def input_cases(fidelity_in: float) -> list[tuple[float, JointState, str]]:
    """四种输入情形加上双方的光子（8 个量子比特）"""
    return [(w, compose(s, _photon(ALICE), _photon(BOB)), case) for w, s, case in atom_cases(fidelity_in)]


def _detect(party: Party):
    def detect(state: JointState) -> list[tuple[str, float, JointState | None]]:
        labels = {"+": party.plus.value, "-": party.minus.value}
        return [(labels[sign], p, s) for sign, p, s in pm_detection(state, party.photon, party.arm, in_path=0)]

    return detect


def _measure_second_atoms(state: JointState) -> list[tuple[str, float, JointState | None]]:
    """a2、b2 先做 Hadamard 再在计算基测量"""
    outcomes: list[tuple[str, float, JointState | None]] = []
    rotated = apply_local_unitary(state, [ATOM_A2], HADAMARD)
    rotated = apply_local_unitary(rotated, [ATOM_B2], HADAMARD)
    for record_a, collapsed_a in measure(rotated, ATOM_A2, discard=True):
        if collapsed_a is None:
            continue
        for record_b, collapsed_b in measure(collapsed_a, ATOM_B2, discard=True):
            probability = record_a.probability * record_b.probability
            outcomes.append((f"{record_a.outcome}{record_b.outcome}", probability, collapsed_b))
    return outcomes


def _coincidence(outcomes: tuple[str, ...]) -> str:
    return f"{outcomes[1]}{outcomes[2]}"


def _correct(state: JointState, outcomes: tuple[str, ...]) -> JointState:
    if _coincidence(outcomes) not in KEPT_COINCIDENCES:
        return state
    a2, b2 = int(outcomes[3][0]), int(outcomes[3][1])
    return apply_correction(state, ATOM_A1, purification_correction(a2, b2))


def _parity_detection(runner: BranchRunner, params: EmitterParams) -> BranchRunner:
    """双方各自的宇称测量：分束、两个散射模块、合束、PBS± 探测"""
    for party in PARTIES:
        runner.evolve(
            lambda s, p=party: pbs_hv(s, p.photon, p.arm, in_path=0, h_path=SECOND_ARM, v_path=FIRST_ARM)
        )
        runner.herald(
            lambda s, p=party: heralded_scatter_block(s, p.first_atom, p.photon, params, route=(p.arm, FIRST_ARM))
        )
        runner.herald(
            lambda s, p=party: heralded_scatter_block(s, p.second_atom, p.photon, params, route=(p.arm, SECOND_ARM))
        )
        # 散射后第一臂为 H、第二臂为 V
        runner.evolve(
            lambda s, p=party: pbs_hv_join(s, p.photon, p.arm, h_path=FIRST_ARM, v_path=SECOND_ARM, out_path=0)
        )
    for party in PARTIES:
        runner.detect(_detect(party))
    return runner


def purification_circuit(fidelity_in: float, params: EmitterParams, runner: BranchRunner) -> BranchRunner:
    """在 runner 上执行提纯线路（输入为四种情形的混合）"""
    runner.start_ensemble(input_cases(fidelity_in))
    _parity_detection(runner, params)
    runner.detect(_measure_second_atoms)
    runner.correct(_correct)
    return runner


def _result_from_branch(branch: Branch) -> PurifyResult:
    case = branch.outcomes[0] if branch.outcomes else None
    if branch.tag != HeraldTag.SUCCESS or branch.state is None:
        return PurifyResult(herald=branch.tag.value, probability=branch.weight, input_case=case)

    coincidence = _coincidence(branch.outcomes)
    kept = coincidence in KEPT_COINCIDENCES
    a2, b2 = int(branch.outcomes[3][0]), int(branch.outcomes[3][1])
    return PurifyResult(
        herald="kept" if kept else "discarded",
        probability=branch.weight,
        input_case=case,
        coincidence=coincidence,
        kept=kept,
        a2_outcome=a2,
        b2_outcome=b2,
        correction=purification_correction(a2, b2) if kept else None,
        final_state=branch.state if kept else None,
        output_fidelity=fidelity(branch.state, target_state()) if kept else None,
    )


def _enumerate(fidelity_in: float, params: EmitterParams) -> PurificationReport:
    runner = purification_circuit(fidelity_in, params, BranchRunner())
    results = [_result_from_branch(b) for b in runner.branches if b.tag == HeraldTag.SUCCESS]
    kept_pairs = [(r.probability, r.final_state) for r in results if r.kept and r.final_state is not None and r.probability > 0]
    for tag in (HeraldTag.HERALD_FAIL, HeraldTag.LOSS):
        results.append(PurifyResult(herald=tag.value, probability=runner.total(tag)))

    kept_probability = sum(w for w, _ in kept_pairs)
    output_state = None
    if kept_pairs:
        output_state = MixedEnsemble(tuple((w / kept_probability, s) for w, s in kept_pairs))

    report = PurificationReport(
        input_fidelity=fidelity_in,
        params=params,
        p_s=reflection_probability(params),
        results=tuple(results),
        success_probability=runner.total(HeraldTag.SUCCESS),
        herald_fail_probability=runner.total(HeraldTag.HERALD_FAIL),
        loss_probability=runner.total(HeraldTag.LOSS),
        kept_probability=kept_probability,
        output_state=output_state,
    )
    logger.info(
        f"Purification enumerated: F={fidelity_in}, P={params.purcell}, "
        f"keep={report.keep_probability:.12g}, F_out={report.output_fidelity}"
    )
    return report


def sample_purification(fidelity_in: float, params: EmitterParams, rng: np.random.Generator) -> PurifyResult:
    """抽样一次完整的提纯（包括输入情形）"""
    runner = purification_circuit(fidelity_in, params, BranchRunner(EvaluationMode.SAMPLE, rng))
    (branch,) = runner.branches
    return _result_from_branch(branch)


def run_purification(
    fidelity_in: float,
    params: EmitterParams,
    evaluation: EvaluationMode = EvaluationMode.ENUMERATE,
    seed: int | None = None,
    trials: int | None = None,
    workers: int | None = None,
) -> PurificationReport | PurificationStatistics:
    """
    运行纠缠提纯

    Args:
        fidelity_in: 输入保真度 F ∈ (0, 1]
        params: 发射体参数
        evaluation: enumerate 返回精确的 PurificationReport；sample 返回 PurificationStatistics
        seed: sample 模式的种子
        trials: sample 模式的试验次数
        workers: sample 模式的并行进程数

    Returns:
        PurificationReport 或 PurificationStatistics
    """
    validate_fidelity(fidelity_in)
    if EvaluationMode(evaluation) == EvaluationMode.ENUMERATE:
        return _enumerate(fidelity_in, params)

    if seed is None:
        raise ParameterError("sample mode needs a seed")
    from src.services.trials import TrialSpec, run_trials

    spec = TrialSpec(protocol=PROTOCOL_NAME, params=params, fidelity=fidelity_in)
    statistics = run_trials(spec, seed=seed, trials=trials, workers=workers)
    return PurificationStatistics(
        input_fidelity=fidelity_in,
        trials=statistics.trials,
        counts=dict(statistics.counts),
        fidelity_sum=statistics.fidelity_sum,
    )


def purification_coincidence_table(params: EmitterParams | None = None) -> dict[str, frozenset[str]]:
    """
    穷举每种输入情形会触发哪些符合计数

    Returns:
        {输入情形: 出现概率大于 0 的符合计数集合}
    """
    params = params or EmitterParams(purcell=float("inf"))
    table: dict[str, frozenset[str]] = {}
    # 每种情形单独运行，F 取任何值时四种情形都出现
    for weight, state, case in input_cases(0.5):
        runner = BranchRunner().start_ensemble([(weight, state, case)])
        _parity_detection(runner, params)
        table[case] = frozenset(_coincidence(b.outcomes) for b in runner.successes())
    return table


def _party_branch(rho: DensityState, party: Party, port: int, coefficients: ScatterCoefficients) -> DensityState:
    """一方的宇称测量：加入光子、两次成功散射、合束，投影到探测端口后丢弃光子"""
    rho = extend_rho(rho, _photon(party))
    rho = apply_unitary_rho(rho, [party.arm, party.photon], pbs_hv_matrix(0, SECOND_ARM, FIRST_ARM))
    for atom, arm in ((party.first_atom, FIRST_ARM), (party.second_atom, SECOND_ARM)):
        success = block_operators(coefficients, arm, matched=True)[HeraldTag.SUCCESS]
        rho = apply_operator_rho(rho, [party.arm, atom, party.photon], success)
    rho = apply_unitary_rho(rho, [party.arm, party.photon], pbs_hv_join_matrix(FIRST_ARM, SECOND_ARM, 0))
    rho = apply_unitary_rho(rho, [party.arm, party.photon], pbs_pm_matrix(0, 0, 1))
    rho = project_rho(rho, party.arm, port, discard=True)
    return project_rho(rho, party.photon, port, MeasurementBasis.HADAMARD, discard=True)


def propagate_purification_density(fidelity_in: float, params: EmitterParams) -> tuple[DensityState, float]:
    """
    在密度矩阵上执行完整提纯线路（散射全部成功、符合计数保留、修正后对其余子系统求迹）

    光子逐个加入再逐个探测，ρ 最多 6 个量子比特

    Returns:
        (归一化的 ρ_{a1b1}, 保留的绝对概率)
    """
    validate_fidelity(fidelity_in)
    cases = [(w, s.normalized()) for w, s, _ in atom_cases(fidelity_in) if w > 0.0]
    rho = density_matrix(MixedEnsemble(tuple(cases)))
    coefficients = compute_coefficients(params)

    keep = [ATOM_A1, ATOM_B1]
    output = np.zeros((4, 4), dtype=complex)
    # 保留的符合计数 D1D3、D2D4 要求双方落在同一端口
    for port in (0, 1):
        branch = rho
        for party in PARTIES:
            branch = _party_branch(branch, party, port, coefficients)
        for a2 in (0, 1):
            for b2 in (0, 1):
                measured = project_rho(branch, ATOM_A2, a2, MeasurementBasis.HADAMARD, discard=True)
                measured = project_rho(measured, ATOM_B2, b2, MeasurementBasis.HADAMARD, discard=True)
                word = purification_correction(a2, b2)
                if word != PauliWord.I:
                    measured = apply_unitary_rho(measured, [ATOM_A1], pauli_matrix(word))
                output = output + partial_trace(measured, keep).matrix

    kept = float(np.trace(output).real)
    if kept <= 0.0:
        raise ParameterError("no purification branch is kept", {"fidelity": fidelity_in})
    subsystems = (SubsystemDescriptor.atom(ATOM_A1), SubsystemDescriptor.atom(ATOM_B1))
    logger.debug(f"Density propagation kept probability: {kept:.12g}")
    return DensityState(subsystems, output / kept), kept


def expected_keep_probability(fidelity_in: float, params: EmitterParams) -> float:
    """p_s⁴ · (F² + (1−F)²)"""
    return reflection_probability(params) ** 4 * purification_keep_probability(fidelity_in)
