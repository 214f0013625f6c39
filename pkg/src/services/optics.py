"""
线性光学元件与预告散射模块
PBS（H/V 与 ±）、四分之一波片、TR 开关、时间窗合束，以及三分支的散射模块和波形校正器

编码：偏振 |0⟩=H、|1⟩=V；原子 |0⟩=g−、|1⟩=g+；路径寄存器 |0⟩、|1⟩ 为两条空间模式。
"""

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from src.core.exceptions import ParameterError, StateError
from src.core.models import (
    EmitterParams,
    EvaluationMode,
    FilterSide,
    HeraldTag,
    MeasurementBasis,
    ScatterCoefficients,
)
from src.services.scattering import SpectralWavepacket, compute_coefficients, filter_wavepacket
from src.services.state_engine import (
    HADAMARD,
    NORM_ATOL,
    PAULI_X,
    JointState,
    SubsystemDescriptor,
    apply_local_unitary,
    apply_operator,
    measure,
    relabel,
)

logger = logging.getLogger(__name__)

H, V = 0, 1

# QWP：|H⟩→|R⟩=(|H⟩+|V⟩)/√2，|V⟩→|L⟩=(|H⟩−|V⟩)/√2，自逆
QWP_MATRIX = HADAMARD

# 模块成功算符中的原子相位：g− 取 −1，g+ 取 +1
ATOM_PHASE = np.diag([-1.0, 1.0]).astype(complex)
POLARIZATION_FLIP = PAULI_X

# (路径, 偏振) 上的一个光子模式
Route = tuple[str, int]


@dataclass(frozen=True)
class HeraldBranch:
    """
    散射模块的一个输出分支
    weight 为该分支的绝对概率（输出态的 norm²），三个分支之和等于输入 norm²
    """

    tag: HeraldTag
    weight: float
    state: JointState | None


def _mode_index(path: int, polarization: int) -> int:
    return 2 * path + polarization


def _routing_matrix(mapping: Mapping[int, int]) -> np.ndarray:
    """
    由 (路径, 偏振) 的部分映射构造 4×4 置换矩阵
    未指定的输入按升序补到剩余的输出上，保证幺正
    """
    sources = list(mapping)
    targets = list(mapping.values())
    if len(set(targets)) != len(targets):
        raise ParameterError("routing sends two modes to the same output", {"mapping": dict(mapping)})
    free_sources = [i for i in range(4) if i not in sources]
    free_targets = [i for i in range(4) if i not in targets]
    full = dict(mapping) | dict(zip(free_sources, free_targets))

    matrix = np.zeros((4, 4), dtype=complex)
    for source, target in full.items():
        matrix[target, source] = 1.0
    return matrix


def _require_path(state: JointState, path_id: str, path: int) -> None:
    tensor = state.tensor()
    stray = np.take(tensor, 1 - path, axis=state.index(path_id))
    if float(np.vdot(stray, stray).real) > NORM_ATOL * state.norm_squared:
        raise StateError(f"photon is not on path {path} of {path_id!r}")


def _check_path_value(*values: int) -> None:
    if any(v not in (0, 1) for v in values):
        raise ParameterError("path values must be 0 or 1", {"values": list(values)})


def pbs_hv_matrix(in_path: int, h_path: int, v_path: int) -> np.ndarray:
    """pbs_hv 在 (路径, 偏振) 上的 4×4 矩阵"""
    _check_path_value(in_path, h_path, v_path)
    return _routing_matrix(
        {
            _mode_index(in_path, H): _mode_index(h_path, H),
            _mode_index(in_path, V): _mode_index(v_path, V),
        }
    )


def pbs_hv_join_matrix(h_path: int, v_path: int, out_path: int) -> np.ndarray:
    """pbs_hv_join 在 (路径, 偏振) 上的 4×4 矩阵"""
    _check_path_value(h_path, v_path, out_path)
    return _routing_matrix(
        {
            _mode_index(h_path, H): _mode_index(out_path, H),
            _mode_index(v_path, V): _mode_index(out_path, V),
        }
    )


def pbs_pm_matrix(in_path: int, plus_path: int, minus_path: int) -> np.ndarray:
    """±基的分束器：在偏振上用 Hadamard 共轭 pbs_hv"""
    rotation = np.kron(np.eye(2, dtype=complex), HADAMARD)
    return rotation @ pbs_hv_matrix(in_path, plus_path, minus_path) @ rotation


def pbs_hv(state: JointState, pol_id: str, path_id: str, in_path: int, h_path: int, v_path: int) -> JointState:
    """
    偏振分束器：H 分量走 h_path，V 分量走 v_path，偏振振幅不变

    Raises:
        StateError: 光子不在 in_path 上
    """
    matrix = pbs_hv_matrix(in_path, h_path, v_path)
    _require_path(state, path_id, in_path)
    return apply_local_unitary(state, [path_id, pol_id], matrix)


def pbs_hv_join(state: JointState, pol_id: str, path_id: str, h_path: int, v_path: int, out_path: int) -> JointState:
    """
    偏振分束器的合束方向：h_path 上的 H 与 v_path 上的 V 一起从 out_path 输出
    偏振不匹配的分量从另一个端口离开
    """
    return apply_local_unitary(state, [path_id, pol_id], pbs_hv_join_matrix(h_path, v_path, out_path))


def pbs_pm(
    state: JointState,
    pol_id: str,
    path_id: str,
    in_path: int,
    plus_path: int,
    minus_path: int,
) -> JointState:
    """±基下的偏振分束器：|+⟩ 走 plus_path，|−⟩ 走 minus_path"""
    matrix = pbs_pm_matrix(in_path, plus_path, minus_path)
    _require_path(state, path_id, in_path)
    return apply_local_unitary(state, [path_id, pol_id], matrix)


def qwp(state: JointState, pol_id: str) -> JointState:
    """四分之一波片：|V⟩ ↔ |L⟩，|H⟩ ↔ |R⟩"""
    return apply_local_unitary(state, [pol_id], QWP_MATRIX)


def qwp_inverse(state: JointState, pol_id: str) -> JointState:
    return apply_local_unitary(state, [pol_id], QWP_MATRIX.conj().T)


def tr_switch(
    state: JointState,
    register_id: str,
    schedule: Mapping[str, int],
    descriptor: SubsystemDescriptor | None = None,
) -> JointState:
    """
    TR 开关：按时间表把 S/L 两个时间窗分别送往输出路径 0/1

    Args:
        state: 输入态
        register_id: 时间窗（或路径）寄存器
        schedule: 标签 → 输出路径，例如 {"S": 0, "L": 1}
        descriptor: 输出寄存器的新描述（为空则保持原标签）

    Raises:
        ParameterError: 时间表没有覆盖两个时间窗或不是一一对应
    """
    labels = state.descriptor(register_id).labels
    missing = [label for label in labels if label not in schedule]
    if missing:
        raise ParameterError("unscheduled bin", {"register": register_id, "missing": missing})
    targets = [schedule[label] for label in labels]
    if sorted(targets) != [0, 1]:
        raise ParameterError("schedule must send the two bins to distinct paths", {"schedule": dict(schedule)})

    routed = state
    if targets == [1, 0]:
        routed = apply_local_unitary(state, [register_id], PAULI_X)
    if descriptor is not None:
        routed = relabel(routed, register_id, descriptor)
    return routed


def time_bin_to_path(
    state: JointState,
    bin_id: str,
    pol_id: str,
    path: SubsystemDescriptor | None = None,
) -> JointState:
    """
    PBS 合束两个时间窗：(S,V)、(L,H) 进入路径 1，(S,H)、(L,V) 进入路径 2
    合束后时间窗寄存器重新解释为路径寄存器
    """
    matrix = _routing_matrix(
        {
            _mode_index(0, V): _mode_index(0, V),
            _mode_index(1, H): _mode_index(0, H),
            _mode_index(0, H): _mode_index(1, H),
            _mode_index(1, V): _mode_index(1, V),
        }
    )
    merged = apply_local_unitary(state, [bin_id, pol_id], matrix)
    return relabel(merged, bin_id, path or SubsystemDescriptor.path(bin_id))


def _projector(value: int) -> np.ndarray:
    matrix = np.zeros((2, 2), dtype=complex)
    matrix[value, value] = 1.0
    return matrix


def _routed_kraus(on_route: np.ndarray, off_route: np.ndarray, route_value: int) -> np.ndarray:
    return np.kron(_projector(route_value), on_route) + np.kron(_projector(1 - route_value), off_route)


def block_operators(
    coefficients: ScatterCoefficients,
    route_value: int | None = None,
    matched: bool = True,
) -> dict[HeraldTag, np.ndarray]:
    """
    散射模块的 Kraus 算符

    不指定路径时作用在 (原子, 偏振) 上：
        success = r·diag(−1, +1) ⊗ X，herald-fail = t·I，loss = √loss·I
    指定路径时作用在 (路径, 原子, 偏振) 上，原子只在 route_value 分量上散射；
    matched 时另一分量经过同样的空间滤波（成功 r·I、失败 t·I），
    否则原样通过且不产生失败或损耗。

    Args:
        coefficients: 散射系数
        route_value: 原子所在的路径值
        matched: 非散射分量是否经过匹配滤波

    Returns:
        {标签: Kraus 矩阵}
    """
    identity = np.eye(4, dtype=complex)
    loss_amplitude = math.sqrt(coefficients.loss)
    success = coefficients.r * np.kron(ATOM_PHASE, POLARIZATION_FLIP)
    fail = coefficients.t * identity
    loss = loss_amplitude * identity
    if route_value is None:
        return {HeraldTag.SUCCESS: success, HeraldTag.HERALD_FAIL: fail, HeraldTag.LOSS: loss}

    _check_path_value(route_value)
    if matched:
        off = {HeraldTag.SUCCESS: coefficients.r * identity, HeraldTag.HERALD_FAIL: fail, HeraldTag.LOSS: loss}
    else:
        zero = np.zeros((4, 4), dtype=complex)
        off = {HeraldTag.SUCCESS: identity, HeraldTag.HERALD_FAIL: zero, HeraldTag.LOSS: zero}
    on = {HeraldTag.SUCCESS: success, HeraldTag.HERALD_FAIL: fail, HeraldTag.LOSS: loss}
    return {tag: _routed_kraus(on[tag], off[tag], route_value) for tag in on}


def corrector_operators(
    coefficients: ScatterCoefficients,
    route_value: int | None = None,
    matched: bool = True,
) -> dict[HeraldTag, np.ndarray]:
    """波形校正器的 Kraus 算符（辅助原子固定在 g−，不与光子纠缠）：success = r·I"""
    identity = np.eye(2, dtype=complex)
    loss_amplitude = math.sqrt(coefficients.loss)
    on = {
        HeraldTag.SUCCESS: coefficients.r * identity,
        HeraldTag.HERALD_FAIL: coefficients.t * identity,
        HeraldTag.LOSS: loss_amplitude * identity,
    }
    if route_value is None:
        return on

    _check_path_value(route_value)
    if matched:
        off = on
    else:
        zero = np.zeros((2, 2), dtype=complex)
        off = {HeraldTag.SUCCESS: identity, HeraldTag.HERALD_FAIL: zero, HeraldTag.LOSS: zero}
    return {tag: _routed_kraus(on[tag], off[tag], route_value) for tag in on}


def _branches(state: JointState, targets: list[str], operators: dict[HeraldTag, np.ndarray]) -> list[HeraldBranch]:
    branches = []
    for tag in (HeraldTag.SUCCESS, HeraldTag.HERALD_FAIL, HeraldTag.LOSS):
        output = apply_operator(state, targets, operators[tag])
        weight = 0.0 if output is None else output.norm_squared
        if tag == HeraldTag.LOSS:
            output = None
        branches.append(HeraldBranch(tag=tag, weight=weight, state=output))
    return branches


def heralded_scatter_block(
    state: JointState,
    atom_id: str,
    pol_id: str,
    params: EmitterParams,
    route: Route | None = None,
    matched: bool = True,
) -> list[HeraldBranch]:
    """
    预告散射模块：成功时光子偏振翻转并在原子上施加条件相位

    Args:
        state: 输入态
        atom_id: 原子子系统
        pol_id: 光子偏振子系统
        params: 发射体参数
        route: (路径寄存器, 值)，原子所在的空间模式；为空表示整个光子都进入模块
        matched: 见 block_operators

    Returns:
        [success, herald-fail, loss] 三个分支，loss 分支不携带态

    Raises:
        StateError: 光子在原子所在路径上没有振幅
    """
    coefficients = compute_coefficients(params)
    if route is None:
        return _branches(state, [atom_id, pol_id], block_operators(coefficients))

    path_id, path_value = route
    tensor = state.tensor()
    present = np.take(tensor, path_value, axis=state.index(path_id))
    if float(np.vdot(present, present).real) == 0.0:
        raise StateError("photon is not present in the block's path", {"route": list(route)})
    operators = block_operators(coefficients, path_value, matched)
    return _branches(state, [path_id, atom_id, pol_id], operators)


def waveform_corrector(
    target: JointState | SpectralWavepacket,
    params: EmitterParams,
    pol_id: str | None = None,
    route: Route | None = None,
    matched: bool = True,
) -> list[HeraldBranch] | SpectralWavepacket:
    """
    波形校正器（WFC）

    频谱模式：每个格点乘以 r(Δ_bin)，返回滤波后的波包。
    单色模式：与散射模块相同的三分支，成功分支振幅乘以 r，不与任何原子纠缠。
    """
    if isinstance(target, SpectralWavepacket):
        return filter_wavepacket(target, params, FilterSide.REFLECTED)

    if pol_id is None:
        raise ParameterError("waveform corrector on a joint state needs the photon polarization id")
    coefficients = compute_coefficients(params)
    if route is None:
        return _branches(target, [pol_id], corrector_operators(coefficients))
    path_id, path_value = route
    return _branches(target, [path_id, pol_id], corrector_operators(coefficients, path_value, matched))


@dataclass(frozen=True)
class PrimitiveBlockOutput:
    """由 BS 与双侧散射拼出的模块输出：两个端口上的 (H, V) 振幅"""

    port1: np.ndarray
    port2: np.ndarray

    @property
    def port2_weight(self) -> float:
        return float(np.vdot(self.port2, self.port2).real)


def assemble_block_from_primitives(
    coefficients: ScatterCoefficients,
    atom_value: int,
    polarization: tuple[complex, complex] = (1.0, 0.0),
) -> PrimitiveBlockOutput:
    """
    从 50:50 BS 和双侧散射重建预告模块（只用于验证模块的三分支契约）

    光子从端口 1 进入，BS 分成两臂同时打到原子上。g+ 只与 R 耦合，g− 只与 L 耦合：
    耦合分量在本臂反射 r、穿到另一臂 t；不耦合分量直接穿过。两臂回到 BS 后重新合束。

    Args:
        coefficients: 散射系数
        atom_value: 原子基态（0=g−，1=g+）
        polarization: 输入偏振振幅 (H, V)

    Returns:
        端口 1、2 上的 (H, V) 振幅
    """
    if atom_value not in (0, 1):
        raise ParameterError("atom_value must be 0 or 1", {"atom_value": atom_value})

    # H/V → R/L：R = (H+V)/√2，L = (H−V)/√2
    circular = HADAMARD @ np.asarray(polarization, dtype=complex)
    coupled = 0 if atom_value == 1 else 1
    r, t = coefficients.r, coefficients.t

    port1 = np.zeros(2, dtype=complex)
    port2 = np.zeros(2, dtype=complex)
    for component, amplitude in enumerate(circular):
        arm3 = arm4 = amplitude / math.sqrt(2.0)
        if component == coupled:
            back3, back4 = r * arm3 + t * arm4, r * arm4 + t * arm3
        else:
            back3, back4 = arm4, arm3
        port1[component] = (back3 + back4) / math.sqrt(2.0)
        port2[component] = (back3 - back4) / math.sqrt(2.0)

    return PrimitiveBlockOutput(port1=HADAMARD @ port1, port2=HADAMARD @ port2)


def pm_detection(
    state: JointState,
    pol_id: str,
    path_id: str,
    in_path: int,
    mode: EvaluationMode = EvaluationMode.ENUMERATE,
    rng: np.random.Generator | None = None,
) -> list[tuple[str, float, JointState | None]]:
    """
    PBS± 后接两个单光子探测器：返回 ("+"/"-", 条件概率, 吸收光子后的态)

    光子被吸收，偏振与路径寄存器都从态中移除。
    """
    routed = pbs_pm(state, pol_id, path_id, in_path, plus_path=0, minus_path=1)
    outcomes = []
    detections = measure(routed, path_id, MeasurementBasis.COMPUTATIONAL, EvaluationMode(mode), rng, discard=True)
    for record, collapsed in detections:
        label = "+" if record.outcome == 0 else "-"
        if collapsed is None:
            outcomes.append((label, record.probability, None))
            continue
        # 偏振已确定为 |±⟩，吸收时概率为 1
        absorbed = measure(collapsed, pol_id, MeasurementBasis.HADAMARD, discard=True)[record.outcome][1]
        outcomes.append((label, record.probability, absorbed))
    return outcomes
