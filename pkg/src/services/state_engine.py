"""
量子态引擎
在二能级子系统的张量积上维护（未归一化的）纯态：组合、局部算符、测量、保真度

振幅按子系统顺序大端排列，第一个子系统对应最高位。
分支概率保存在态的 norm² 中，只有测量坍缩时才重新归一化。
"""

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.core.config import settings
from src.core.exceptions import NonUnitaryError, ParameterError, StateError, SubsystemError
from src.core.models import EvaluationMode, MeasurementBasis, MeasurementRecord, SubsystemKind

logger = logging.getLogger(__name__)

SQRT1_2 = 1.0 / math.sqrt(2.0)

# 态范数容差（norm² ≤ 1 + NORM_ATOL）
NORM_ATOL = 1e-12

# 一般线性算符最多作用的子系统数
MAX_OPERATOR_QUBITS = 3
MAX_UNITARY_QUBITS = 2


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix.setflags(write=False)
    return matrix


IDENTITY = _frozen(np.eye(2, dtype=complex))
PAULI_X = _frozen(np.array([[0, 1], [1, 0]], dtype=complex))
PAULI_Z = _frozen(np.array([[1, 0], [0, -1]], dtype=complex))
HADAMARD = _frozen(SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex))

BellKind = Literal["phi+", "phi-", "psi+", "psi-"]


@dataclass(frozen=True)
class SubsystemDescriptor:
    """
    二能级子系统描述
    labels[0] 对应 |0⟩，labels[1] 对应 |1⟩
    """

    id: str
    kind: SubsystemKind
    labels: tuple[str, str]

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not self.id:
            raise SubsystemError("subsystem id must not be empty")
        if len(labels) != 2 or labels[0] == labels[1]:
            raise SubsystemError("subsystem needs two distinct basis labels", {"id": self.id, "labels": labels})
        object.__setattr__(self, "kind", SubsystemKind(self.kind))
        object.__setattr__(self, "labels", labels)

    def label(self, value: int) -> str:
        return self.labels[value]

    def value(self, label: str) -> int:
        """标签 → 基矢序号"""
        try:
            return self.labels.index(label)
        except ValueError:
            raise SubsystemError(f"unknown label {label!r}", {"id": self.id, "labels": self.labels}) from None

    @classmethod
    def atom(cls, id: str) -> "SubsystemDescriptor":
        return cls(id=id, kind=SubsystemKind.ATOM, labels=("g-", "g+"))

    @classmethod
    def polarization(cls, id: str) -> "SubsystemDescriptor":
        return cls(id=id, kind=SubsystemKind.PHOTON_POLARIZATION, labels=("H", "V"))

    @classmethod
    def path(cls, id: str, labels: tuple[str, str] = ("1", "2")) -> "SubsystemDescriptor":
        return cls(id=id, kind=SubsystemKind.PATH_MODE, labels=labels)

    @classmethod
    def time_bin(cls, id: str) -> "SubsystemDescriptor":
        """时间窗寄存器（S 短臂 / L 长臂）"""
        return cls(id=id, kind=SubsystemKind.PATH_MODE, labels=("S", "L"))


@dataclass(frozen=True)
class JointState:
    """
    联合纯态
    amplitudes 长度为 2^n，0 < norm² ≤ 1 + 1e−12
    """

    subsystems: tuple[SubsystemDescriptor, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        subsystems = tuple(self.subsystems)
        ids = [s.id for s in subsystems]
        if len(set(ids)) != len(ids):
            raise SubsystemError("duplicate subsystem ids", {"ids": ids})

        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != 2 ** len(subsystems):
            raise StateError(
                "amplitude vector does not match subsystem count",
                {"expected": 2 ** len(subsystems), "got": amplitudes.size},
            )
        if not np.all(np.isfinite(amplitudes)):
            raise StateError("amplitudes must be finite")

        norm = float(np.vdot(amplitudes, amplitudes).real)
        if norm <= 0.0:
            raise StateError("state has zero norm")
        if norm > 1.0 + NORM_ATOL:
            raise StateError("state norm exceeds 1", {"norm_squared": norm})

        amplitudes.setflags(write=False)
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subsystems)

    @property
    def n_qubits(self) -> int:
        return len(self.subsystems)

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def has(self, subsystem_id: str) -> bool:
        return subsystem_id in self.ids

    def index(self, subsystem_id: str) -> int:
        """子系统在张量积中的位置"""
        try:
            return self.ids.index(subsystem_id)
        except ValueError:
            raise SubsystemError(f"unknown subsystem {subsystem_id!r}", {"ids": list(self.ids)}) from None

    def descriptor(self, subsystem_id: str) -> SubsystemDescriptor:
        return self.subsystems[self.index(subsystem_id)]

    def tensor(self) -> np.ndarray:
        """形状为 (2,)*n 的振幅张量"""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def normalized(self) -> "JointState":
        return JointState(self.subsystems, self.amplitudes / math.sqrt(self.norm_squared))

    def amplitude(self, **values: str) -> complex:
        """按标签读取单个振幅，例如 state.amplitude(p="H", a="g-")"""
        if set(values) != set(self.ids):
            raise SubsystemError("amplitude lookup needs a label for every subsystem", {"ids": list(self.ids)})
        index = tuple(self.descriptor(i).value(values[i]) for i in self.ids)
        return complex(self.tensor()[index])

    @classmethod
    def basis_state(cls, subsystems: Sequence[SubsystemDescriptor], values: Sequence[int]) -> "JointState":
        """计算基态 |v_1 v_2 … v_n⟩"""
        if len(values) != len(subsystems) or any(v not in (0, 1) for v in values):
            raise ParameterError("basis state needs one 0/1 value per subsystem", {"values": list(values)})
        amplitudes = np.zeros(2 ** len(subsystems), dtype=complex)
        index = 0
        for v in values:
            index = 2 * index + v
        amplitudes[index] = 1.0
        return cls(tuple(subsystems), amplitudes)

    @classmethod
    def from_amplitudes(
        cls,
        subsystems: Sequence[SubsystemDescriptor],
        amplitudes: Sequence[complex] | np.ndarray,
        normalize: bool = False,
    ) -> "JointState":
        vector = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = float(np.vdot(vector, vector).real)
            if norm <= 0.0:
                raise StateError("cannot normalize a zero vector")
            vector = vector / math.sqrt(norm)
        return cls(tuple(subsystems), vector)

    @classmethod
    def product(cls, factors: Sequence[tuple[SubsystemDescriptor, Sequence[complex]]]) -> "JointState":
        """单比特态的直积，例如 [(atom("a"), (s, s)), ...]"""
        return compose(*(cls.from_amplitudes([d], amps) for d, amps in factors))


@dataclass(frozen=True)
class MixedEnsemble:
    """
    混合态系综
    branches 为 (权重, 归一化纯态)，Σ 权重 ≤ 1（亏损部分为损耗概率）
    """

    branches: tuple[tuple[float, JointState], ...]

    def __post_init__(self) -> None:
        branches = tuple((float(w), s) for w, s in self.branches)
        if not branches:
            raise StateError("ensemble needs at least one branch")

        reference_ids = set(branches[0][1].ids)
        total = 0.0
        for weight, state in branches:
            if not (0.0 < weight <= 1.0 + NORM_ATOL):
                raise StateError("ensemble weight must lie in (0, 1]", {"weight": weight})
            if abs(state.norm_squared - 1.0) > settings.simulation.norm_atol:
                raise StateError("ensemble states must be normalized", {"norm_squared": state.norm_squared})
            if set(state.ids) != reference_ids:
                raise SubsystemError("ensemble branches must share subsystems", {"ids": list(state.ids)})
            total += weight
        if total > 1.0 + NORM_ATOL:
            raise StateError("ensemble weights exceed 1", {"total": total})

        object.__setattr__(self, "branches", branches)

    @property
    def total_weight(self) -> float:
        return sum(w for w, _ in self.branches)

    @property
    def subsystems(self) -> tuple[SubsystemDescriptor, ...]:
        return self.branches[0][1].subsystems

    @property
    def ids(self) -> tuple[str, ...]:
        return self.branches[0][1].ids

    @property
    def n_qubits(self) -> int:
        return len(self.subsystems)

    def __len__(self) -> int:
        return len(self.branches)

    @classmethod
    def from_states(cls, states: Iterable[JointState | None]) -> "MixedEnsemble":
        """由未归一化的分支态构造，权重取各自的 norm²"""
        return cls(tuple((s.norm_squared, s.normalized()) for s in states if s is not None))


def compose(*states: JointState) -> JointState:
    """
    张量积组合

    Args:
        states: 子系统互不相交的态

    Returns:
        按声明顺序的 Kronecker 积
    """
    if not states:
        raise ParameterError("compose needs at least one state")
    subsystems: tuple[SubsystemDescriptor, ...] = ()
    amplitudes = np.ones(1, dtype=complex)
    for state in states:
        overlap = {s.id for s in subsystems} & set(state.ids)
        if overlap:
            raise SubsystemError("compose needs disjoint subsystems", {"duplicate": sorted(overlap)})
        subsystems += state.subsystems
        amplitudes = np.kron(amplitudes, state.amplitudes)
    return JointState(subsystems, amplitudes)


def is_unitary(matrix: np.ndarray, atol: float | None = None) -> bool:
    """检查 U†U = I"""
    atol = settings.simulation.unitary_atol if atol is None else atol
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    return bool(np.allclose(matrix.conj().T @ matrix, np.eye(matrix.shape[0]), rtol=0.0, atol=atol))


def _target_axes(state: JointState, subsystem_ids: Sequence[str], matrix: np.ndarray, limit: int) -> list[int]:
    ids = list(subsystem_ids)
    if not ids:
        raise SubsystemError("operator needs at least one target subsystem")
    if len(set(ids)) != len(ids):
        raise SubsystemError("operator targets must be distinct", {"ids": ids})
    if len(ids) > limit:
        raise ParameterError(f"operator acts on at most {limit} subsystems", {"ids": ids})
    dim = 2 ** len(ids)
    if matrix.shape != (dim, dim):
        raise ParameterError("operator shape does not match targets", {"shape": matrix.shape, "ids": ids})
    return [state.index(i) for i in ids]


def _contract(state: JointState, axes: list[int], matrix: np.ndarray) -> np.ndarray:
    """把 2^k×2^k 矩阵作用到指定轴上，返回新的振幅向量"""
    k = len(axes)
    operator = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(operator, state.tensor(), axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(moved, list(range(k)), axes).reshape(-1)


def apply_operator(state: JointState, subsystem_ids: Sequence[str], matrix: np.ndarray) -> JointState | None:
    """
    作用一般线性算符（Kraus 分支），最多 3 个子系统

    Returns:
        新态；算符把态湮灭时返回 None
    """
    matrix = np.asarray(matrix, dtype=complex)
    axes = _target_axes(state, subsystem_ids, matrix, MAX_OPERATOR_QUBITS)
    amplitudes = _contract(state, axes, matrix)
    if float(np.vdot(amplitudes, amplitudes).real) == 0.0:
        return None
    return JointState(state.subsystems, amplitudes)


def apply_local_unitary(state: JointState, subsystem_ids: Sequence[str], matrix: np.ndarray) -> JointState:
    """
    作用局部幺正算符（k ≤ 2），幺正性按 1e−12 检查

    Raises:
        NonUnitaryError: 矩阵不是幺正的
    """
    matrix = np.asarray(matrix, dtype=complex)
    axes = _target_axes(state, subsystem_ids, matrix, MAX_UNITARY_QUBITS)
    if not is_unitary(matrix):
        raise NonUnitaryError(details={"targets": list(subsystem_ids)})
    return JointState(state.subsystems, _contract(state, axes, matrix))


def _rotate(tensor: np.ndarray, axis: int, matrix: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, tensor, axes=([1], [axis])), 0, axis)


def measure(
    state: JointState,
    subsystem_id: str,
    basis: MeasurementBasis = MeasurementBasis.COMPUTATIONAL,
    mode: EvaluationMode = EvaluationMode.ENUMERATE,
    rng: np.random.Generator | None = None,
    discard: bool = False,
) -> list[tuple[MeasurementRecord, JointState | None]]:
    """
    投影测量

    Args:
        state: 待测态（可未归一化，概率相对于 norm²）
        subsystem_id: 被测子系统
        basis: computational 或 hadamard（0 表示 +，1 表示 −）
        mode: enumerate 返回两个结果；sample 用 rng 抽取一个
        rng: sample 模式的随机数发生器
        discard: 测量后移除该子系统（探测器吸收光子）

    Returns:
        [(测量记录, 归一化的坍缩态)]；概率为 0 的结果态为 None
    """
    basis = MeasurementBasis(basis)
    mode = EvaluationMode(mode)
    axis = state.index(subsystem_id)
    norm = state.norm_squared
    if norm <= 0.0:
        raise StateError("cannot measure a zero-norm state")

    tensor = state.tensor()
    if basis == MeasurementBasis.HADAMARD:
        tensor = _rotate(tensor, axis, HADAMARD)

    slices = [np.take(tensor, outcome, axis=axis) for outcome in (0, 1)]
    weights = [float(np.vdot(s, s).real) for s in slices]
    probabilities = [min(max(w / norm, 0.0), 1.0) for w in weights]

    if mode == EvaluationMode.SAMPLE:
        if rng is None:
            raise ParameterError("sample mode needs a random generator")
        chosen = [0 if rng.random() < probabilities[0] else 1]
    else:
        chosen = [0, 1]

    remaining = tuple(s for s in state.subsystems if s.id != subsystem_id)
    results: list[tuple[MeasurementRecord, JointState | None]] = []
    for outcome in chosen:
        record = MeasurementRecord(
            subsystem=subsystem_id,
            basis=basis,
            outcome=outcome,
            probability=probabilities[outcome],
        )
        if weights[outcome] == 0.0:
            results.append((record, None))
            continue

        scale = 1.0 / math.sqrt(weights[outcome])
        if discard:
            collapsed = JointState(remaining, slices[outcome].reshape(-1) * scale)
        else:
            projected = np.zeros_like(tensor)
            index: list[slice | int] = [slice(None)] * state.n_qubits
            index[axis] = outcome
            projected[tuple(index)] = slices[outcome]
            if basis == MeasurementBasis.HADAMARD:
                projected = _rotate(projected, axis, HADAMARD)
            collapsed = JointState(state.subsystems, projected.reshape(-1) * scale)
        results.append((record, collapsed))

    logger.debug(f"Measured {subsystem_id} in {basis.value} basis: p0={probabilities[0]:.6g}")
    return results


def _aligned(reference: JointState, ids: Sequence[str]) -> JointState:
    if set(reference.ids) != set(ids):
        raise SubsystemError(
            "fidelity needs matching subsystems",
            {"state": list(ids), "reference": list(reference.ids)},
        )
    return reorder(reference, ids)


def fidelity(state: JointState | MixedEnsemble, reference: JointState) -> float:
    """
    保真度

    纯态：|⟨ref|ψ⟩|² / norm²(ψ)；系综：Σ w_i |⟨ref|ψ_i⟩|² / Σ w_i
    """
    if isinstance(state, MixedEnsemble):
        weighted = sum(w * fidelity(s, reference) for w, s in state.branches)
        return weighted / state.total_weight

    ref = _aligned(reference, state.ids)
    overlap = np.vdot(ref.amplitudes, state.amplitudes)
    value = abs(overlap) ** 2 / (state.norm_squared * ref.norm_squared)
    return float(min(value, 1.0))


def relabel(state: JointState, subsystem_id: str, descriptor: SubsystemDescriptor) -> JointState:
    """重新解释一个寄存器（例如时间窗合束后变为路径），振幅不变"""
    position = state.index(subsystem_id)
    if descriptor.id != subsystem_id and state.has(descriptor.id):
        raise SubsystemError(f"subsystem {descriptor.id!r} already exists")
    subsystems = list(state.subsystems)
    subsystems[position] = descriptor
    return JointState(tuple(subsystems), state.amplitudes)


def reorder(state: JointState, subsystem_ids: Sequence[str]) -> JointState:
    """按给定顺序重排子系统"""
    ids = list(subsystem_ids)
    if sorted(ids) != sorted(state.ids):
        raise SubsystemError("reorder needs a permutation of the subsystems", {"ids": ids})
    if tuple(ids) == state.ids:
        return state
    axes = [state.index(i) for i in ids]
    amplitudes = np.transpose(state.tensor(), axes).reshape(-1)
    return JointState(tuple(state.descriptor(i) for i in ids), amplitudes)


def reduced_state(state: JointState, keep_ids: Sequence[str]) -> np.ndarray:
    """
    约化密度矩阵（迹归一化为 1）

    Args:
        state: 纯态
        keep_ids: 保留的子系统，结果按此顺序排列
    """
    keep = list(keep_ids)
    rest = [i for i in state.ids if i not in keep]
    ordered = reorder(state, keep + rest)
    matrix = ordered.amplitudes.reshape(2 ** len(keep), -1)
    rho = matrix @ matrix.conj().T
    return rho / np.trace(rho).real


def detach(state: JointState, subsystem_id: str, value: int, atol: float = NORM_ATOL) -> JointState:
    """
    移除一个已知处于基态 |value⟩ 的寄存器

    Raises:
        StateError: 寄存器在另一个基态上仍有振幅
    """
    axis = state.index(subsystem_id)
    tensor = state.tensor()
    stray = np.take(tensor, 1 - value, axis=axis)
    if float(np.vdot(stray, stray).real) > atol * state.norm_squared:
        raise StateError(
            f"subsystem {subsystem_id!r} is not in basis state {value}",
            {"stray_weight": float(np.vdot(stray, stray).real)},
        )
    remaining = tuple(s for s in state.subsystems if s.id != subsystem_id)
    return JointState(remaining, np.take(tensor, value, axis=axis).reshape(-1))


def bell_state(first: SubsystemDescriptor, second: SubsystemDescriptor, kind: BellKind = "phi+") -> JointState:
    """四个 Bell 态之一，φ± = (|00⟩ ± |11⟩)/√2，ψ± = (|01⟩ ± |10⟩)/√2"""
    vectors = {
        "phi+": (1, 0, 0, 1),
        "phi-": (1, 0, 0, -1),
        "psi+": (0, 1, 1, 0),
        "psi-": (0, 1, -1, 0),
    }
    if kind not in vectors:
        raise ParameterError(f"unknown Bell state {kind!r}")
    return JointState((first, second), SQRT1_2 * np.array(vectors[kind], dtype=complex))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """第 index 次试验的独立随机数流，与执行顺序和并行方式无关"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
