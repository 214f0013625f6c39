"""
密度矩阵 oracle
用 ρ 的演化独立复核分支枚举的结果（≤ 12 个量子比特）
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.core.config import settings
from src.core.exceptions import DimensionError, NonUnitaryError, ParameterError, SubsystemError
from src.core.models import MeasurementBasis
from src.services.state_engine import (
    HADAMARD,
    JointState,
    MixedEnsemble,
    SubsystemDescriptor,
    is_unitary,
)

logger = logging.getLogger(__name__)

DEFAULT_ATOL = 1e-10


@dataclass(frozen=True)
class DensityState:
    """带子系统描述的密度矩阵（迹可以小于 1，亏损部分为被丢弃的分支）"""

    subsystems: tuple[SubsystemDescriptor, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        subsystems = tuple(self.subsystems)
        dim = 2 ** len(subsystems)
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.shape != (dim, dim):
            raise ParameterError("density matrix does not match subsystem count", {"shape": matrix.shape})
        matrix.setflags(write=False)
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "matrix", matrix)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.subsystems)

    @property
    def n_qubits(self) -> int:
        return len(self.subsystems)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def index(self, subsystem_id: str) -> int:
        try:
            return self.ids.index(subsystem_id)
        except ValueError:
            raise SubsystemError(f"unknown subsystem {subsystem_id!r}", {"ids": list(self.ids)}) from None

    def tensor(self) -> np.ndarray:
        return self.matrix.reshape((2,) * (2 * self.n_qubits))

    def normalized(self) -> "DensityState":
        return DensityState(self.subsystems, self.matrix / self.trace)


def _check_dimension(n_qubits: int) -> None:
    limit = settings.simulation.max_oracle_qubits
    if n_qubits > limit:
        raise DimensionError(f"density oracle supports at most {limit} qubits", {"qubits": n_qubits})


def density_matrix(source: MixedEnsemble | JointState) -> DensityState:
    """
    ρ = Σ w |ψ⟩⟨ψ|

    纯态输入时直接取 |ψ⟩⟨ψ|（迹为 norm²）。
    """
    if isinstance(source, JointState):
        _check_dimension(source.n_qubits)
        vector = source.amplitudes
        return DensityState(source.subsystems, np.outer(vector, vector.conj()))

    _check_dimension(source.n_qubits)
    order = source.ids
    dim = 2**source.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    for weight, state in source.branches:
        vector = _reordered_amplitudes(state, order)
        rho += weight * np.outer(vector, vector.conj())
    return DensityState(source.subsystems, rho)


def extend_rho(rho: DensityState, state: JointState) -> DensityState:
    """ρ ⊗ |ψ⟩⟨ψ|，新子系统排在后面"""
    overlap = set(rho.ids) & set(state.ids)
    if overlap:
        raise SubsystemError("extend needs disjoint subsystems", {"duplicate": sorted(overlap)})
    _check_dimension(rho.n_qubits + state.n_qubits)
    vector = state.amplitudes
    return DensityState(rho.subsystems + state.subsystems, np.kron(rho.matrix, np.outer(vector, vector.conj())))


def _reordered_amplitudes(state: JointState, order: Sequence[str]) -> np.ndarray:
    if state.ids == tuple(order):
        return state.amplitudes
    axes = [state.index(i) for i in order]
    return np.transpose(state.tensor(), axes).reshape(-1)


def _contract(tensor: np.ndarray, axes: list[int], matrix: np.ndarray) -> np.ndarray:
    k = len(axes)
    operator = matrix.reshape((2,) * (2 * k))
    moved = np.tensordot(operator, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(moved, list(range(k)), axes)


def apply_operator_rho(rho: DensityState, subsystem_ids: Sequence[str], matrix: np.ndarray) -> DensityState:
    """Kraus 分支 K ρ K†（不归一化）"""
    matrix = np.asarray(matrix, dtype=complex)
    ids = list(subsystem_ids)
    if matrix.shape != (2 ** len(ids), 2 ** len(ids)):
        raise ParameterError("operator shape does not match targets", {"shape": matrix.shape, "ids": ids})
    axes = [rho.index(i) for i in ids]
    tensor = _contract(rho.tensor(), axes, matrix)
    tensor = _contract(tensor, [rho.n_qubits + a for a in axes], matrix.conj())
    dim = 2**rho.n_qubits
    return DensityState(rho.subsystems, tensor.reshape(dim, dim))


def apply_unitary_rho(rho: DensityState, subsystem_ids: Sequence[str], matrix: np.ndarray) -> DensityState:
    """U ρ U†，幺正性检查与纯态引擎一致"""
    if not is_unitary(np.asarray(matrix, dtype=complex)):
        raise NonUnitaryError(details={"targets": list(subsystem_ids)})
    return apply_operator_rho(rho, subsystem_ids, matrix)


def apply_channel_rho(
    rho: DensityState,
    subsystem_ids: Sequence[str],
    kraus: Sequence[np.ndarray],
) -> DensityState:
    """Σ_k K_k ρ K_k†"""
    total = np.zeros_like(rho.matrix)
    for operator in kraus:
        total = total + apply_operator_rho(rho, subsystem_ids, operator).matrix
    return DensityState(rho.subsystems, total)


def project_rho(
    rho: DensityState,
    subsystem_id: str,
    outcome: int,
    basis: MeasurementBasis = MeasurementBasis.COMPUTATIONAL,
    discard: bool = False,
) -> DensityState:
    """
    投影到测量结果（不归一化，迹即为该结果的概率）

    Args:
        rho: 输入密度矩阵
        subsystem_id: 被测子系统
        outcome: 0/1（hadamard 基中 0 为 +）
        basis: 测量基
        discard: 投影后对该子系统求迹
    """
    basis = MeasurementBasis(basis)
    if outcome not in (0, 1):
        raise ParameterError("outcome must be 0 or 1", {"outcome": outcome})

    vector = np.eye(2, dtype=complex)[outcome]
    if basis == MeasurementBasis.HADAMARD:
        vector = HADAMARD @ vector
    projector = np.outer(vector, vector.conj())
    projected = apply_operator_rho(rho, [subsystem_id], projector)
    if discard:
        keep = [i for i in rho.ids if i != subsystem_id]
        return partial_trace(projected, keep)
    return projected


def partial_trace(rho: DensityState, keep_ids: Sequence[str]) -> DensityState:
    """对 keep_ids 以外的子系统求迹，结果按 keep_ids 的顺序排列"""
    keep = list(keep_ids)
    if len(set(keep)) != len(keep) or not set(keep) <= set(rho.ids):
        raise SubsystemError("partial trace needs distinct known subsystems", {"keep": keep})
    rest = [i for i in rho.ids if i not in keep]
    n = rho.n_qubits
    order = [rho.index(i) for i in keep + rest]
    tensor = np.transpose(rho.tensor(), order + [n + a for a in order])
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    reduced = np.einsum("ijkj->ik", tensor.reshape(dk, dr, dk, dr))
    subsystems = tuple(rho.subsystems[rho.index(i)] for i in keep)
    return DensityState(subsystems, reduced)


def reorder_rho(rho: DensityState, subsystem_ids: Sequence[str]) -> DensityState:
    ids = list(subsystem_ids)
    if sorted(ids) != sorted(rho.ids):
        raise SubsystemError("reorder needs a permutation of the subsystems", {"ids": ids})
    return partial_trace(rho, ids)


def is_physical(rho: DensityState, atol: float = DEFAULT_ATOL) -> bool:
    """Hermitian、半正定、迹 ≤ 1"""
    matrix = rho.matrix
    if not np.allclose(matrix, matrix.conj().T, rtol=0.0, atol=atol):
        return False
    eigenvalues = np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)
    if eigenvalues.min() < -atol:
        return False
    return rho.trace <= 1.0 + atol


def compare(first: DensityState, second: DensityState, atol: float = DEFAULT_ATOL) -> bool:
    """逐元素比较两个密度矩阵（自动对齐子系统顺序）"""
    if set(first.ids) != set(second.ids):
        raise SubsystemError("compare needs matching subsystems", {"first": list(first.ids), "second": list(second.ids)})
    aligned = reorder_rho(second, first.ids)
    difference = float(np.max(np.abs(first.matrix - aligned.matrix)))
    logger.debug(f"Density comparison max deviation: {difference:.3e}")
    return difference <= atol


def fidelity_rho(rho: DensityState, reference: JointState) -> float:
    """⟨ref|ρ|ref⟩ / tr ρ"""
    vector = _reordered_amplitudes(reference, rho.ids)
    value = np.vdot(vector, rho.matrix @ vector).real / (rho.trace * reference.norm_squared)
    return float(value)
