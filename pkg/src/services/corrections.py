"""
Pauli 修正规则
交换的修正表，以及创建、提纯的条件修正
"""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.core.exceptions import ParameterError
from src.core.models import Detector, PauliWord
from src.services.state_engine import IDENTITY, PAULI_X, PAULI_Z, JointState, apply_local_unitary

PAULI_MATRICES: dict[PauliWord, np.ndarray] = {
    PauliWord.I: IDENTITY,
    PauliWord.Z: PAULI_Z,
    PauliWord.X: PAULI_X,
    # 先 σ_x 再 σ_z
    PauliWord.ZX: PAULI_Z @ PAULI_X,
}

SWAP_DETECTORS = (Detector.D1, Detector.D2)

CorrectionKey = tuple[Detector, int, int]


def pauli_matrix(word: PauliWord) -> np.ndarray:
    return PAULI_MATRICES[PauliWord(word)]


def apply_correction(state: JointState, subsystem_id: str, word: PauliWord) -> JointState:
    word = PauliWord(word)
    if word == PauliWord.I:
        return state
    return apply_local_unitary(state, [subsystem_id], pauli_matrix(word))


def compose_word(x_part: bool, z_part: bool) -> PauliWord:
    """由 σ_x、σ_z 两个分量组成 Pauli 字"""
    if x_part and z_part:
        return PauliWord.ZX
    if x_part:
        return PauliWord.X
    if z_part:
        return PauliWord.Z
    return PauliWord.I


@dataclass(frozen=True)
class CorrectionTable:
    """
    交换修正表：(光子探测器, 原子 c 结果, 原子 d 结果) → 原子 a 上的 Pauli 字
    共 8 个键
    """

    entries: Mapping[CorrectionKey, PauliWord] = field(default_factory=dict)

    def __post_init__(self) -> None:
        entries = {(Detector(k[0]), int(k[1]), int(k[2])): PauliWord(v) for k, v in dict(self.entries).items()}
        expected = {(d, c, e) for d in SWAP_DETECTORS for c in (0, 1) for e in (0, 1)}
        if set(entries) != expected:
            raise ParameterError(
                "correction table needs exactly the 8 (detector, c, d) keys",
                {"missing": sorted(str(k) for k in expected - set(entries))},
            )
        object.__setattr__(self, "entries", entries)

    def lookup(self, detector: Detector, c: int, d: int) -> PauliWord:
        return self.entries[(Detector(detector), c, d)]

    def rows(self) -> list[tuple[Detector, int, int, PauliWord]]:
        return [(k[0], k[1], k[2], self.entries[k]) for k in sorted(self.entries, key=lambda k: (k[0].value, k[1], k[2]))]

    def follows_parity_rule(self) -> bool:
        """探测器决定 σ_x 分量，c、d 结果是否相同决定 σ_z 分量"""
        return all(
            word == compose_word(detector == Detector.D2, c == d) for (detector, c, d), word in self.entries.items()
        )

    @classmethod
    def standard(cls) -> "CorrectionTable":
        """D1/D2 + 原子结果的标准修正"""
        return cls(
            {
                (detector, c, d): compose_word(detector == Detector.D2, c == d)
                for detector in SWAP_DETECTORS
                for c in (0, 1)
                for d in (0, 1)
            }
        )


def creation_correction(detector: Detector) -> PauliWord:
    """创建：D2、D3 响应时在原子 b 上作用 σ_x，D1、D4 不需要修正"""
    detector = Detector(detector)
    return PauliWord.X if detector in (Detector.D2, Detector.D3) else PauliWord.I


def purification_correction(a2_outcome: int, b2_outcome: int) -> PauliWord:
    """提纯：a2、b2 在 Hadamard 后的测量结果不同时在 a1 上作用 σ_z"""
    return PauliWord.Z if a2_outcome != b2_outcome else PauliWord.I
