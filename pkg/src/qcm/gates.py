"""
The built-in gate set: classical permutation operators (NOT, CNOT, the
sigma2 permutation, identity), the mean unitary, and the preparation
rotation used to load numbers into fresh ensembles.
"""
import math
from dataclasses import dataclass, field
from functools import cache, cached_property
from typing import Sequence

import numpy as np

from qcm.errors import EncodingRangeError, InvalidGateError
from qcm.settings import DEFAULT_SETTINGS

LAMBDA = 1 / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class UnitaryGate:
    label: str
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        dim = matrix.shape[0]
        if matrix.shape != (dim, dim) or dim not in (2, 4):
            raise InvalidGateError(f"gate {self.label} must act on 1 or 2 qubits, got shape {matrix.shape}")
        deviation = np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim)))
        if deviation > DEFAULT_SETTINGS.structural_tol:
            raise InvalidGateError(f"gate {self.label} is not unitary (deviation {deviation:.3e})")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def arity(self) -> int:
        return self.matrix.shape[0].bit_length() - 1


@dataclass(frozen=True)
class ClassicalPermutationGate:
    """
    Classical operator induced by a bijection of basis states:
    U|i> = |perm[i]> with big-endian basis indices.
    """

    label: str
    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if len(perm) not in (2, 4) or sorted(perm) != list(range(len(perm))):
            raise InvalidGateError(f"{list(perm)} is not a bijection on 1 or 2 qubit basis states")
        object.__setattr__(self, "perm", perm)

    @property
    def arity(self) -> int:
        return len(self.perm).bit_length() - 1

    @cached_property
    def matrix(self) -> np.ndarray:
        dim = len(self.perm)
        matrix = np.zeros((dim, dim), dtype=complex)
        matrix[list(self.perm), list(range(dim))] = 1.0
        matrix.setflags(write=False)
        return matrix


Gate = UnitaryGate | ClassicalPermutationGate


def classical_operator(perm: Sequence[int], label: str) -> ClassicalPermutationGate:
    return ClassicalPermutationGate(label=label, perm=tuple(perm))


@cache
def gate_identity(arity: int = 1) -> ClassicalPermutationGate:
    return classical_operator(range(1 << arity), "I" if arity == 1 else "II")


@cache
def gate_not() -> ClassicalPermutationGate:
    # |0> <-> |1>
    return classical_operator((1, 0), "NOT")


@cache
def gate_cnot() -> ClassicalPermutationGate:
    # (control, target): |x, y> -> |x, x xor y>
    return classical_operator((0, 1, 3, 2), "CNOT")


@cache
def gate_sigma2() -> ClassicalPermutationGate:
    """|1,1>->|1,1>, |1,0>->|0,0>, |0,0>->|0,1>, |0,1>->|1,0>."""
    return classical_operator((1, 2, 0, 3), "SIGMA2")


@cache
def gate_mean_unitary() -> UnitaryGate:
    """Fixes |00> and |11>; 45 degree rotation on span{|01>, |10>}."""
    lam = LAMBDA
    matrix = np.array(
        [
            [1, 0, 0, 0],
            [0, lam, lam, 0],
            [0, -lam, lam, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )
    return UnitaryGate(label="MEAN", matrix=matrix)


def gate_prepare(p: float) -> UnitaryGate:
    """Rotation R(theta), theta = 2 asin(sqrt(p)), taking |0> to a state with S_11 = p."""
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise EncodingRangeError(f"probability {p} outside [0, 1]")
    half = math.asin(math.sqrt(p))
    c, s = math.cos(half), math.sin(half)
    return UnitaryGate(label="PREP", matrix=np.array([[c, -s], [s, c]], dtype=complex))


BUILTIN_GATES = {
    "I": gate_identity,
    "NOT": gate_not,
    "CNOT": gate_cnot,
    "SIGMA2": gate_sigma2,
    "MEAN": gate_mean_unitary,
}
