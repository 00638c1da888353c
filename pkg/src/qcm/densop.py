"""
Dense density-matrix algebra over small qubit registers.

Basis order is big-endian: the qubit at register position 0 is the most
significant bit of the basis index, so tensor(a, b) concatenates bit strings
left to right.
"""
import json
from typing import Sequence

import numpy as np

from qcm.errors import InvalidStateError, RegisterError, RegisterOverflowError
from qcm.settings import DEFAULT_SETTINGS, QcmSettings

# An ordered list of distinct qubit positions within one register.
RegisterIndex = tuple[int, ...]

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class DensityMatrix:
    """
    Immutable 2^n x 2^n density matrix of an n-qubit register.

    Construction validates finiteness, Hermiticity and unit trace against
    `settings.structural_tol`; the PSD check runs only when
    `settings.verify_psd` is set.
    """

    __slots__ = ("_data", "_n")

    def __init__(self, matrix, settings: QcmSettings = DEFAULT_SETTINGS, validate: bool = True):
        data = np.array(matrix, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {data.shape}")
        dim = data.shape[0]
        n = dim.bit_length() - 1
        if dim < 1 or (1 << n) != dim:
            raise InvalidStateError(f"dimension {dim} is not a power of two")
        if n > settings.max_qubits:
            raise RegisterOverflowError(f"{n} qubits exceeds the cap of {settings.max_qubits}")
        if validate:
            _validate(data, settings)
        data.setflags(write=False)
        self._data = data
        self._n = n

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def diagonal(self) -> np.ndarray:
        return self._data.diagonal().real

    def p1(self) -> float:
        """S_11 of a single-qubit state: the probability of measuring |1>."""
        if self._n != 1:
            raise RegisterError(f"p1 is defined for single-qubit states, got {self._n} qubits")
        return float(self._data[1, 1].real)

    def to_dict(self) -> dict:
        return {"n": self._n, "re": self._data.real.tolist(), "im": self._data.imag.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, settings: QcmSettings = DEFAULT_SETTINGS) -> "DensityMatrix":
        payload = json.loads(text)
        matrix = np.array(payload["re"], dtype=float) + 1j * np.array(payload["im"], dtype=float)
        state = cls(matrix, settings)
        if state.n_qubits != payload["n"]:
            raise InvalidStateError(f"declared n={payload['n']} but matrix spans {state.n_qubits} qubits")
        return state

    def __repr__(self) -> str:
        return f"DensityMatrix(n={self._n}, diag={np.round(self.diagonal, 6).tolist()})"


def _validate(data: np.ndarray, settings: QcmSettings) -> None:
    tol = settings.structural_tol
    if not np.all(np.isfinite(data)):
        raise InvalidStateError("density matrix has non-finite entries")
    herm_dev = np.max(np.abs(data - data.conj().T))
    if herm_dev > tol:
        raise InvalidStateError(f"matrix is not Hermitian (deviation {herm_dev:.3e})")
    trace_dev = abs(np.trace(data) - 1.0)
    if trace_dev > tol:
        raise InvalidStateError(f"trace deviates from 1 by {trace_dev:.3e}")
    if settings.verify_psd:
        check_psd(data, settings.psd_tol)


def check_psd(matrix, tol: float = DEFAULT_SETTINGS.psd_tol) -> None:
    data = matrix.data if isinstance(matrix, DensityMatrix) else np.asarray(matrix)
    smallest = float(np.linalg.eigvalsh(data).min())
    if smallest < -tol:
        raise InvalidStateError(f"matrix is not positive semidefinite (min eigenvalue {smallest:.3e})")


def settle(matrix: np.ndarray) -> np.ndarray:
    """Symmetrize and rescale to unit trace, removing roundoff drift."""
    herm = (matrix + matrix.conj().T) / 2
    return herm / np.trace(herm).real


def register_index(positions: Sequence[int], n_qubits: int) -> RegisterIndex:
    index = tuple(int(p) for p in positions)
    if len(set(index)) != len(index):
        raise RegisterError(f"register positions must be distinct: {list(index)}")
    for p in index:
        if not 0 <= p < n_qubits:
            raise RegisterError(f"position {p} outside register of {n_qubits} qubits")
    return index


# --- Constructors ---

def classical_state(bits: Sequence[int], settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """The projector onto the computational basis state |b_0 b_1 ... b_{n-1}>."""
    if any(b not in (0, 1) for b in bits):
        raise InvalidStateError(f"classical state bits must be 0 or 1: {list(bits)}")
    n = len(bits)
    index = int("".join(str(b) for b in bits), 2) if n else 0
    matrix = np.zeros((1 << n, 1 << n), dtype=complex)
    matrix[index, index] = 1.0
    return DensityMatrix(matrix, settings)


def from_bloch(r: Sequence[float], settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """S = (I + r.sigma)/2 for a Bloch vector with |r| <= 1."""
    rx, ry, rz = r
    matrix = 0.5 * (np.eye(2, dtype=complex) + rx * PAULI[0] + ry * PAULI[1] + rz * PAULI[2])
    return DensityMatrix(matrix, settings)


def random_density_matrix(rng: np.random.Generator, settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """Single-qubit state with Bloch vector uniform in the unit ball."""
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = rng.random() ** (1 / 3)
    return from_bloch(radius * direction, settings)


# --- Register algebra ---

def tensor(a: DensityMatrix, b: DensityMatrix, settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    n = a.n_qubits + b.n_qubits
    if n > settings.max_qubits:
        raise RegisterOverflowError(f"tensor product of {n} qubits exceeds the cap of {settings.max_qubits}")
    return DensityMatrix(np.kron(a.data, b.data), settings)


def partial_trace(s: DensityMatrix, keep: Sequence[int], settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """Restrict `s` to the qubits in `keep`, returned in the order given."""
    n = s.n_qubits
    keep = register_index(keep, n)
    if not keep:
        raise RegisterError("partial trace must keep at least one qubit")
    reshaped = s.data.reshape([2] * (2 * n))
    # trace from the highest position down so lower axis numbers stay valid
    remaining = n
    for pos in sorted(set(range(n)) - set(keep), reverse=True):
        reshaped = np.trace(reshaped, axis1=pos, axis2=pos + remaining)
        remaining -= 1
    kept_sorted = sorted(keep)
    order = [kept_sorted.index(p) for p in keep]
    k = len(keep)
    reshaped = reshaped.transpose(order + [i + k for i in order])
    return DensityMatrix(reshaped.reshape(1 << k, 1 << k), settings)


def conjugate(s: DensityMatrix, gate, at: Sequence[int], settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """S -> (U (x) id) S (U (x) id)^dagger with U acting on positions `at`."""
    n = s.n_qubits
    at = register_index(at, n)
    k = gate.arity
    if len(at) != k:
        raise RegisterError(f"gate {gate.label} has arity {k} but was applied to {len(at)} positions")
    u = gate.matrix.reshape([2] * (2 * k))
    rows = list(at)
    cols = [n + p for p in at]
    t = s.data.reshape([2] * (2 * n))
    # U on the row axes
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), rows))
    t = np.moveaxis(t, list(range(k)), rows)
    # U^dagger on the column axes
    t = np.tensordot(t, u.conj(), axes=(cols, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), cols)
    return DensityMatrix(t.reshape(1 << n, 1 << n), settings)


# --- Structural predicates ---

def is_diagonal(s: DensityMatrix, tol: float = DEFAULT_SETTINGS.structural_tol) -> bool:
    off = s.data - np.diag(s.data.diagonal())
    return bool(np.max(np.abs(off), initial=0.0) <= tol)


def _check_partition(parts: Sequence[Sequence[int]], n: int) -> list[RegisterIndex]:
    checked = [register_index(p, n) for p in parts]
    flat = [p for part in checked for p in part]
    if any(not part for part in checked) or sorted(flat) != list(range(n)):
        raise RegisterError(f"{[list(p) for p in checked]} is not a partition of {n} positions")
    return checked


def reassemble(factors: Sequence[DensityMatrix], parts: Sequence[RegisterIndex], n: int) -> np.ndarray:
    """Tensor the factors and move each part's qubits back to their positions."""
    product = np.ones((1, 1), dtype=complex)
    for factor in factors:
        product = np.kron(product, factor.data)
    order = [p for part in parts for p in part]
    inverse = list(np.argsort(order))
    product = product.reshape([2] * (2 * n)).transpose(inverse + [n + i for i in inverse])
    return product.reshape(1 << n, 1 << n)


def is_decomposable(
    s: DensityMatrix,
    parts: Sequence[Sequence[int]],
    tol: float = DEFAULT_SETTINGS.structural_tol,
    settings: QcmSettings = DEFAULT_SETTINGS,
) -> tuple[bool, list[DensityMatrix]]:
    """
    Compare `s` with the tensor product of its marginals over `parts`.

    Returns (decomposable, marginals); the marginals are returned either way.
    """
    checked = _check_partition(parts, s.n_qubits)
    factors = [partial_trace(s, part, settings) for part in checked]
    product = reassemble(factors, checked, s.n_qubits)
    deviation = float(np.max(np.abs(product - s.data)))
    return deviation <= tol, factors


def are_equivalent(a: DensityMatrix, b: DensityMatrix, tol: float = DEFAULT_SETTINGS.structural_tol) -> bool:
    """
    Equivalence of register states: every single-qubit restriction of `a`
    has the same diagonal as the corresponding restriction of `b`.
    """
    if a.n_qubits != b.n_qubits:
        return False
    for pos in range(a.n_qubits):
        da = partial_trace(a, [pos]).diagonal
        db = partial_trace(b, [pos]).diagonal
        if np.max(np.abs(da - db)) > tol:
            return False
    return True


def is_diagonal_state(s: DensityMatrix, tol: float = DEFAULT_SETTINGS.structural_tol) -> bool:
    """Decomposable into single qubits, each of them diagonal."""
    ok, factors = is_decomposable(s, [[p] for p in range(s.n_qubits)], tol)
    return ok and all(is_diagonal(f, tol) for f in factors)
