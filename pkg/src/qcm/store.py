"""
Quantum-computer-media storage.

Each q-ensemble is held as one single-qubit density matrix (its per-qubit
state; admissible states are tensor powers of it) plus a consumed flag.
Two-qubit gates act on the product of two ensembles' states and restrict the
result back to each qubit with the partial trace. Operands are consumed by
every gate, so correlated outputs can never be recombined; circuits that need
a value twice must clone it first.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NewType, Optional

import numpy as np
from pydantic import BaseModel, Field

from qcm.densop import DensityMatrix, check_psd, classical_state, conjugate, settle
from qcm.errors import ConsumedEnsembleError, RegisterError, SameOperandError, UnknownEnsembleError
from qcm.gates import Gate, gate_cnot, gate_prepare
from qcm.settings import DEFAULT_SETTINGS, QcmSettings

logger = logging.getLogger(__name__)

EnsembleId = NewType("EnsembleId", int)

ALLOC_LABEL = "alloc0"
PREP_LABEL = "PREP"
CLONE_LABEL = "CLONE"
RENORM_LABEL = "RENORM"


def prepared_state(p: float, settings: QcmSettings = DEFAULT_SETTINGS) -> DensityMatrix:
    """R(theta)|0><0|R(theta)^dagger, the pure state with S_11 = p."""
    column = gate_prepare(p).matrix[:, 0]
    return DensityMatrix(np.outer(column, column.conj()), settings)


def restricted_conjugate(a: DensityMatrix, b: DensityMatrix, gate: Gate) -> tuple[np.ndarray, np.ndarray]:
    """
    Single-qubit marginals of U (S(a) (x) S(b)) U^dagger.

    Same result as densop.conjugate followed by densop.partial_trace on each
    qubit, contracted in one pass without forming the 4x4 product.
    """
    u = gate.matrix.reshape(2, 2, 2, 2)
    ud = u.conj()
    first = np.einsum("ijab,ac,bd,kjcd->ik", u, a.data, b.data, ud)
    second = np.einsum("ijab,ac,bd,ilcd->jl", u, a.data, b.data, ud)
    return first, second


class GateEvent(BaseModel):
    """One step of a circuit run; serialized with the trace-file field names."""

    step: int = Field(description="Strictly increasing step number within a store.")
    gate_label: str = Field(serialization_alias="gate")
    inputs: list[int] = Field(default_factory=list, serialization_alias="in")
    outputs: list[int] = Field(default_factory=list, serialization_alias="out")
    physical: bool = Field(default=True, description="False for simulation-only steps such as renormalization.")

    @property
    def kind(self) -> str:
        return {
            ALLOC_LABEL: "alloc",
            PREP_LABEL: "prep",
            CLONE_LABEL: "clone",
            RENORM_LABEL: "renorm",
        }.get(self.gate_label, "gate")

    def to_line(self) -> str:
        return self.model_dump_json(by_alias=True)


@dataclass
class _Ensemble:
    state: DensityMatrix
    consumed: bool = False


class EnsembleStore:
    """The storage of q-ensembles plus the gate-event trace. Single writer."""

    def __init__(self, settings: QcmSettings = DEFAULT_SETTINGS):
        self.settings = settings
        self._ensembles: dict[EnsembleId, _Ensemble] = {}
        self._next_id = 0
        self.trace: list[GateEvent] = []

    # --- bookkeeping ---

    def _new(self, state: DensityMatrix) -> EnsembleId:
        eid = EnsembleId(self._next_id)
        self._next_id += 1
        self._ensembles[eid] = _Ensemble(state)
        return eid

    def _live(self, eid: EnsembleId) -> _Ensemble:
        record = self._ensembles.get(eid)
        if record is None:
            raise UnknownEnsembleError(f"unknown ensemble {eid}")
        if record.consumed:
            raise ConsumedEnsembleError(f"ensemble {eid} was consumed by an earlier operation")
        return record

    def _log(self, label: str, inputs: Iterable[EnsembleId], outputs: Iterable[EnsembleId], physical: bool = True):
        event = GateEvent(
            step=len(self.trace),
            gate_label=label,
            inputs=list(inputs),
            outputs=list(outputs),
            physical=physical,
        )
        self.trace.append(event)
        logger.debug("step %d: %s %s -> %s", event.step, label, event.inputs, event.outputs)

    def _settled(self, state: DensityMatrix) -> DensityMatrix:
        return self._settled_array(state.data)

    def _settled_array(self, matrix: np.ndarray) -> DensityMatrix:
        # trace exactly 1 and Hermitian, so roundoff cannot build up along long lineages;
        # settle already enforces what validation would check
        settled = DensityMatrix(settle(matrix), self.settings, validate=False)
        if self.settings.verify_psd:
            check_psd(settled, self.settings.psd_tol)
        return settled

    # --- operations ---

    def fresh_zero(self) -> EnsembleId:
        """A free-storage ensemble in the classical state |0><0|."""
        eid = self._new(classical_state([0], self.settings))
        self._log(ALLOC_LABEL, [], [eid])
        return eid

    def prepare(self, p: float) -> EnsembleId:
        eid = self._new(self._settled(prepared_state(p, self.settings)))
        self._log(PREP_LABEL, [], [eid])
        return eid

    def clone(self, a: EnsembleId) -> EnsembleId:
        """Split an ensemble into two parts carrying the same per-qubit state."""
        state = self._live(a).state
        eid = self._new(state)
        self._log(CLONE_LABEL, [a], [eid])
        return eid

    def apply1(self, gate: Gate, a: EnsembleId) -> EnsembleId:
        record = self._live(a)
        out = conjugate(record.state, gate, [0], self.settings)
        record.consumed = True
        eid = self._new(self._settled(out))
        self._log(gate.label, [a], [eid])
        return eid

    def apply2(self, gate: Gate, a: EnsembleId, b: EnsembleId) -> tuple[EnsembleId, EnsembleId]:
        """
        Conjugate S(a) (x) S(b) by the gate and restrict to each qubit.
        Both operands are consumed; the two marginals become new ensembles.
        """
        if a == b:
            raise SameOperandError(f"ensemble {a} used as both operands; clone it first")
        rec_a, rec_b = self._live(a), self._live(b)
        if gate.arity != 2:
            raise RegisterError(f"gate {gate.label} has arity {gate.arity}, apply2 needs 2")
        first, second = restricted_conjugate(rec_a.state, rec_b.state, gate)
        first, second = self._settled_array(first), self._settled_array(second)
        rec_a.consumed = True
        rec_b.consumed = True
        out_a, out_b = self._new(first), self._new(second)
        self._log(gate.label, [a, b], [out_a, out_b])
        return out_a, out_b

    def diagonalize(self, a: EnsembleId) -> EnsembleId:
        """CNOT onto a free |0> ensemble: the control ends in diag(S_00, S_11)."""
        b = self.fresh_zero()
        out, _ = self.apply2(gate_cnot(), a, b)
        return out

    def replace(self, inputs: list[EnsembleId], states: list[DensityMatrix]) -> list[EnsembleId]:
        """Swap ensembles for freshly loaded ones in a single non-physical step."""
        for eid in inputs:
            self._live(eid)
        for eid in inputs:
            self._ensembles[eid].consumed = True
        outputs = [self._new(self._settled(s)) for s in states]
        self._log(RENORM_LABEL, inputs, outputs, physical=False)
        return outputs

    # --- readout ---

    def state(self, a: EnsembleId) -> DensityMatrix:
        return self._live(a).state

    def r1(self, a: EnsembleId) -> float:
        """The real1 value S_11; reading does not consume."""
        return self._live(a).state.p1()

    def is_consumed(self, a: EnsembleId) -> bool:
        record = self._ensembles.get(a)
        if record is None:
            raise UnknownEnsembleError(f"unknown ensemble {a}")
        return record.consumed

    def gate_count(
        self,
        label: Optional[str] = None,
        physical: Optional[bool] = None,
        kind: Optional[str] = None,
    ) -> int:
        return sum(
            1
            for e in self.trace
            if (label is None or e.gate_label == label)
            and (physical is None or e.physical == physical)
            and (kind is None or e.kind == kind)
        )

    def counters(self) -> dict[str, int]:
        counts = {"alloc": 0, "prep": 0, "clone": 0, "gate": 0, "renorm": 0}
        for event in self.trace:
            counts[event.kind] += 1
        return counts

    def trace_lines(self) -> list[str]:
        return [event.to_line() for event in self.trace]

    def export_trace(self, path: str | Path) -> int:
        lines = self.trace_lines()
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        logger.info("wrote %d trace events to %s", len(lines), path)
        return len(lines)
