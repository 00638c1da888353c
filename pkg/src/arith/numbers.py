"""
Number representations held in q-ensembles.

- Real1: one ensemble; value S_11 in [0, 1].
- Real2: a (plus, minus) pair; value r1(plus) - r1(minus) in [-1, 1].
- Real4: a (numerator, denominator) pair of Real2; value num / den.
  Qubits x1..x4 are num.plus, num.minus, den.plus, den.minus.
"""
import math
from dataclasses import dataclass, field

from pydantic import BaseModel, Field

from qcm.errors import DenominatorNearZero, EncodingRangeError
from qcm.store import EnsembleId, EnsembleStore


@dataclass(frozen=True)
class Real1:
    store: EnsembleStore = field(repr=False, compare=False)
    ens: EnsembleId

    @property
    def value(self) -> float:
        return self.store.r1(self.ens)


@dataclass(frozen=True)
class Real2:
    plus: Real1
    minus: Real1

    @property
    def store(self) -> EnsembleStore:
        return self.plus.store


@dataclass(frozen=True)
class Real4:
    num: Real2
    den: Real2

    @property
    def store(self) -> EnsembleStore:
        return self.num.store

    @property
    def qubits(self) -> tuple[Real1, Real1, Real1, Real1]:
        return self.num.plus, self.num.minus, self.den.plus, self.den.minus


class Real4Components(BaseModel):
    """Readout of the four qubit probabilities and the two real2 magnitudes."""

    probabilities: list[float] = Field(description="S_11 of x1..x4.")
    num: float = Field(description="r2 of the numerator pair.")
    den: float = Field(description="r2 of the denominator pair.")


# --- encoding ---

def balanced_pair(v: float) -> tuple[float, float]:
    """The (plus, minus) probabilities (1+v)/2, (1-v)/2."""
    if not math.isfinite(v) or abs(v) > 1.0:
        raise EncodingRangeError(f"real2 value {v} outside [-1, 1]")
    return (1.0 + v) / 2.0, (1.0 - v) / 2.0


def real4_targets(r: float) -> tuple[float, float]:
    """(numerator, denominator) real2 values used to encode r."""
    if not math.isfinite(r):
        raise EncodingRangeError(f"cannot encode non-finite value {r}")
    if abs(r) <= 1.0:
        return r, 1.0
    return math.copysign(1.0, r), 1.0 / abs(r)


def real4_probabilities(r: float) -> tuple[float, float, float, float]:
    num, den = real4_targets(r)
    return balanced_pair(num) + balanced_pair(den)


def encode_real1(store: EnsembleStore, p: float) -> Real1:
    return Real1(store, store.prepare(p))


def encode_real2(store: EnsembleStore, v: float) -> Real2:
    p_plus, p_minus = balanced_pair(v)
    return Real2(encode_real1(store, p_plus), encode_real1(store, p_minus))


def encode_real4(store: EnsembleStore, r: float) -> Real4:
    num, den = real4_targets(r)
    return Real4(encode_real2(store, num), encode_real2(store, den))


def const_r4(store: EnsembleStore, value: float) -> Real4:
    """A freshly encoded constant; constants are consumable like any operand."""
    return encode_real4(store, value)


# --- decoding ---

def r1(x: Real1) -> float:
    return x.value


def r2(x: Real2) -> float:
    return x.plus.value - x.minus.value


def r4(x: Real4) -> float:
    den = r2(x.den)
    floor = x.store.settings.den_floor
    if abs(den) < floor:
        raise DenominatorNearZero(f"real4 denominator {den:.3e} is below the floor {floor:.1e}")
    return r2(x.num) / den


def components(x: Real4) -> Real4Components:
    return Real4Components(
        probabilities=[q.value for q in x.qubits],
        num=r2(x.num),
        den=r2(x.den),
    )


# --- cloning and handle swaps ---

def clone_r1(x: Real1) -> Real1:
    return Real1(x.store, x.store.clone(x.ens))


def clone_r2(x: Real2) -> Real2:
    return Real2(clone_r1(x.plus), clone_r1(x.minus))


def clone_r4(x: Real4) -> Real4:
    return Real4(clone_r2(x.num), clone_r2(x.den))


def neg_r2(x: Real2) -> Real2:
    return Real2(x.minus, x.plus)
