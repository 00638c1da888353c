"""
Fixed arithmetic circuits over real1 / real2 / real4 numbers.

Every operation consumes its operands. Where a formula uses an operand twice
the circuit clones it first, so each gate still sees two distinct ensembles.
"""
import logging

from arith.numbers import (
    Real1,
    Real2,
    Real4,
    clone_r1,
    clone_r2,
    clone_r4,
    const_r4,
    neg_r2,
    r2,
    r4,
    real4_probabilities,
)
from qcm.errors import DivisorNearZero, EncodingRangeError
from qcm.gates import gate_mean_unitary, gate_sigma2
from qcm.store import prepared_state

logger = logging.getLogger(__name__)


# --- real1 ---

def sigma1(x: Real1, y: Real1) -> Real1:
    """(x + y) / 2: diagonalize both inputs, then the mean unitary."""
    store = x.store
    dx = store.diagonalize(x.ens)
    dy = store.diagonalize(y.ens)
    out, _ = store.apply2(gate_mean_unitary(), dx, dy)
    return Real1(store, out)


def sigma2(x: Real1, y: Real1) -> Real1:
    """1 - (x + y) + 2xy, carried by the second output of the permutation."""
    store = x.store
    _, out = store.apply2(gate_sigma2(), x.ens, y.ens)
    return Real1(store, out)


def mu1(x: Real1, y: Real1) -> Real1:
    """Displaced multiplication xy/2 + 1/4 = sigma1(sigma1(sigma2(x, y), 0), sigma1(x, y))."""
    store = x.store
    xc, yc = clone_r1(x), clone_r1(y)
    zero = Real1(store, store.fresh_zero())
    left = sigma1(sigma2(x, y), zero)
    right = sigma1(xc, yc)
    return sigma1(left, right)


# --- real2 ---

def sigma_r2(x: Real2, y: Real2) -> Real2:
    return Real2(sigma1(x.plus, y.plus), sigma1(x.minus, y.minus))


def mu2(x: Real2, y: Real2) -> Real2:
    """
    Quasimultiplication xy/4:
      plus  = sigma1(mu1(x+, y+), mu1(x-, y-))
      minus = sigma1(mu1(x+, y-), mu1(x-, y+))
    """
    xc, yc = clone_r2(x), clone_r2(y)
    plus = sigma1(mu1(x.plus, y.plus), mu1(x.minus, y.minus))
    minus = sigma1(mu1(xc.plus, yc.minus), mu1(xc.minus, yc.plus))
    return Real2(plus, minus)


# --- real4 ---

def mul_r4(x: Real4, y: Real4) -> Real4:
    # both parts shrink by 1/4, the ratio is unchanged
    return Real4(mu2(x.num, y.num), mu2(x.den, y.den))


def mean_r4(x: Real4, y: Real4) -> Real4:
    """
    (x + y) / 2:
      num = sigma(mu2(x', y''), mu2(x'', y'))
      den = mu2(x'', y'')
    """
    x_den, y_den = clone_r2(x.den), clone_r2(y.den)
    num = sigma_r2(mu2(x.num, y.den), mu2(x.den, y.num))
    return Real4(num, mu2(x_den, y_den))


def neg_r4(x: Real4) -> Real4:
    return Real4(neg_r2(x.num), x.den)


def inv_r4(x: Real4) -> Real4:
    new_den = r2(x.num)
    floor = x.store.settings.den_floor
    if abs(new_den) < floor:
        raise DivisorNearZero(f"cannot invert: numerator {new_den:.3e} is below the floor {floor:.1e}")
    return Real4(x.den, x.num)


def add_r4(x: Real4, y: Real4) -> Real4:
    return mul_r4(mean_r4(x, y), const_r4(x.store, 2.0))


def sub_r4(x: Real4, y: Real4) -> Real4:
    return add_r4(x, neg_r4(y))


def div_r4(x: Real4, y: Real4) -> Real4:
    return mul_r4(x, inv_r4(y))


def renormalize(x: Real4) -> Real4:
    """
    Decode the value and load it again with the encode rule, in one
    non-physical step. Undoes the 1/4 shrinkage of each multiplication.
    """
    store = x.store
    value = r4(x)
    settings = store.settings
    states = [prepared_state(p, settings) for p in real4_probabilities(value)]
    ids = store.replace([q.ens for q in x.qubits], states)
    q = [Real1(store, eid) for eid in ids]
    return Real4(Real2(q[0], q[1]), Real2(q[2], q[3]))


def pow_r4_counted(x: Real4, n: int, renorm: bool = False) -> tuple[Real4, int]:
    """
    Left-to-right square-and-multiply. Returns the power and the number of
    mul_r4 calls, at most 2 * floor(log2 n) for n >= 1.
    """
    if n < 0:
        raise EncodingRangeError(f"exponent must be a nonnegative integer, got {n}")
    if n == 0:
        return const_r4(x.store, 1.0), 0
    muls = 0
    result = clone_r4(x)
    for bit in bin(n)[3:]:
        result = mul_r4(result, clone_r4(result))
        muls += 1
        if renorm:
            result = renormalize(result)
        if bit == "1":
            result = mul_r4(result, clone_r4(x))
            muls += 1
            if renorm:
                result = renormalize(result)
    logger.debug("pow n=%d used %d multiplications", n, muls)
    return result, muls


def pow_r4(x: Real4, n: int, renorm: bool = False) -> Real4:
    result, _ = pow_r4_counted(x, n, renorm)
    return result
