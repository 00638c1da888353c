"""
Exception tree shared by every layer of the simulator.
"""


class QcmError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidStateError(QcmError):
    """A matrix is not a valid density matrix (trace, Hermiticity, finiteness, PSD)."""


class RegisterError(QcmError):
    """Invalid register positions, a bad partition, or a gate/register arity mismatch."""


class RegisterOverflowError(RegisterError):
    """A joint register would exceed the configured qubit cap."""


class UnknownEnsembleError(QcmError):
    pass


class ConsumedEnsembleError(QcmError):
    pass


class SameOperandError(QcmError):
    """Both operands of a two-qubit gate are the same ensemble; clone first."""


class EncodingRangeError(QcmError):
    """A value cannot be encoded (out of range, non-finite, negative exponent)."""


class DenominatorNearZero(QcmError):
    """A real4 ratio is undefined: its denominator is below the floor."""


class DivisorNearZero(QcmError):
    pass


class DenominatorIndistinguishableFromZero(QcmError):
    """The sampled denominator is within z standard errors of zero; more shots are needed."""


class InvalidGateError(QcmError):
    """A gate matrix is not unitary or a permutation is not a bijection."""


class ExprSyntaxError(QcmError):
    def __init__(self, message: str, offset: int, expected: list[str]):
        self.offset = offset
        self.expected = sorted(set(expected))
        super().__init__(f"{message} at offset {offset} (expected one of: {', '.join(self.expected)})")
