"""Exceptions raised by the hnf engines.

Every error derives from `HnfError` and from the builtin exception a caller
would expect for the same condition, so ``except ValueError`` keeps working.
"""

from collections.abc import Sequence


class HnfError(Exception):
    """Base class of all hnf errors."""


# Invalid input


class ParseError(HnfError, ValueError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class QuadraticMismatch(HnfError, ValueError):
    pass


class FieldMismatch(HnfError, ValueError):
    pass


class ResonantForm(HnfError, ValueError):
    def __init__(self, J: Sequence[int]) -> None:
        super().__init__(f"resonant linear form: (alpha, {tuple(J)}) = 0")
        self.J = tuple(J)


class NotInMoserAlgebra(HnfError, ValueError):
    pass


class BadLowerPart(HnfError, ValueError):
    pass


class NotStrictClass(HnfError, ValueError):
    pass


class OrderMismatch(HnfError, ValueError):
    pass


class RangeError(HnfError, ValueError):
    pass


class UnknownConfigKey(HnfError, ValueError):
    def __init__(self, key: str) -> None:
        super().__init__(f"unknown config key: {key!r}")
        self.key = key


# Mathematical failures


class DivisorVanishes(HnfError, ArithmeticError):
    def __init__(self, J: Sequence[int]) -> None:
        super().__init__(f"divisor (alpha+omega, {tuple(J)}) vanishes")
        self.J = tuple(J)


class ResonantMonomial(HnfError, ArithmeticError):
    def __init__(self, J: Sequence[int]) -> None:
        super().__init__(f"resonant monomial: (alpha, {tuple(J)}) = 0")
        self.J = tuple(J)


class NonPositiveOrder(HnfError, ArithmeticError):
    pass


class NewtonNonUnit(HnfError, ArithmeticError):
    pass


class RadiusExceeded(HnfError, ArithmeticError):
    pass


class PhaseUnwrapAmbiguous(HnfError, ArithmeticError):
    pass


class InverseDiverged(HnfError, ArithmeticError):
    pass


# Run failures


class BudgetExceeded(HnfError, RuntimeError):
    pass


class CutoffExceeded(HnfError, RuntimeError):
    def __init__(self, step: int, start: int, cutoff: int) -> None:
        super().__init__(
            f"step {step}: window starting at weight {start} "
            f"lies beyond the cutoff {cutoff}"
        )
        self.step = step
        self.start = start
        self.cutoff = cutoff


class IntegratorFailure(HnfError, RuntimeError):
    pass
