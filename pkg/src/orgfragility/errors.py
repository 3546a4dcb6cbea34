"""Exception types raised by the engines.

Every domain error derives from ``ModelError`` so callers (the CLI in
particular) can map the whole family to one exit status.
"""


class ModelError(ValueError):
    pass


class DomainError(ModelError):
    """An argument lies outside the mathematical domain of an operation."""


class NonUnitMass(ModelError):
    pass


class NegativeProb(ModelError):
    pass


class DuplicateSupport(ModelError):
    pass


class NotInvertible(ModelError):
    pass


class NoConvergence(ModelError):
    pass


class ZeroTrials(ModelError):
    pass


class LengthMismatch(ModelError):
    pass


class WeightError(ModelError):
    pass


class InvalidSpec(ModelError):
    pass


class EmptyMenu(ModelError):
    pass
