"""Exception hierarchy.

``InputError`` subclasses signal bad arguments (CLI exit code 2); every other
``HybridWitnessError`` is a numerical failure (CLI exit code 3).
"""


class HybridWitnessError(Exception):
    pass


class InputError(HybridWitnessError, ValueError):
    pass


class ShapeMismatch(InputError):
    pass


class CutoffTooSmall(HybridWitnessError):
    pass


class DegenerateCat(InputError):
    pass


class NotPositive(InputError):
    pass


class LeakageError(HybridWitnessError):
    pass


class DomainError(HybridWitnessError):
    pass


class IncompleteKraus(InputError):
    pass


class NotUnitary(HybridWitnessError):
    def __init__(self, residual: float, label: str = ""):
        self.residual = residual
        super().__init__(f"{label} fails unitarity: ||U^dag U - 1|| = {residual:.3e}")


class UncertifiedConfig(InputError):
    pass


class BadStatistics(InputError):
    pass


class Degenerate(HybridWitnessError):
    pass
