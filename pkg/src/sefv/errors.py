"""Exception hierarchy for sefv."""


class SefvError(Exception):
    """Base class for all package errors."""


# mesh
class InvalidDim(SefvError, ValueError):
    pass


class TooFewCells(SefvError, ValueError):
    pass


class DimensionMismatch(SefvError, ValueError):
    pass


# physics
class NegativeDensity(SefvError, ValueError):
    pass


class VacuumState(SefvError, ValueError):
    pass


class VacuumMomentum(SefvError, ValueError):
    pass


# noise
class BadDecay(SefvError, ValueError):
    pass


class NegativeAmplitude(SefvError, ValueError):
    pass


class ModeOutOfRange(SefvError, IndexError):
    pass


# scheme
class PositivityLost(SefvError, RuntimeError):
    def __init__(self, t, min_rho):
        super().__init__(f"density lost positivity at t={t:.6g} (min rho={min_rho:.3e})")
        self.t = t
        self.min_rho = min_rho


class NonFinite(SefvError, RuntimeError):
    def __init__(self, t):
        super().__init__(f"non-finite state at t={t:.6g}")
        self.t = t


class NonPositiveInitialDensity(SefvError, ValueError):
    pass


# diagnostics / ensemble
class EmptyLedger(SefvError, ValueError):
    pass


class NonNestedMeshes(SefvError, ValueError):
    pass


class TooFewSamples(SefvError, ValueError):
    pass


class IncompatibleTimeGrids(SefvError, ValueError):
    pass


class MissingReference(SefvError, ValueError):
    pass


# persistence
class IoFailure(SefvError, OSError):
    pass


class VersionMismatch(SefvError, ValueError):
    pass


class ChecksumMismatch(SefvError, ValueError):
    pass


# config
class ParseError(SefvError, ValueError):
    def __init__(self, message, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line


class ValidationError(SefvError, ValueError):
    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
