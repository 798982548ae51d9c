"""Exception types raised by the laboratory."""


class RdeLabError(Exception):
    """Base class for all errors raised here."""


class NumericFailure(RdeLabError):
    """A computation ran but did not meet its tolerance."""


class WindowOverflow(RdeLabError):
    pass


class GridMismatch(RdeLabError):
    pass


class EmptySample(RdeLabError):
    pass


class DegenerateCutoff(RdeLabError):
    pass


class DomainViolation(RdeLabError):
    pass


class DomainError(RdeLabError, ValueError):
    pass


class TooLarge(RdeLabError):
    pass


class BadBracket(RdeLabError):
    pass


class ScheduleTooShort(RdeLabError):
    pass


class CollapseSignal(RdeLabError):
    """The tail integrability condition fails, so the image collapses to an infinite Dirac."""


class NotConverged(NumericFailure):
    def __init__(self, msg, last=None, trace=None):
        super().__init__(msg)
        self.last = last
        self.trace = trace


class SearchFailed(NumericFailure):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class CertificationFailed(NumericFailure):
    def __init__(self, msg, witnesses=None):
        super().__init__(msg)
        self.witnesses = witnesses or []
