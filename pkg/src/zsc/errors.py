"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so new errors should subclass one of
the three families below rather than ``ZSCError`` directly.
"""


class ZSCError(Exception):
    """Root of all package errors."""


class DomainError(ZSCError, ValueError):
    """An input lies outside the set where the requested quantity is defined."""


class NumericalError(ZSCError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance."""


class ConfigInvalid(ZSCError, ValueError):
    """A run configuration or model document failed validation.

    ``path`` names the offending field, e.g. ``"params.m"``.
    """

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class EmptyConstraintSet(DomainError):
    pass


class OptimizerDidNotConverge(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DegenerateChart(DomainError):
    pass


class NotApplicable(DomainError):
    pass


class DomainExceeded(DomainError):
    pass


class NonRadialUnsupported(DomainError):
    pass


class DeltaTooLarge(DomainError):
    pass


class SubfocalUndefined(DomainError):
    pass
