"""Exception hierarchy shared by every module of the package."""


class NordVlasovError(Exception):
    """Base class for all package errors."""


class ConfigError(NordVlasovError):
    """Invalid configuration. ``violations`` lists every failed invariant."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [self]

    @property
    def codes(self):
        return [type(v).__name__ for v in self.violations]


class DomainTooSmall(ConfigError):
    pass


class CflViolation(ConfigError):
    pass


class NonpositiveRun(ConfigError):
    pass


class OutOfDomain(NordVlasovError):
    pass


class HistoryGap(NordVlasovError):
    pass


class NegativeSource(NordVlasovError):
    pass


class KernelWiderThanDomain(NordVlasovError):
    pass


class StepUnderflow(NordVlasovError):
    pass


class SingularJacobian(NordVlasovError):
    pass


class InvalidExponents(NordVlasovError):
    pass


class GridMismatch(NordVlasovError):
    pass


class SnapshotFormatError(NordVlasovError):
    pass
