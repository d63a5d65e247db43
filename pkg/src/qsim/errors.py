"""Exception hierarchy shared by all qsim modules."""


class QsimError(Exception):
    """Base class for all qsim errors."""


class UsageError(QsimError):
    """Caller passed arguments that cannot be interpreted (CLI exit code 2)."""


class ValidationError(QsimError):
    """A mathematical object failed its defining invariants."""


class CapacityError(QsimError):
    """A construction exceeded the configured maximum total dimension (CLI exit code 3)."""


class AnalysisError(QsimError):
    """An analysis routine received inputs outside its applicability domain."""


class ImpossibleOutcomeError(QsimError):
    """A conditioning outcome has zero branch weight."""
