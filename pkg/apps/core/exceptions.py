"""
Errors raised by the interim analysis apps.

Every domain failure derives from InterimAnalysisError so callers (management
commands, API views) can map them to exit codes or HTTP statuses in one place.
"""


class InterimAnalysisError(Exception):
    """Base class for domain errors."""


class EmptyStream(InterimAnalysisError):
    pass


class InvalidScale(InterimAnalysisError):
    pass


class InvalidEstimate(InterimAnalysisError):
    pass


class HorizonMismatch(InterimAnalysisError):
    pass


class NothingToPredict(InterimAnalysisError):
    pass


class InvalidConfig(InterimAnalysisError):
    pass


class InvalidComparison(InterimAnalysisError):
    pass


class StreamFileError(InterimAnalysisError):
    """
    Raised when a stream file violates its schema.
    `row` is the 1-based data row (header excluded), or None for file-level problems.
    """

    def __init__(self, message, row=None):
        self.row = row
        self.detail = message
        super().__init__(f"row {row}: {message}" if row is not None else message)


# Errors that mean "the inputs were wrong" rather than "the run failed".
CONFIGURATION_ERRORS = (InvalidConfig, StreamFileError)
