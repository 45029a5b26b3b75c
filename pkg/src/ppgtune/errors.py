"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line interface:
2 for bad input (validation), 3 for runtime or numerical failures.
"""


class PpgTuneError(Exception):
    exit_code = 3


class ValidationError(PpgTuneError):
    exit_code = 2


class InvalidInput(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class InsufficientData(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class InvalidBand(ValidationError):
    pass


class NyquistViolation(ValidationError):
    pass


class InvalidFrequency(ValidationError):
    pass


class DesignFailure(PpgTuneError):
    """A designed cascade came out unstable. Indicates a numerics bug."""


class NoBeatsDetected(PpgTuneError):
    pass


class UndefinedMetric(PpgTuneError):
    pass


class DegenerateVariance(PpgTuneError):
    pass
