"""Exception hierarchy.

``DataError`` subclasses signal bad input or parameters (CLI exit code 2);
``InvariantViolation`` subclasses signal an internal contract failure (exit 3).
"""


class SpeedpartError(Exception):
    pass


class DataError(SpeedpartError, ValueError):
    pass


class InvariantViolation(SpeedpartError, RuntimeError):
    pass


class ParseError(DataError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class InvalidFractions(DataError):
    pass


class InvalidParams(DataError):
    pass


class BetaOutOfRange(DataError):
    pass


class UnsortedStream(DataError):
    pass


class MismatchedInput(DataError):
    pass


class InvalidAlpha(DataError):
    pass


class IndivisibleParts(DataError):
    pass


class NonChronological(DataError):
    pass


class BoundViolation(InvariantViolation):
    """A measured RF or EC exceeded its theoretical bound.

    ``violations`` holds one dict per offending run with everything needed to
    reproduce it.
    """

    def __init__(self, violations, report=None):
        self.violations = list(violations)
        self.report = report
        first = self.violations[0] if self.violations else {}
        super().__init__(f"{len(self.violations)} bound violation(s); first: {first}")
