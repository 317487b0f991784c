"""Exception hierarchy shared by every randsel module.

Each class carries the process exit code the command-line front end uses
when the error escapes a subcommand.
"""


class RandSelError(Exception):
    exit_code = 1


class InvalidParameterError(RandSelError, ValueError):
    exit_code = 1


class InvalidDataError(RandSelError, ValueError):
    exit_code = 2


class DegenerateDataError(InvalidDataError):
    """All rows (or all sampled rows) coincide, so no bandwidth can be set."""


class DegenerateKernelError(RandSelError, ArithmeticError):
    """A centered kernel has (numerically) zero Frobenius norm."""

    exit_code = 3


class DegenerateLabelsError(DegenerateKernelError):
    """Only one label class is available where two are required."""


class InsufficientSamplesError(RandSelError):
    """Some active feature was never drawn as the added feature."""

    exit_code = 3
