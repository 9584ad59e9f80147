"""Shared exception types.

``PreconditionError`` signals that a caller violated a documented input
contract (bad geometry file, out-of-range parameter, malformed argument).
``ConvergenceError`` signals that an iterative numerical procedure exhausted
its budget without reaching its tolerance.  Command-line entry points map the
former to exit code 2 and the latter to exit code 3.
"""


class PreconditionError(ValueError):
    """An input violated a documented precondition."""


class ConvergenceError(RuntimeError):
    """An iterative procedure failed to converge within its budget."""
