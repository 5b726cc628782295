"""
Exceptions raised by nuqkit modules.

The command line front end maps them to exit codes: usage errors to 1,
numerical and decoding failures to 2, violated preconditions to 3.
"""

class NuqkitError(RuntimeError):
    """Base class for all errors raised by this package."""
    exitCode = 2

class UsageError(NuqkitError):
    exitCode = 1

class PreconditionError(NuqkitError):
    """
    A documented precondition is violated. Message names the inequality
    that does not hold.
    """
    exitCode = 3

class NumericalError(NuqkitError):
    """
    Non-finite value or failed numerical procedure. If raised by simulator,
    carries the index of iteration where it happened.
    """
    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f'{message} (iteration {iteration})'
        super().__init__(message)
        self.iteration = iteration

class InfeasibleError(NumericalError):
    pass

class UnboundedError(NumericalError):
    pass

class DecodeError(NuqkitError):
    """Malformed, truncated or inconsistent bitstream."""
    pass
