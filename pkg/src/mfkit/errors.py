"""Exception types shared across the toolkit."""


class MFKitError(Exception):
    """Base class for toolkit errors."""


class FormatError(MFKitError):
    """A data file violates its declared dialect.

    Carries the offending line number (1-based) when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LeakageError(MFKitError):
    """A benchmark document leaked into a prompt as a few-shot exemplar."""


class AuthError(MFKitError):
    """The remote endpoint rejected our credentials; the run must abort."""


class RunLockedError(MFKitError):
    """Another run owns the output directory."""
