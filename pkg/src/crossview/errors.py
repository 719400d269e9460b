"""Exception hierarchy shared across the package.

ValidationError covers malformed values and contract violations (CLI exit
code 1); ContainerIOError covers missing or corrupted files (exit code 2).
"""


class CrossviewError(Exception):
    pass


class ValidationError(CrossviewError, ValueError):
    pass


class GenerationError(CrossviewError, RuntimeError):
    """Raised when synthetic scene placement cannot be satisfied."""


class ContainerIOError(CrossviewError, OSError):
    pass


class HashMismatchError(ContainerIOError):
    def __init__(self, entry: str, expected: str, actual: str):
        super().__init__(
            f"payload {entry!r}: sha256 mismatch (manifest {expected}, file {actual})"
        )
        self.entry = entry
        self.expected = expected
        self.actual = actual
