"""Error taxonomy shared across the package.

CLI exit-code mapping: InputError -> 2, MissingArtifactError -> 3,
everything else -> 1.
"""


class TkgclError(Exception):
    """Base class for all package errors."""


class InputError(TkgclError):
    """Bad user-supplied input (files, flags, config)."""


class ParseError(InputError):
    """Malformed line in a quadruple file; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class EmptyDatasetError(InputError):
    """Quadruple file contained no facts."""


class DomainError(TkgclError):
    """An id fell outside the vocabulary or an argument outside its range."""


class ContractError(TkgclError):
    """A caller violated an operation's contract (shapes, labels, hooks)."""


class TemporalLeakError(TkgclError):
    """Replay machinery tried to read at or past the current task's time."""


class StreamContinuityError(TkgclError):
    """A task checkpoint needed to continue the stream is missing."""


class MissingArtifactError(TkgclError):
    """A required on-disk artifact (checkpoint, dataset) was not found."""


class NumericError(TkgclError):
    """Non-finite values appeared where the contract forbids them."""
