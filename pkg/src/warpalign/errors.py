"""Exception types shared across the package."""


class WarpAlignError(Exception):
    """Base class for all package-specific errors."""


class ParseError(WarpAlignError):
    """A data file could not be parsed (message carries the line number)."""


class FormatError(WarpAlignError):
    """A file is structurally unusable (empty, wrong layout, bad magic)."""


class ContractViolation(WarpAlignError):
    """An operation was called with arguments violating its preconditions."""


class ConfigError(WarpAlignError):
    """A configuration object fails its invariants."""


class CheckpointVersionError(FormatError):
    """Checkpoint file declares an unsupported format version."""


class CheckpointIntegrityError(FormatError):
    """Checkpoint payload is inconsistent with its header."""


class TrainingError(WarpAlignError):
    """Training aborted (e.g. non-finite loss or gradient)."""
