"""Exception hierarchy shared across the package.

Contract violations (bad shapes, bad arguments, malformed data) are kept
distinct from numeric failures so the CLI can map them to different exit
codes: data/contract problems exit 3, numeric problems exit 4.
"""


class ContractError(ValueError):
    """A precondition on an operation's inputs was violated."""


class DimensionError(ContractError):
    """Array shapes do not line up for the requested operation."""


class SizeLimitError(ContractError):
    """Instance exceeds a hard size limit of an exact oracle."""


class DataError(ValueError):
    """A file, record, or serialized blob does not match its schema."""


class CheckpointError(DataError):
    """Base class for checkpoint deserialization failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported by this code."""


class CheckpointShapeError(CheckpointError):
    """Stored parameter shapes disagree with the stored config."""


class CheckpointCorruptError(CheckpointError):
    """Checkpoint bytes are truncated or fail integrity checks."""


class NumericError(RuntimeError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""
