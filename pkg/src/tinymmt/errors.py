"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, data problems
exit 3, everything else 4.
"""


class TinymmtError(Exception):
    pass


class ShapeError(TinymmtError):
    """Tensor dimensions disagree with what an operation requires."""


class ConfigError(TinymmtError):
    """Invalid run/stage/model configuration."""


class DataError(TinymmtError):
    """Invalid or inconsistent input data."""


class TsvParseError(DataError):
    """A TSV line failed validation; message carries file and line number."""


class VocabularyError(DataError):
    """Text contains symbols outside the vocabulary."""


class BudgetError(DataError):
    """An assembled sequence would exceed the model's context length."""


class CheckpointError(TinymmtError):
    """Checkpoint file is corrupt, truncated, or of an unsupported version."""
