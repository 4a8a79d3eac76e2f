"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError
subclasses -> 3, RuntimeError subclasses (training, env misuse) -> 4.
"""


class QuantGymError(Exception):
    """Base class for all package errors."""


class ConfigError(QuantGymError):
    """Invalid or unknown configuration."""


class DataError(QuantGymError):
    """Problems with input data (ingest, cleaning, alignment)."""


class IngestError(DataError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class MergeConflictError(DataError):
    """Same (ticker, timestamp) key with differing values."""


class SplitError(DataError):
    """Split specification produced an empty or invalid segment."""


class FeatureError(DataError):
    """Feature computation failed (unknown indicator, bad window, ...)."""


class EnvError(QuantGymError):
    """Environment misuse (step after done, bad action, bad start)."""


class TrainingError(QuantGymError):
    """Agent training failed (divergence, dimension mismatch)."""
