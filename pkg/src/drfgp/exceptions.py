"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`DRFGPError`
so callers (and the CLI) can tell library failures from programming errors.
The ``category`` attribute is what the command line reports and maps to an
exit code.
"""


class DRFGPError(Exception):
    """Base class for all package errors."""

    category = "error"


class InvalidSpecError(DRFGPError, ValueError):
    """Kernel hyperparameters are invalid (e.g. non-positive lengthscale)."""

    category = "invalid-spec"


class ShapeError(DRFGPError, ValueError):
    """Array dimensions do not match."""

    category = "shape"


class NumericalDegeneracyError(DRFGPError, ArithmeticError):
    """A precision matrix failed its Cholesky factorization."""

    category = "numerical"


class InvalidGraphError(DRFGPError, ValueError):
    """Graph is disconnected or otherwise unusable for consensus."""

    category = "invalid-graph"


class GraphGenerationError(DRFGPError, RuntimeError):
    """Random graph rejection sampling gave up."""

    category = "graph-generation"


class DegenerateWeightsError(DRFGPError, ValueError):
    """All log-weights are -inf."""

    category = "degenerate-weights"


class IngestionError(DRFGPError, ValueError):
    """A data file cell could not be parsed."""

    category = "ingestion"


class SchemaError(DRFGPError, ValueError):
    """Data file does not match the requested schema."""

    category = "schema"


class ConfigError(DRFGPError, ValueError):
    """Experiment configuration is invalid."""

    category = "config"


class SnapshotError(DRFGPError, ValueError):
    """Snapshot file is unreadable or of an unknown version."""

    category = "snapshot"
