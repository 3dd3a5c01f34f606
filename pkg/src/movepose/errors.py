"""Exception hierarchy.

Every error carries a stable ``category`` string and the process exit code the
CLI maps it to (1 for evaluation/inference failures, 2 for I/O or config).
"""


class MoveposeError(Exception):
    category = "error"
    exit_code = 1


class DimensionError(MoveposeError, ValueError):
    category = "dimension"


class ConfigurationError(MoveposeError, ValueError):
    category = "configuration"
    exit_code = 2


class InitializationError(MoveposeError, RuntimeError):
    category = "unbound-weights"


class InputError(MoveposeError, ValueError):
    category = "input"
    exit_code = 2


class NoLabeledKeypointsError(MoveposeError, ValueError):
    """OKS is undefined for a ground truth without labeled keypoints."""

    category = "no-labeled-keypoints"


class IngestionError(MoveposeError, ValueError):
    category = "ingestion"
    exit_code = 2


class ParseError(IngestionError):
    category = "parse"

    def __init__(self, message, index=None):
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message)
        self.index = index


class WeightFileError(MoveposeError, IOError):
    category = "weights-corrupt"
    exit_code = 2

    def __init__(self, message, tensor=None):
        if tensor is not None:
            message = f"{message} (tensor {tensor!r})"
        super().__init__(message)
        self.tensor = tensor


class WeightsNotFoundError(WeightFileError):
    category = "weights-not-found"


class BadMagicError(WeightFileError):
    category = "weights-bad-magic"


class VersionMismatchError(WeightFileError):
    category = "weights-bad-version"


class MissingTensorError(WeightFileError):
    category = "weights-missing-tensor"


class ShapeMismatchError(WeightFileError):
    category = "weights-shape-mismatch"


class TruncatedFileError(WeightFileError):
    category = "weights-truncated"
