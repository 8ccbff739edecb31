from typing import Optional


class DataValidationError(ValueError):
    """Raised when input records or a CSV file break the dataset contract."""


class FoldConstructionError(ValueError):
    """Raised when a splitter cannot build a valid fold plan."""


class VariogramFitError(ValueError):
    """Raised when variogram estimation or fitting is impossible."""


class ResamplingError(ValueError):
    pass


class LearnerError(ValueError):
    pass


class TuningError(ValueError):
    pass


class MetricError(ValueError):
    """Raised when a metric is undefined for its inputs (single class, length mismatch)."""


class CellFailure(RuntimeError):
    """Wraps any error raised while running one (scheme, learner, config) cell."""

    def __init__(self, scheme: str, learner: str, config_id: Optional[int], cause: Exception):
        self.scheme = scheme
        self.learner = learner
        self.config_id = config_id
        self.cause = cause
        where = f"scheme={scheme}, learner={learner}"
        if config_id is not None:
            where += f", config_id={config_id}"
        super().__init__(f"[{where}] {type(cause).__name__}: {cause}")

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "learner": self.learner,
            "config_id": self.config_id,
            "error_type": type(self.cause).__name__,
            "message": str(self.cause),
        }
