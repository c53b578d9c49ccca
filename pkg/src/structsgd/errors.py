"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed numeric input: shape mismatch, non-finite entries, bad domain."""


class InvalidDistributionError(ValueError):
    """Sampling weights that are not a usable probability vector."""


class InadmissibleStepError(ValueError):
    """Step size outside the admissible range for the prescribed rate."""


class NotApplicableError(ValueError):
    """Requested quantity is undefined for the given sampling scheme."""


class DatasetFormatError(ValueError):
    """Dataset file violates the on-disk format. Carries the offending line."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class ReferenceNotConvergedError(RuntimeError):
    """Reference solve stopped before reaching the requested gradient norm."""


class ConfigError(ValueError):
    """Experiment configuration failed validation. Names the bad field."""


class AllRunsDivergedError(RuntimeError):
    """Every repetition of an experiment produced a non-finite iterate."""
