"""Exception hierarchy shared across the package."""


class OrthresError(Exception):
    """Base class for all package errors."""


class InvariantViolation(OrthresError):
    """A structural invariant of a tree or process failed validation."""


class ModelError(OrthresError):
    """Invalid model parameters or a broken model construction."""


class NodeCapExceeded(ModelError):
    """Tree construction would exceed the configured node cap."""

    def __init__(self, requested, cap):
        super().__init__(
            f"tree would need {requested} nodes, cap is {cap} "
            "(set ORTHRES_NODE_CAP to raise)"
        )
        self.requested = requested
        self.cap = cap


class SolverError(OrthresError):
    """A backward solve could not complete."""


class ContractionError(SolverError):
    """Lipschitz-in-y constant too large for the mesh: K * dC_max >= 1."""


class ConfigError(OrthresError):
    """Malformed or inconsistent experiment configuration."""
