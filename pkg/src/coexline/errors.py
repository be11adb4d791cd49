"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """Requested size exceeds a configured enumeration or memory cap."""


class SolverError(RuntimeError):
    """A linear solve did not meet its residual tolerance."""
