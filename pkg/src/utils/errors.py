"""
Error types shared by the kernel, grid, solver, auditor and command layer.
"""
from typing import Any, Dict, List, Optional, Tuple


class ForchheimerError(Exception):
    """Base class for all errors raised by the package."""

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable description written to error.json by the dispatcher."""
        return {"type": type(self).__name__, "message": str(self)}


class DomainError(ForchheimerError, ValueError):
    """Input outside the domain of a function (negative s, non-finite vectors, bad shapes)."""


class SingularDerivativeError(DomainError):
    """g'(0) was requested for a law whose smallest exponent is below one."""


class PreconditionError(ForchheimerError, ValueError):
    """A documented precondition of an operation does not hold."""


class KernelConvergenceError(ForchheimerError, RuntimeError):
    """Newton inversion of F failed even after continuation in the Coriolis coefficient."""

    def __init__(self, message: str, residual: float, count: int = 1):
        super().__init__(message)
        self.residual = residual
        self.count = count

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record.update({"residual": self.residual, "count": self.count})
        return record


class SolverError(ForchheimerError, RuntimeError):
    """A time step failed; the trajectory integrated so far is attached."""

    def __init__(self, message: str, trajectory: Any = None, cause: Optional[Exception] = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        if self.trajectory is not None:
            record["last_time"] = float(self.trajectory.times[-1])
            record["snapshots"] = len(self.trajectory.snapshots)
        if isinstance(self.cause, ForchheimerError):
            record["cause"] = self.cause.to_record()
        return record


class ConfigError(ForchheimerError, ValueError):
    """Configuration document failed validation."""

    def __init__(self, message: str, problems: Optional[List[Tuple[str, str]]] = None):
        super().__init__(message)
        self.problems = problems or []

    def to_record(self) -> Dict[str, Any]:
        record = super().to_record()
        record["problems"] = [{"key": key, "message": msg} for key, msg in self.problems]
        return record
