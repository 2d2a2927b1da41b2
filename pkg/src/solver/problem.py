"""
Problem definition, step controls and the trajectory record produced by the integrator.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.grid.environment import EnvironmentParams
from src.grid.mesh import Grid, ScalarField, VecField
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.solver.fields import AnalyticField

# f(x, t) for points of shape (..., 3)
Source = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    """Initial-boundary value problem on the grid's box over [0, T].

    ``psi`` is the analytic extension of the boundary data; its trace on the box
    boundary is the Dirichlet condition. ``rot`` defaults to the environment's rotation.
    """
    env: EnvironmentParams
    law: ForchheimerLaw
    grid: Grid
    u0: ScalarField
    psi: AnalyticField
    T: float
    source: Optional[Source] = None
    rot: Optional[RotationSpec] = None
    requires_nonneg: bool = False

    def __post_init__(self):
        if self.rot is None:
            object.__setattr__(self, "rot", self.env.rot)
        if self.u0.grid != self.grid:
            raise ValueError("initial data lives on a different grid")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ValueError("final time T must be a finite nonnegative real")


@dataclass(frozen=True)
class StepControls:
    safety: float = 0.4
    max_dt: float = math.inf
    snapshot_every: int = 1
    store_velocity: bool = False
    kappa: float = 1.0

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.max_dt > 0:
            raise ValueError("max_dt must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")


@dataclass
class StepRecord:
    index: int
    t: float
    dt: float
    max_residual: float
    balance_residual: float
    kernel_failures: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "t": self.t, "dt": self.dt,
                "max_residual": self.max_residual, "balance_residual": self.balance_residual,
                "kernel_failures": self.kernel_failures}


@dataclass
class Trajectory:
    """Snapshots (t_k, u_k) with strictly increasing times, plus the per-step log."""
    times: List[float] = field(default_factory=list)
    snapshots: List[ScalarField] = field(default_factory=list)
    steps: List[StepRecord] = field(default_factory=list)
    velocities: List[Optional[VecField]] = field(default_factory=list)
    snapshot_every: int = 1
    stable_dt: float = math.inf

    def store(self, t: float, u: ScalarField, velocity: Optional[VecField] = None) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError(f"snapshot time {t} does not follow {self.times[-1]}")
        self.times.append(float(t))
        self.snapshots.append(u)
        self.velocities.append(velocity)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    @property
    def initial(self) -> ScalarField:
        return self.snapshots[0]

    @property
    def max_kernel_residual(self) -> float:
        return max((s.max_residual for s in self.steps), default=0.0)

    @property
    def max_balance_residual(self) -> float:
        return max((s.balance_residual for s in self.steps), default=0.0)

    @property
    def kernel_failures(self) -> int:
        """Face solves that needed continuation in R, summed over all steps."""
        return sum(s.kernel_failures for s in self.steps)

    @property
    def max_dt(self) -> float:
        return max((s.dt for s in self.steps), default=0.0)

    def values(self) -> np.ndarray:
        """Snapshot values stacked along a leading time axis."""
        return np.stack([u.values for u in self.snapshots])

    def summary(self) -> Dict[str, Any]:
        return {
            "snapshots": len(self.snapshots),
            "steps": len(self.steps),
            "final_time": self.times[-1] if self.times else 0.0,
            "max_dt": self.max_dt,
            "stable_dt": self.stable_dt,
            "max_kernel_residual": self.max_kernel_residual,
            "max_balance_residual": self.max_balance_residual,
            "kernel_failures": self.kernel_failures,
        }
