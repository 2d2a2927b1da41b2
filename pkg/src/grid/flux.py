"""
Face flux X(grad u + u^2 Z) for the finite-volume update, and cell-centered momentum.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from src.grid.environment import EnvironmentParams, eval_Z
from src.grid.mesh import (
    FaceFlux,
    Grid,
    ScalarField,
    Trace,
    VecField,
    boundary_values,
    face_gradient,
    field_values,
    gradient,
)
from src.kernel.inversion import ToleranceSpec, solve_F
from src.kernel.law import ForchheimerLaw, RotationSpec

VELOCITY_EPSILON = 1e-12


@dataclass
class FluxResult:
    faces: FaceFlux
    momentum: Optional[VecField] = None
    max_residual: float = 0.0
    kernel_failures: int = 0


def face_phi(grid: Grid, env: EnvironmentParams, u, t: float, trace: Trace) -> tuple:
    """Phi = grad u + u^2 Z at the faces normal to each axis, each of shape face_shape(d) + (3,)."""
    vals = field_values(u, grid)
    normal = face_gradient(grid, vals, trace)
    cell_grad = gradient(grid, vals, trace).values
    out = []
    for d in range(3):
        grad_face = np.empty(grid.face_shape(d) + (3,))
        padded = np.concatenate(
            [np.take(cell_grad, [0], axis=d), cell_grad, np.take(cell_grad, [-1], axis=d)], axis=d)
        lead = [slice(None)] * 3
        trail = [slice(None)] * 3
        lead[d] = slice(0, -1)
        trail[d] = slice(1, None)
        grad_face[...] = 0.5 * (padded[tuple(lead)] + padded[tuple(trail)])
        grad_face[..., d] = normal.q[d]

        moved = np.moveaxis(vals, d, 0)
        low, high = boundary_values(grid, trace, d)
        u_face = np.concatenate([low[None], 0.5 * (moved[1:] + moved[:-1]), high[None]], axis=0)
        u_face = np.moveaxis(u_face, 0, d)

        z = eval_Z(env, grid.face_centers(d), t)
        out.append(grad_face + (u_face ** 2)[..., None] * z)
    return tuple(out)


def cell_phi(grid: Grid, env: EnvironmentParams, u, t: float, trace: Optional[Trace] = None) -> np.ndarray:
    """Phi at cell centers; without a trace the boundary gradient is one-sided."""
    vals = field_values(u, grid)
    grad = gradient(grid, vals, trace).values
    return grad + (vals ** 2)[..., None] * eval_Z(env, grid.cell_centers(), t)


class FluxAssembler:
    """Builds face fluxes for one problem; keeps the last face solutions as Newton warm starts."""

    def __init__(self, grid: Grid, env: EnvironmentParams, law: ForchheimerLaw,
                 rot: RotationSpec, tol: Optional[ToleranceSpec] = None):
        self.logger = logging.getLogger(__name__)
        self.grid = grid
        self.env = env
        self.law = law
        self.rot = rot
        self.tol = tol
        self._warm: Dict[int, np.ndarray] = {}

    def assemble(self, u, t: float, trace: Trace, with_momentum: bool = False) -> FluxResult:
        phis = face_phi(self.grid, self.env, u, t, trace)
        q = []
        max_residual = 0.0
        failures = 0
        for d, phi in enumerate(phis):
            solved = solve_F(self.law, self.rot, phi, tol=self.tol, initial_guess=self._warm.get(d))
            self._warm[d] = solved.v
            max_residual = max(max_residual, solved.max_residual)
            failures += solved.continued
            q.append(solved.v[..., d])

        momentum = None
        if with_momentum:
            momentum = cell_momentum(self.grid, self.env, self.law, self.rot, u, t, trace, self.tol)
        self.logger.debug(f"Assembled face fluxes at t={t:.6g}, max kernel residual {max_residual:.3e}")
        return FluxResult(faces=FaceFlux(self.grid, tuple(q)), momentum=momentum, max_residual=max_residual,
                          kernel_failures=failures)

    def reset(self) -> None:
        self._warm.clear()


def flux(grid: Grid, env: EnvironmentParams, law: ForchheimerLaw, rot: RotationSpec, u, t: float,
         trace: Trace, with_momentum: bool = False, tol: Optional[ToleranceSpec] = None) -> FluxResult:
    """One-off face flux evaluation; the solver keeps a FluxAssembler instead."""
    return FluxAssembler(grid, env, law, rot, tol).assemble(u, t, trace, with_momentum=with_momentum)


def cell_momentum(grid: Grid, env: EnvironmentParams, law: ForchheimerLaw, rot: RotationSpec, u,
                  t: float, trace: Optional[Trace] = None, tol: Optional[ToleranceSpec] = None) -> VecField:
    """rho v = -X(Phi) at cell centers."""
    phi = cell_phi(grid, env, u, t, trace)
    return VecField(grid, -solve_F(law, rot, phi, tol=tol).v)


def recover_velocity(momentum: VecField, u: ScalarField, kappa: float,
                     eps: float = VELOCITY_EPSILON) -> VecField:
    """v = momentum / (kappa u) where |u| > eps, zero elsewhere."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    density = kappa * u.values
    mask = np.abs(u.values) > eps
    safe = np.where(mask, density, 1.0)
    v = np.where(mask[..., None], momentum.values / safe[..., None], 0.0)
    return VecField(momentum.grid, v)
