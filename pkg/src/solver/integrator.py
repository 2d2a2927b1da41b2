"""
Explicit conservative time integration of phi u_t = div X(grad u + u^2 Z) + f.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.grid.flux import FluxAssembler, cell_momentum, recover_velocity
from src.grid.mesh import ScalarField, divergence
from src.kernel.bounds import kernel_constants
from src.kernel.inversion import ToleranceSpec
from src.solver.fields import AnalyticField
from src.solver.problem import ProblemSpec, StepControls, StepRecord, Trajectory
from src.utils.errors import ForchheimerError, SolverError
from src.utils.event_bus import RUN_FINISHED, SNAPSHOT_STORED, STEP_COMPLETED, EventBus

logger = logging.getLogger(__name__)

LANDING_FRACTION = 1e-12


def lipschitz_bound(spec: ProblemSpec) -> float:
    """Global bound c7 (1 + chi1)^a of |X'| (its value at y = 0)."""
    kc = kernel_constants(spec.law, spec.rot)
    return kc.c7 * (1.0 + kc.chi1) ** kc.a


def stable_dt(spec: ProblemSpec, controls: Optional[StepControls] = None) -> float:
    """safety * phi * min(dx)^2 / (6 Lambda), capped by max_dt."""
    controls = controls or StepControls()
    dt = controls.safety * spec.env.phi * spec.grid.min_dx ** 2 / (6.0 * lipschitz_bound(spec))
    return min(dt, controls.max_dt)


def source_values(spec: ProblemSpec, t: float) -> np.ndarray:
    if spec.source is None:
        return np.zeros(spec.grid.n)
    return np.asarray(spec.source(spec.grid.cell_centers(), t), dtype=float)


@dataclass
class StepResult:
    u: ScalarField
    max_residual: float
    balance_residual: float
    kernel_failures: int = 0


class Integrator:
    """Advances one problem in time and publishes progress on an optional event bus."""

    def __init__(self, spec: ProblemSpec, controls: Optional[StepControls] = None,
                 event_bus: Optional[EventBus] = None, tol: Optional[ToleranceSpec] = None):
        self.logger = logging.getLogger(__name__)
        self.spec = spec
        self.controls = controls or StepControls()
        self.event_bus = event_bus
        self.assembler = FluxAssembler(spec.grid, spec.env, spec.law, spec.rot, tol)
        self.tol = tol
        self.dt_stable = stable_dt(spec, self.controls)

    def step(self, u: ScalarField, t: float, dt: float) -> StepResult:
        """u_next = u + (dt / phi) (div q + f), checked against the discrete balance identity."""
        spec = self.spec
        if dt > self.dt_stable + LANDING_FRACTION * max(spec.T, self.dt_stable):
            self.logger.warning(f"dt={dt:.3e} exceeds the stable bound {self.dt_stable:.3e}")

        result = self.assembler.assemble(u, t, spec.psi.trace_at(t))
        div = divergence(spec.grid, result.faces).values
        f = source_values(spec, t)
        increment = (dt / spec.env.phi) * (div + f)
        if not np.all(np.isfinite(increment)):
            raise SolverError(f"non-finite update at t={t:.6g}")

        vol = spec.grid.cell_volume
        stored = spec.env.phi * float(np.sum(increment)) * vol
        supplied = dt * (result.faces.boundary_inflow() + float(np.sum(f)) * vol)
        scale = (spec.env.phi * float(np.sum(np.abs(increment))) * vol
                 + dt * (result.faces.boundary_magnitude() + float(np.sum(np.abs(f))) * vol))
        balance = abs(stored - supplied) / scale if scale > 0 else 0.0

        return StepResult(u=ScalarField(spec.grid, u.values + increment),
                          max_residual=result.max_residual, balance_residual=balance,
                          kernel_failures=result.kernel_failures)

    def _velocity(self, u: ScalarField, t: float):
        if not self.controls.store_velocity:
            return None
        spec = self.spec
        momentum = cell_momentum(spec.grid, spec.env, spec.law, spec.rot, u, t,
                                 spec.psi.trace_at(t), self.tol)
        return recover_velocity(momentum, u, self.controls.kappa)

    def run(self) -> Trajectory:
        spec, controls = self.spec, self.controls
        traj = Trajectory(snapshot_every=controls.snapshot_every, stable_dt=self.dt_stable)
        traj.store(0.0, spec.u0, self._velocity(spec.u0, 0.0))
        self.logger.info(f"Integrating to T={spec.T} on grid {spec.grid.n} "
                         f"with dt <= {self.dt_stable:.3e}")

        u, t, index = spec.u0, 0.0, 0
        while t < spec.T:
            remaining = spec.T - t
            dt = min(self.dt_stable, remaining)
            landing = remaining - dt <= LANDING_FRACTION * spec.T
            if landing:
                dt = remaining
            try:
                result = self.step(u, t, dt)
            except ForchheimerError as e:
                self.logger.error(f"Step {index + 1} failed at t={t:.6g}: {e}")
                raise SolverError(f"step {index + 1} failed at t={t:.6g}: {e}",
                                  trajectory=traj, cause=e) from e

            index += 1
            t = spec.T if landing else t + dt
            u = result.u
            record = StepRecord(index=index, t=t, dt=dt, max_residual=result.max_residual,
                                balance_residual=result.balance_residual,
                                kernel_failures=result.kernel_failures)
            traj.steps.append(record)
            self.logger.debug(f"step {index}: t={t:.6g} dt={dt:.3e} "
                              f"residual={result.max_residual:.2e} balance={result.balance_residual:.2e}")
            self._publish(STEP_COMPLETED, record)

            if landing or index % controls.snapshot_every == 0:
                traj.store(t, u, self._velocity(u, t))
                self._publish(SNAPSHOT_STORED, {"t": t, "index": len(traj.snapshots) - 1})

        summary = traj.summary()
        self.logger.info(f"Run finished: {summary['steps']} steps, {summary['snapshots']} snapshots")
        self._publish(RUN_FINISHED, summary)
        return traj

    def _publish(self, name: str, data) -> None:
        if self.event_bus is not None:
            self.event_bus.publish(name, data)


def step(spec: ProblemSpec, state: Tuple[ScalarField, float], dt: float) -> ScalarField:
    u, t = state
    return Integrator(spec).step(u, t, dt).u


def run(spec: ProblemSpec, controls: Optional[StepControls] = None,
        event_bus: Optional[EventBus] = None) -> Trajectory:
    return Integrator(spec, controls, event_bus).run()


def shifted(traj: Trajectory, psi: AnalyticField) -> Trajectory:
    """The trajectory of u_bar = u - Psi; its first snapshot is u_bar_0."""
    grid = traj.grid
    centers = grid.cell_centers()
    out = Trajectory(steps=traj.steps, snapshot_every=traj.snapshot_every, stable_dt=traj.stable_dt)
    for t, u in zip(traj.times, traj.snapshots):
        out.store(t, ScalarField(grid, u.values - psi.value(centers, t)))
    return out
