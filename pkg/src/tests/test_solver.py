"""
Tests for the analytic fields, the explicit integrator and the manufactured-solution studies.
"""
import math
import unittest
import sys
import os
from dataclasses import replace
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

import numpy as np

from src.grid.environment import EnvironmentParams
from src.grid.mesh import Grid, ScalarField
from src.kernel.bounds import kernel_constants
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.solver.fields import FIELD_PRESETS, build_field
from src.solver.integrator import Integrator, run, shifted, stable_dt, step
from src.solver.manufactured import MMS_CASES, convergence_study, manufactured_case
from src.solver.problem import ProblemSpec, StepControls
from src.utils.errors import PreconditionError, SolverError
from src.utils.event_bus import RUN_FINISHED, SNAPSHOT_STORED, STEP_COMPLETED, EventBus

SLOW = os.environ.get("FORCHHEIMER_SLOW_TESTS") == "1"

LAW = ForchheimerLaw((1.0, 1.0), (1.0,))
ROTATION = RotationSpec(axis=(0.0, 0.0, 1.0), coriolis=1.0)


def make_spec(preset="constant", offset=1.0, amplitude=0.0, T=0.01, forcing=False, n=4, source=None):
    grid = Grid.cube(n)
    env = EnvironmentParams(phi=1.0, G=0.5, Omega=0.5, theta=math.pi / 4, rot=ROTATION,
                            forcing_enabled=forcing)
    psi = build_field(preset, grid, offset, amplitude)
    u0 = ScalarField(grid, psi.value(grid.cell_centers(), 0.0))
    return ProblemSpec(env=env, law=LAW, grid=grid, u0=u0, psi=psi, T=T, source=source)


class TestFields(unittest.TestCase):
    """Closed-form derivatives of the field presets."""

    def setUp(self):
        self.grid = Grid.cube(4)
        self.x = np.array([[0.21, 0.47, 0.83], [0.9, 0.1, 0.5]])

    def test_unknown_preset(self):
        with self.assertRaises(PreconditionError):
            build_field("no-such-field", self.grid)

    def test_gradients_match_finite_differences(self):
        h = 1e-6
        for preset in FIELD_PRESETS:
            field = build_field(preset, self.grid, 1.0, 0.3)
            with self.subTest(preset=preset):
                fd = np.stack([(field.value(self.x + h * e, 0.2) - field.value(self.x - h * e, 0.2)) / (2 * h)
                               for e in np.eye(3)], axis=-1)
                np.testing.assert_allclose(field.gradient(self.x, 0.2), fd, atol=1e-6)
                dt = (field.value(self.x, 0.2 + h) - field.value(self.x, 0.2 - h)) / (2 * h)
                np.testing.assert_allclose(field.time_derivative(self.x, 0.2), dt, atol=1e-6)

    def test_hessians_match_finite_differences(self):
        h = 1e-5
        for preset in FIELD_PRESETS:
            field = build_field(preset, self.grid, 1.0, 0.3)
            with self.subTest(preset=preset):
                fd = np.stack([(field.gradient(self.x + h * e, 0.2) - field.gradient(self.x - h * e, 0.2)) / (2 * h)
                               for e in np.eye(3)], axis=-1)
                np.testing.assert_allclose(field.hessian(self.x, 0.2), fd, atol=1e-5)

    def test_trace_and_difference(self):
        a = build_field("sine-x1", self.grid, 1.0, 0.5)
        b = build_field("constant", self.grid, 1.0, 0.0)
        np.testing.assert_allclose(a.trace_at(0.3)(self.x), a.value(self.x, 0.3))
        np.testing.assert_allclose((a - b).value(self.x, 0.3), a.value(self.x, 0.3) - 1.0)


class TestIntegrator(unittest.TestCase):
    """Time stepping, snapshot cadence and failure reporting."""

    def test_stable_dt(self):
        spec = make_spec()
        kc = kernel_constants(spec.law, spec.rot)
        expected = 0.4 * 1.0 * 0.25 ** 2 / (6.0 * kc.c7 * (1.0 + kc.chi1) ** kc.a)
        self.assertAlmostEqual(stable_dt(spec), expected)
        self.assertEqual(stable_dt(spec, StepControls(max_dt=1e-9)), 1e-9)

    def test_constant_is_steady_without_forcing(self):
        traj = run(make_spec(T=0.05))
        self.assertEqual(traj.times[-1], 0.05)
        np.testing.assert_allclose(traj.final.values, 1.0, atol=1e-13)
        self.assertLessEqual(traj.max_balance_residual, 1e-10)

    def test_single_step(self):
        spec = make_spec(T=0.01)
        u_next = step(spec, (spec.u0, 0.0), 1e-4)
        np.testing.assert_allclose(u_next.values, 1.0, atol=1e-14)
        self.assertEqual(u_next.grid, spec.grid)

    def test_zero_horizon(self):
        traj = run(make_spec(T=0.0))
        self.assertEqual(traj.times, [0.0])
        self.assertEqual(traj.steps, [])

    def test_snapshot_cadence(self):
        spec = make_spec("sine-bump", 1.0, 0.2, T=0.01)
        traj = Integrator(spec, StepControls(snapshot_every=3)).run()
        self.assertTrue(all(b > a for a, b in zip(traj.times, traj.times[1:])))
        self.assertEqual(traj.times[-1], spec.T)
        steps = len(traj.steps)
        expected = 1 + steps // 3 + (0 if steps % 3 == 0 else 1)
        self.assertEqual(len(traj.snapshots), expected)
        self.assertTrue(all(record.dt <= traj.stable_dt * (1 + 1e-12) for record in traj.steps))

    def test_events_published(self):
        bus = EventBus()
        counts = {STEP_COMPLETED: 0, SNAPSHOT_STORED: 0, RUN_FINISHED: 0}

        def count(event):
            counts[event.name] += 1

        for name in counts:
            bus.subscribe(name, count)
        traj = Integrator(make_spec(T=0.005), event_bus=bus).run()
        self.assertEqual(counts[STEP_COMPLETED], len(traj.steps))
        self.assertEqual(counts[SNAPSHOT_STORED], len(traj.snapshots) - 1)
        self.assertEqual(counts[RUN_FINISHED], 1)

    def test_diffusion_respects_maximum(self):
        # without rotation the face flux is a positive multiple of the normal difference
        spec = replace(make_spec("sine-bump", 1.0, 0.3, T=0.02), rot=RotationSpec())
        traj = run(spec)
        self.assertLessEqual(float(np.max(traj.final.values)), float(np.max(traj.initial.values)) + 1e-12)
        self.assertGreaterEqual(float(np.min(traj.final.values)), 1.0 - 1e-12)

    def test_velocity_recorded(self):
        traj = Integrator(make_spec(T=0.002, forcing=True), StepControls(store_velocity=True, kappa=2.0)).run()
        self.assertEqual(len(traj.velocities), len(traj.snapshots))
        self.assertTrue(all(v is not None for v in traj.velocities))

    def test_failure_carries_partial_trajectory(self):
        def broken(x, t):
            return np.full(x.shape[:-1], np.nan)

        with self.assertRaises(SolverError) as ctx:
            run(make_spec(T=0.01, source=broken))
        record = ctx.exception.to_record()
        self.assertEqual(record["last_time"], 0.0)
        self.assertEqual(record["snapshots"], 1)

    def test_shifted_trajectory(self):
        spec = make_spec("sine-x1", 1.0, 0.2, T=0.004)
        traj = run(spec)
        bar = shifted(traj, spec.psi)
        np.testing.assert_allclose(bar.initial.values, 0.0, atol=1e-15)
        self.assertEqual(bar.times, traj.times)

    def test_shifted_initial_norm_matches_closed_form(self):
        spec = make_spec(T=0.0, n=32)
        bump = build_field("sine-x1", spec.grid, 1.0, 1.0)
        spec = replace(spec, u0=ScalarField(spec.grid, bump.value(spec.grid.cell_centers(), 0.0)))
        bar = shifted(run(spec), spec.psi)
        # u0 - Psi = sin(pi x_1), whose squared L2 norm over the unit cube is 1/2
        exact = math.sqrt(0.5)
        self.assertAlmostEqual(bar.initial.l2_norm(), exact, delta=0.01 * exact)

    def test_balance_holds_on_every_step_of_a_long_run(self):
        spec = make_spec("sine-bump", 1.0, 0.3, T=0.05, forcing=True, n=6)
        traj = Integrator(spec, StepControls(max_dt=1e-4, snapshot_every=100)).run()
        self.assertGreaterEqual(len(traj.steps), 500)
        self.assertGreater(float(np.max(np.abs(traj.final.values - traj.initial.values))), 0.0)
        worst = max(record.balance_residual for record in traj.steps)
        self.assertLessEqual(worst, 1e-12)
        self.assertEqual(traj.kernel_failures, 0)

    def test_problem_validation(self):
        spec = make_spec()
        with self.assertRaises(ValueError):
            replace(spec, T=-1.0)
        with self.assertRaises(ValueError):
            replace(spec, grid=Grid.cube(5))
        with self.assertRaises(ValueError):
            StepControls(safety=1.5)


class TestManufactured(unittest.TestCase):
    """Manufactured cases and convergence tables."""

    def test_cases_known(self):
        self.assertEqual(set(MMS_CASES), {"steady-const", "mms-quadratic", "mms-trig"})
        with self.assertRaises(PreconditionError):
            manufactured_case("nope")

    def test_steady_source_vanishes(self):
        case = manufactured_case("steady-const", n=4)
        centers = case.spec.grid.cell_centers()
        np.testing.assert_allclose(case.spec.source(centers, 0.3), 0.0, atol=1e-14)

    def test_steady_case_has_zero_error(self):
        table = convergence_study("steady-const", [4, 8], T=0.01)
        self.assertTrue(all(row.error <= 1e-12 for row in table.rows))

    def test_space_error_decreases(self):
        table = convergence_study("mms-trig", [4, 8], T=0.002)
        self.assertLess(table.rows[1].error, table.rows[0].error)
        self.assertEqual(table.to_dict()["mode"], "space")

    def test_time_order_first(self):
        table = convergence_study("mms-trig", [0, 1, 2], mode="time", n=4)
        self.assertIsNotNone(table.observed_order)
        self.assertGreater(table.observed_order, 0.7)
        self.assertLess(table.observed_order, 1.3)
        self.assertIsNone(table.rows[-1].error)

    def test_quadratic_time_order_first(self):
        table = convergence_study("mms-quadratic", [0, 1, 2], mode="time", n=4)
        self.assertIsNotNone(table.observed_order)
        self.assertGreater(table.observed_order, 0.7)
        self.assertLess(table.observed_order, 1.3)

    def test_preconditions(self):
        with self.assertRaises(PreconditionError):
            convergence_study("mms-trig", [8])
        with self.assertRaises(PreconditionError):
            convergence_study("mms-trig", [4, 8], mode="both")

    @unittest.skipUnless(SLOW, "set FORCHHEIMER_SLOW_TESTS=1 for the full refinement study")
    def test_space_order_second(self):
        table = convergence_study("mms-trig", [8, 16, 32])
        self.assertGreater(table.observed_order, 1.8)


if __name__ == '__main__':
    unittest.main()
