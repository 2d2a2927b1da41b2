"""
Tests for the grid, the discrete operators, the rotating environment and the face flux.
"""
import math
import unittest
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

import numpy as np

from src.grid.mesh import FaceFlux, Grid, ScalarField, VecField, divergence, face_gradient, gradient, hessian
from src.grid.environment import (
    EnvironmentParams,
    PhysicalParams,
    env_bounds,
    eval_DZ,
    eval_e0,
    eval_Z,
    nondimensionalize,
    with_omega_star,
)
from src.grid.flux import cell_momentum, flux, recover_velocity
from src.grid.weight import kug_verify, weight_from_phi, weight_K
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.utils.errors import DomainError, PreconditionError

LAW = ForchheimerLaw((1.0, 1.0), (1.0,))
VERTICAL = RotationSpec(axis=(0.0, 0.0, 1.0), coriolis=0.0)


def linear(points):
    return 2.0 * points[..., 0] - points[..., 1] + 3.0 * points[..., 2]


class TestGrid(unittest.TestCase):
    """Grid construction and field containers."""

    def setUp(self):
        self.grid = Grid(lo=(0.0, -1.0, 0.0), hi=(1.0, 1.0, 2.0), n=(4, 8, 6))

    def test_invalid_grids(self):
        with self.assertRaises(ValueError):
            Grid(n=(3, 8, 8))
        with self.assertRaises(ValueError):
            Grid(lo=(0.0, 0.0, 1.0), hi=(1.0, 1.0, 1.0))

    def test_geometry(self):
        self.assertEqual(self.grid.dx, (0.25, 0.25, 1.0 / 3.0))
        self.assertEqual(self.grid.cell_centers().shape, (4, 8, 6, 3))
        self.assertEqual(self.grid.face_centers(1).shape, (4, 9, 6, 3))
        self.assertEqual(len(self.grid.corners()), 8)
        self.assertAlmostEqual(self.grid.integrate(np.ones(self.grid.n)), 4.0)
        self.assertAlmostEqual(self.grid.max_dx, 1.0 / 3.0)

    def test_field_validation(self):
        with self.assertRaises(DomainError):
            ScalarField(self.grid, np.zeros((4, 4, 4)))
        values = np.zeros(self.grid.n)
        values[0, 0, 0] = np.nan
        with self.assertRaises(DomainError):
            ScalarField(self.grid, values)

    def test_fields_are_read_only(self):
        field = ScalarField(self.grid, np.zeros(self.grid.n))
        with self.assertRaises(ValueError):
            field.values[0, 0, 0] = 1.0


class TestOperators(unittest.TestCase):
    """Discrete gradient, divergence and Hessian."""

    def setUp(self):
        self.grid = Grid.cube(8)
        self.centers = self.grid.cell_centers()

    def test_gradient_exact_on_linear(self):
        u = linear(self.centers)
        for trace in (None, linear):
            with self.subTest(trace=trace is not None):
                grad = gradient(self.grid, u, trace).values
                np.testing.assert_allclose(grad, np.broadcast_to([2.0, -1.0, 3.0], grad.shape), atol=1e-10)

    def test_face_gradient_of_linear(self):
        q = face_gradient(self.grid, linear(self.centers), linear)
        for d, expected in enumerate((2.0, -1.0, 3.0)):
            np.testing.assert_allclose(q.q[d], expected, atol=1e-10)

    def test_discrete_laplacian_interior(self):
        def quadratic(p):
            return p[..., 0] ** 2
        lap = divergence(self.grid, face_gradient(self.grid, quadratic(self.centers), quadratic)).values
        np.testing.assert_allclose(lap[1:-1, :, :], 2.0, atol=1e-9)

    def test_divergence_conserves(self):
        rng = np.random.default_rng(0)
        q = FaceFlux(self.grid, tuple(rng.normal(size=self.grid.face_shape(d)) for d in range(3)))
        total = divergence(self.grid, q).integral()
        self.assertAlmostEqual(total, q.boundary_inflow(), places=10)
        self.assertEqual(FaceFlux.zeros(self.grid).boundary_inflow(), 0.0)

    def test_hessian_of_quadratic(self):
        p = self.centers
        u = p[..., 0] * p[..., 1] + p[..., 2] ** 2
        hess = hessian(self.grid, u)
        expected = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
        np.testing.assert_allclose(hess[1:-1, 1:-1, 1:-1], np.broadcast_to(expected, (6, 6, 6, 3, 3)),
                                   atol=1e-8)


class TestEnvironment(unittest.TestCase):
    """Nondimensional parameters, the forcing field and derived bounds."""

    def setUp(self):
        self.grid = Grid.cube(4, lo=-1.0, hi=1.0)

    def test_nondimensionalize(self):
        env = nondimensionalize(PhysicalParams(kappa=2.0, phi_tilde=0.25, G_tilde=1.0, Omega_tilde=1.0,
                                               rho_star=0.5))
        self.assertAlmostEqual(env.phi, 0.5)
        self.assertAlmostEqual(env.G, 4.0)
        self.assertAlmostEqual(env.Omega, 2.0)
        self.assertAlmostEqual(env.coriolis, 4.0)

    def test_physical_validation(self):
        with self.assertRaises(ValueError):
            PhysicalParams(kappa=1.0, phi_tilde=1.0, G_tilde=1.0)
        with self.assertRaises(ValueError):
            EnvironmentParams(phi=1.0, G=1.0, theta=4.0)

    def test_forcing_vertical_axis(self):
        env = EnvironmentParams(phi=1.0, G=3.0, Omega=2.0, rot=VERTICAL)
        x = np.array([[1.0, 2.0, 5.0]])
        np.testing.assert_allclose(eval_e0(env, 0.7), [0.0, 0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(eval_Z(env, x, 0.7), [[-4.0, -8.0, -3.0]])
        np.testing.assert_allclose(eval_DZ(env), np.diag([-4.0, -4.0, 0.0]))

    def test_tilted_gravity_rotates(self):
        env = EnvironmentParams(phi=1.0, G=1.0, Omega=math.pi, theta=math.pi / 2, rot=VERTICAL)
        np.testing.assert_allclose(eval_e0(env, 0.0), [-1.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(eval_e0(env, 0.5), [0.0, -1.0, 0.0], atol=1e-15)

    def test_forcing_disabled(self):
        env = EnvironmentParams(phi=1.0, G=3.0, Omega=2.0, forcing_enabled=False)
        self.assertFalse(np.any(eval_Z(env, self.grid.cell_centers(), 0.0)))
        self.assertFalse(np.any(eval_DZ(env)))

    def test_env_bounds(self):
        env = EnvironmentParams(phi=1.0, G=2.0, rot=VERTICAL)
        bounds = env_bounds(env, self.grid)
        self.assertAlmostEqual(bounds.r0, math.sqrt(2.0))
        self.assertEqual(bounds.Omega_star, 0.0)
        self.assertAlmostEqual(bounds.chi_star, max(1.0, bounds.d_star))
        self.assertAlmostEqual(bounds.M_Z, 2.0)
        with self.assertRaises(PreconditionError):
            env_bounds(EnvironmentParams(phi=1.0, G=0.0), self.grid)

    def test_with_omega_star_keeps_rho_star(self):
        env = EnvironmentParams(phi=0.5, G=2.0, Omega=1.0, rot=RotationSpec(coriolis=0.8))
        for target in (0.0, 1.0, 5.0, 10.0):
            with self.subTest(omega_star=target):
                swept = with_omega_star(env, self.grid, target)
                self.assertAlmostEqual(env_bounds(swept, self.grid).Omega_star, target)
                self.assertAlmostEqual(swept.recovered_rho_star(), env.recovered_rho_star())
        with self.assertRaises(PreconditionError):
            with_omega_star(env, self.grid, -1.0)


class TestFlux(unittest.TestCase):
    """Face fluxes, cell momentum and the degeneracy weight."""

    def setUp(self):
        self.grid = Grid.cube(4)
        self.still = EnvironmentParams(phi=1.0, G=1.0, forcing_enabled=False)

    def test_constant_state_has_no_flux(self):
        u = np.full(self.grid.n, 2.0)
        result = flux(self.grid, self.still, LAW, VERTICAL, u, 0.0, lambda p: np.full(p.shape[:-1], 2.0))
        for d in range(3):
            np.testing.assert_allclose(result.faces.q[d], 0.0, atol=1e-14)

    def test_linear_state_flux(self):
        def ramp(p):
            return p[..., 0]
        u = ramp(self.grid.cell_centers())
        result = flux(self.grid, self.still, LAW, VERTICAL, u, 0.0, ramp, with_momentum=True)
        speed = (math.sqrt(5.0) - 1.0) / 2.0
        np.testing.assert_allclose(result.faces.q[0], speed, atol=1e-10)
        np.testing.assert_allclose(result.faces.q[1], 0.0, atol=1e-10)
        np.testing.assert_allclose(result.momentum.values[..., 0], -speed, atol=1e-10)

    def test_recover_velocity(self):
        u = ScalarField(self.grid, np.where(self.grid.cell_centers()[..., 0] < 0.5, 0.0, 2.0))
        momentum = VecField(self.grid, np.ones(self.grid.n + (3,)))
        v = recover_velocity(momentum, u, kappa=0.5).values
        np.testing.assert_allclose(v[0, 0, 0], 0.0)
        np.testing.assert_allclose(v[-1, 0, 0], [1.0, 1.0, 1.0])
        with self.assertRaises(ValueError):
            recover_velocity(momentum, u, kappa=0.0)

    def test_momentum_matches_face_flux_direction(self):
        env = EnvironmentParams(phi=1.0, G=1.0, Omega=1.0, rot=VERTICAL)
        u = np.ones(self.grid.n)
        m = cell_momentum(self.grid, env, LAW, VERTICAL, u, 0.0).values
        # Phi = Z when u = 1, so the momentum points up against gravity
        self.assertTrue(np.all(m[..., 2] > 0))

    def test_weight(self):
        self.assertEqual(float(weight_from_phi(np.zeros(3), 0.5)), 1.0)
        self.assertAlmostEqual(float(weight_from_phi(np.array([3.0, 0.0, 4.0]), 0.5)), 6.0 ** -0.5)

    def test_weight_of_linear_state(self):
        def ramp(p):
            return 3.0 * p[..., 0]
        u = ScalarField(self.grid, ramp(self.grid.cell_centers()))
        K = weight_K(self.grid, self.still, LAW, u, 0.0, ramp).values
        np.testing.assert_allclose(K, 4.0 ** -0.5, rtol=1e-12)
        self.assertTrue(np.all(weight_K(self.grid, self.still, LAW, u, 0.0).values <= 1.0))

    def test_kug_verify(self):
        rng = np.random.default_rng(5)
        w = ScalarField(self.grid, rng.normal(size=self.grid.n))
        Q = VecField(self.grid, rng.normal(size=self.grid.n + (3,)))
        for s in (0.5, 1.0, 2.0, 4.0):
            with self.subTest(s=s):
                self.assertTrue(kug_verify(w, Q, s, 0.5).passed)
        with self.assertRaises(PreconditionError):
            kug_verify(w, Q, -0.1, 0.5)

    def test_kug_verify_below_weight_exponent(self):
        rng = np.random.default_rng(11)
        w = ScalarField(self.grid, rng.normal(size=self.grid.n))
        Q = VecField(self.grid, rng.normal(size=self.grid.n + (3,)))
        for s in (0.0, 0.2):
            with self.subTest(s=s):
                report = kug_verify(w, Q, s, 0.5)
                self.assertTrue(report.passed)
                self.assertIn("kugs", report.checks)
                self.assertIn("Kstar", report.checks)
                self.assertNotIn("kug1", report.checks)
                self.assertNotIn("kug2", report.checks)
        self.assertIn("kug1", kug_verify(w, Q, 0.5, 0.5).checks)

    def test_kug_verify_on_smooth_fields(self):
        grid = Grid.cube(12)
        x = grid.cell_centers()
        rng = np.random.default_rng(2024)
        a = 0.5

        def wave(scale):
            k = rng.integers(1, 4, size=3) * math.pi
            phase = rng.uniform(0.0, 2.0 * math.pi, 3)
            return scale * rng.uniform(0.2, 1.0) * np.prod(np.sin(k * x + phase), axis=-1)

        for trial in range(10):
            scale = 10.0 ** rng.uniform(-1.0, 1.5)
            w = ScalarField(grid, rng.uniform(-1.0, 1.0) + wave(scale))
            Q = VecField(grid, np.stack([wave(scale) for _ in range(3)], axis=-1))
            for s in (a, 1.0, 2.0, 4.0):
                with self.subTest(trial=trial, s=s):
                    report = kug_verify(w, Q, s, a)
                    self.assertTrue(report.passed, report.violation_counts)
                    self.assertEqual(set(report.checks), {"kug1", "kug2", "kugs", "Kstar"})


if __name__ == '__main__':
    unittest.main()
