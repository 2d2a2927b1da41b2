"""
Tests for the configuration schema and the configuration manager.
"""
import json
import math
import shutil
import tempfile
import unittest
import sys
import os
from pathlib import Path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from src.config.config_manager import ConfigManager
from src.config.config_schema import (
    ACCEPTANCE_ESTIMATES,
    RunConfig,
    create_default_config,
    load_config_from_file,
    save_config_to_file,
    validate_config,
)
from src.utils.errors import ConfigError


def base_document(**overrides):
    doc = {"nondimensional": {"phi": 1.0, "G": 0.5, "Omega": 0.5}, "grid": {"n": 8}}
    doc.update(overrides)
    return doc


class TestSchema(unittest.TestCase):
    """Validation of configuration documents."""

    def assertProblem(self, doc, key):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(doc)
        keys = [k for k, _ in ctx.exception.problems]
        self.assertIn(key, keys)
        return ctx.exception

    def test_defaults(self):
        config = create_default_config()
        self.assertIsInstance(config, RunConfig)
        self.assertEqual(config.grid.n, (8, 8, 8))
        self.assertEqual(config.audit.estimates, ACCEPTANCE_ESTIMATES)
        self.assertEqual(config.audit.omega_star, [0.0, 1.0, 5.0, 10.0])
        self.assertIsNone(config.audit.margin)
        self.assertEqual(config.kernel.samples, 10000)
        self.assertEqual(config.seed, 0)

    def test_parameter_block_required(self):
        error = self.assertProblem({"grid": {"n": 8}}, "<root>")
        self.assertIn("exactly one", str(error))
        both = base_document(physical={"kappa": 1.0, "phi_tilde": 0.3, "G_tilde": 1.0})
        self.assertProblem(both, "<root>")

    def test_unknown_keys_rejected(self):
        self.assertProblem(base_document(grid={"n": 8, "bogus": 1}), "grid.bogus")
        self.assertProblem(base_document(extra_block={}), "extra_block")

    def test_domain_checks(self):
        cases = {
            "law": base_document(law={"coeffs": [1.0, 1.0, 1.0], "exponents": [2.0, 1.0]}),
            "grid": base_document(grid={"n": 2}),
            "rotation": base_document(rotation={"rho_star": 1.0, "coriolis": 1.0}),
            "time.safety": base_document(time={"safety": 1.5}),
            "time.T": base_document(time={"T": -1.0}),
            "audit.estimates": base_document(audit={"estimates": ["gradu6a", "nope"]}),
            "audit.s": base_document(audit={"s": {"nope": 3.0}}),
            "kernel.samples": base_document(kernel={"samples": 0}),
            "mms.case": base_document(mms={"case": "nope"}),
            "data.u0": base_document(data={"u0": "nope"}),
        }
        for key, doc in cases.items():
            with self.subTest(key=key):
                self.assertProblem(doc, key)

    def test_nondimensional_range(self):
        self.assertProblem({"nondimensional": {"phi": -1.0, "G": 1.0}}, "<root>")

    def test_error_record(self):
        with self.assertRaises(ConfigError) as ctx:
            validate_config(base_document(grid={"n": 8, "bogus": 1}))
        record = ctx.exception.to_record()
        self.assertEqual(record["type"], "ConfigError")
        self.assertEqual(record["problems"][0]["key"], "grid.bogus")


class TestConfigFiles(unittest.TestCase):
    """Loading and saving configuration files."""

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_config_from_file(self.tmp / "absent.json")

    def test_invalid_json(self):
        path = self.tmp / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config_from_file(path)
        path.write_text("[1, 2]", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config_from_file(path)

    def test_save_and_load(self):
        config = validate_config(base_document(seed=4))
        path = self.tmp / "nested" / "run.json"
        save_config_to_file(config, path)
        self.assertEqual(load_config_from_file(path), config)
        self.assertEqual(json.loads(path.read_text(encoding="utf-8"))["seed"], 4)


class TestConfigManager(unittest.TestCase):
    """Overrides and the domain objects built from a configuration."""

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.path = self.tmp / "run.json"
        self.path.write_text(json.dumps(base_document()), encoding="utf-8")
        self.manager = ConfigManager(config_file=self.path)

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def test_needs_a_source(self):
        with self.assertRaises(ConfigError):
            ConfigManager()

    def test_get(self):
        self.assertEqual(self.manager.get("nondimensional.G"), 0.5)
        self.assertEqual(self.manager.get("grid.n"), (8, 8, 8))
        self.assertEqual(self.manager.get("no.such.key", "fallback"), "fallback")

    def test_overrides(self):
        self.manager.update(seed=9, samples=50, estimates=["ab23"], **{"mms.mode": None})
        self.assertEqual(self.manager.get("seed"), 9)
        self.assertEqual(self.manager.get("kernel.samples"), 50)
        self.assertEqual(self.manager.get("audit.estimates"), ["ab23"])
        self.assertEqual(self.manager.get("mms.mode"), "space")

    def test_invalid_override_keeps_config(self):
        with self.assertRaises(ConfigError):
            self.manager.set("time.safety", 3.0)
        self.assertEqual(self.manager.get("time.safety"), 0.4)

    def test_save(self):
        self.manager.set("seed", 3)
        self.manager.save_config()
        self.assertEqual(ConfigManager(config_file=self.path).get("seed"), 3)

    def test_nondimensional_environment(self):
        self.manager.update(**{"rotation.rho_star": 0.5})
        env = self.manager.build_environment()
        self.assertAlmostEqual(env.coriolis, 2.0 * 0.5 * 0.5 / 1.0)
        self.assertEqual(env.rho_star, 0.5)

    def test_explicit_coriolis(self):
        manager = ConfigManager(config=validate_config(base_document(rotation={"coriolis": 3.0})))
        self.assertEqual(manager.build_rotation().coriolis, 3.0)

    def test_physical_environment(self):
        doc = {"physical": {"kappa": 2.0, "phi_tilde": 0.25, "G_tilde": 1.0, "Omega_tilde": 1.0},
               "rotation": {"rho_star": 0.5}}
        manager = ConfigManager(config=validate_config(doc))
        env = manager.build_environment()
        self.assertAlmostEqual(env.phi, 0.5)
        self.assertAlmostEqual(env.G, 4.0)
        self.assertAlmostEqual(env.coriolis, 4.0)
        self.assertEqual(manager.build_controls().kappa, 2.0)
        with self.assertRaises(ConfigError):
            validate_config(dict(doc, rotation={"coriolis": 1.0}))

    def test_problem_and_controls(self):
        self.manager.update(**{"data.u0": "sine-bump", "data.amplitude": 0.2, "time.T": 0.5,
                               "time.snapshot_every": 4})
        spec = self.manager.build_problem()
        self.assertEqual(spec.grid.n, (8, 8, 8))
        self.assertEqual(spec.T, 0.5)
        self.assertAlmostEqual(float(spec.u0.values.max()), 1.0 + 0.2 * math.sin(math.pi * 7 / 16) ** 3)
        controls = self.manager.build_controls()
        self.assertEqual(controls.snapshot_every, 4)
        self.assertEqual(controls.max_dt, math.inf)
        self.assertEqual(controls.kappa, 1.0)

    def test_estimate_params(self):
        self.manager.update(estimates=["ab23", "kug4"], **{"audit.s": {"ab23": 2.5}, "audit.T0": 0.3})
        params = self.manager.estimate_params()
        self.assertEqual(sorted(params), ["ab23", "kug4"])
        self.assertEqual(params["ab23"].s, 2.5)
        self.assertIsNone(params["kug4"].s)
        self.assertEqual(params["kug4"].T0, 0.3)


if __name__ == '__main__':
    unittest.main()
