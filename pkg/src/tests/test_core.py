"""
Tests for the event bus, subcommand dispatch and the command-line entry point.
"""
import json
import logging
import shutil
import signal
import tempfile
import unittest
import sys
import os
from dataclasses import replace
from pathlib import Path
from unittest import mock
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from src.config.config_manager import ConfigManager
from src.config.config_schema import validate_config
from src.core.app import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_VIOLATIONS, ForchheimerApp, dispatch
from src.kernel.bounds import BoundReport
from src.utils.errors import SolverError
from src.utils.event_bus import RUN_FINISHED, STEP_COMPLETED, EventBus

import main as cli


def small_config(**overrides):
    doc = {
        "nondimensional": {"phi": 1.0, "G": 0.5, "Omega": 0.5},
        "rotation": {"coriolis": 1.0},
        "grid": {"n": 8},
        "data": {"u0": "sine-bump", "offset": 1.0, "amplitude": 0.3},
        "time": {"T": 0.002},
        "audit": {"estimates": ["gradu6a", "ab23"], "omega_star": [0.0, 1.0]},
        "kernel": {"samples": 200, "radius": 100.0},
        "mms": {"case": "steady-const", "levels": [4, 8], "T": 0.01},
    }
    doc.update(overrides)
    return doc


def read_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


class TestEventBus(unittest.TestCase):
    """Test the event bus."""

    def setUp(self):
        self.event_bus = EventBus()
        self.received = []

    def handler(self, event):
        self.received.append(event)

    def test_event_subscription(self):
        self.event_bus.subscribe(STEP_COMPLETED, self.handler)
        self.event_bus.publish(STEP_COMPLETED, {"step": 1})
        self.assertEqual(len(self.received), 1)
        self.assertEqual(self.received[0].data, {"step": 1})

    def test_subscribe_once(self):
        self.event_bus.subscribe(STEP_COMPLETED, self.handler)
        self.event_bus.subscribe(STEP_COMPLETED, self.handler)
        self.event_bus.publish(STEP_COMPLETED)
        self.assertEqual(len(self.received), 1)

    def test_event_unsubscription(self):
        self.event_bus.subscribe(RUN_FINISHED, self.handler)
        self.event_bus.unsubscribe(RUN_FINISHED, self.handler)
        self.event_bus.unsubscribe(RUN_FINISHED, self.handler)
        self.event_bus.publish(RUN_FINISHED, "done")
        self.assertEqual(self.received, [])

    def test_failing_handler_isolated(self):
        def broken(event):
            raise RuntimeError("boom")

        self.event_bus.subscribe(RUN_FINISHED, broken)
        self.event_bus.subscribe(RUN_FINISHED, self.handler)
        with self.assertLogs("src.utils.event_bus", level="ERROR"):
            self.event_bus.publish(RUN_FINISHED)
        self.assertEqual(len(self.received), 1)


class _AppCase(unittest.TestCase):

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def make_app(self, out="out", **overrides):
        manager = ConfigManager(config=validate_config(small_config(**overrides)))
        return ForchheimerApp(manager, self.tmp / out)


class TestSubcommands(_AppCase):
    """Each subcommand writes its artifacts and returns its exit status."""

    def test_simulate(self):
        app = self.make_app()
        self.assertEqual(app.run("simulate"), EXIT_OK)
        manifest = read_json(self.tmp / "out" / "manifest.json")
        self.assertEqual(manifest["kernel_failures"], 0)
        self.assertEqual(manifest["snapshots"][-1]["t"], 0.002)
        for entry in manifest["snapshots"]:
            self.assertTrue((self.tmp / "out" / entry["file"]).exists())
        self.assertEqual(len(app.runs), 1)

    def test_simulate_counts_continued_face_solves(self):
        from src.grid import flux
        real_solve = flux.solve_F

        def continued_twice(*args, **kwargs):
            return replace(real_solve(*args, **kwargs), continued=2)

        with mock.patch("src.grid.flux.solve_F", side_effect=continued_twice):
            self.assertEqual(self.make_app().run("simulate"), EXIT_OK)
        manifest = read_json(self.tmp / "out" / "manifest.json")
        steps = manifest["steps"]
        self.assertTrue(steps)
        self.assertTrue(all(record["kernel_failures"] == 6 for record in steps))
        self.assertEqual(manifest["kernel_failures"], 6 * len(steps))
        self.assertEqual(manifest["summary"]["kernel_failures"], manifest["kernel_failures"])

    def test_simulate_is_deterministic(self):
        self.assertEqual(self.make_app("a").run("simulate"), EXIT_OK)
        self.assertEqual(self.make_app("b").run("simulate"), EXIT_OK)
        for name in ("manifest.json", "snapshots/" + sorted(os.listdir(self.tmp / "a" / "snapshots"))[-1]):
            with self.subTest(artifact=name):
                self.assertEqual((self.tmp / "a" / name).read_bytes(), (self.tmp / "b" / name).read_bytes())

    def test_audit(self):
        self.assertEqual(self.make_app().run("audit"), EXIT_OK)
        report = read_json(self.tmp / "out" / "report.json")
        self.assertEqual(sorted(report["estimates"]), ["ab23", "gradu6a"])
        for key in ("kernel_constants", "energy_quantities", "orderings", "max_principle", "summary"):
            self.assertIn(key, report)
        self.assertEqual(report["estimates"]["ab23"]["params"]["s"], 3.0)

    def test_verify_kernel(self):
        self.assertEqual(self.make_app(seed=3).run("verify-kernel"), EXIT_OK)
        doc = read_json(self.tmp / "out" / "bound_report.json")
        self.assertEqual(doc["seed"], 3)
        self.assertEqual(doc["rotation"]["coriolis"], 1.0)
        self.assertEqual(doc["report"]["violation_counts"], {})

    def test_verify_kernel_violations(self):
        failing = BoundReport(samples_checked=1, violation_counts={"X0": 1}, max_slack=0.5)
        with mock.patch("src.core.app.verify_kernel_bounds", return_value=failing):
            self.assertEqual(self.make_app().run("verify-kernel"), EXIT_VIOLATIONS)
        self.assertTrue((self.tmp / "out" / "bound_report.json").exists())

    def test_sweep(self):
        self.assertEqual(self.make_app().run("sweep"), EXIT_OK)
        sweep = read_json(self.tmp / "out" / "sweep.json")["sweep"]
        self.assertTrue(sweep["complete"])
        self.assertEqual(len(sweep["points"]), 2)
        self.assertEqual(sorted(sweep["spread"]), ["ab23", "gradu6a"])

    def test_mms(self):
        self.assertEqual(self.make_app().run("mms"), EXIT_OK)
        doc = read_json(self.tmp / "out" / "convergence.json")
        self.assertEqual(doc["convergence"]["case_id"], "steady-const")
        lines = (self.tmp / "out" / "convergence.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "level,n,dt,error,order")
        self.assertEqual(len(lines), 3)

    def test_dispatch(self):
        manager = ConfigManager(config=validate_config(small_config()))
        self.assertEqual(dispatch("mms", manager, self.tmp / "direct"), EXIT_OK)
        self.assertTrue((self.tmp / "direct" / "convergence.csv").exists())


class TestFailures(_AppCase):
    """Errors become exit codes plus error.json."""

    def test_unknown_subcommand(self):
        self.assertEqual(self.make_app().run("plot"), EXIT_CONFIG)
        record = read_json(self.tmp / "out" / "error.json")
        self.assertEqual(record["type"], "ConfigError")

    def test_solver_failure(self):
        with mock.patch("src.core.app.Integrator.run", side_effect=SolverError("step 3 produced NaN")):
            self.assertEqual(self.make_app().run("simulate"), EXIT_FAILURE)
        record = read_json(self.tmp / "out" / "error.json")
        self.assertEqual(record["type"], "SolverError")
        self.assertIn("NaN", record["message"])

    def test_unexpected_failure(self):
        with mock.patch("src.core.app.convergence_study", side_effect=RuntimeError("disk full")):
            with self.assertLogs("src.core.app", level="ERROR"):
                self.assertEqual(self.make_app().run("mms"), EXIT_FAILURE)
        self.assertEqual(read_json(self.tmp / "out" / "error.json")["type"], "RuntimeError")


class TestCommandLine(_AppCase):
    """main() with explicit argument lists."""

    def setUp(self):
        super().setUp()
        self.handlers = {sig: signal.getsignal(sig) for sig in (signal.SIGINT, signal.SIGTERM)}
        self.config_path = self.tmp / "run.json"
        self.config_path.write_text(json.dumps(small_config()), encoding="utf-8")

    def tearDown(self):
        root = logging.getLogger()
        for handler in list(root.handlers):
            handler.close()
            root.removeHandler(handler)
        for sig, handler in self.handlers.items():
            signal.signal(sig, handler)
        super().tearDown()

    def test_simulate(self):
        out = self.tmp / "cli"
        status = cli.main(["simulate", "--config", str(self.config_path), "--out", str(out), "--quiet"])
        self.assertEqual(status, EXIT_OK)
        self.assertTrue((out / "manifest.json").exists())
        self.assertTrue((out / cli.LOG_FILE).exists())

    def test_overrides(self):
        out = self.tmp / "cli"
        status = cli.main(["verify-kernel", "--config", str(self.config_path), "--out", str(out),
                           "--seed", "5", "--samples", "50", "--quiet"])
        self.assertEqual(status, EXIT_OK)
        doc = read_json(out / "bound_report.json")
        self.assertEqual(doc["seed"], 5)

    def test_invalid_config(self):
        self.config_path.write_text(json.dumps(small_config(grid={"n": 8, "bogus": 1})), encoding="utf-8")
        out = self.tmp / "cli"
        status = cli.main(["simulate", "--config", str(self.config_path), "--out", str(out), "--quiet"])
        self.assertEqual(status, EXIT_CONFIG)
        record = read_json(out / "error.json")
        self.assertEqual(record["problems"][0]["key"], "grid.bogus")

    def test_invalid_overrides(self):
        cases = {
            "estimates": ["--estimates", "gradu6a,nope"],
            "levels": ["--levels", "4,eight"],
        }
        for name, extra in cases.items():
            with self.subTest(override=name):
                out = self.tmp / name
                status = cli.main(["mms", "--config", str(self.config_path), "--out", str(out), "--quiet"] + extra)
                self.assertEqual(status, EXIT_CONFIG)
                self.assertTrue((out / "error.json").exists())

    def test_unknown_subcommand_rejected_by_parser(self):
        with self.assertRaises(SystemExit):
            with mock.patch("sys.stderr"):
                cli.main(["plot"])


if __name__ == '__main__':
    unittest.main()
