"""
Core application class that dispatches subcommands and writes their artifacts.
"""
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

from src.audit.cutoff import build_cutoff
from src.audit.estimates import AuditContext, audit_estimates
from src.audit.quantities import energy_quantities, max_principle_audit
from src.audit.sweep import sweep_report
from src.config.config_manager import ConfigManager
from src.kernel.bounds import kernel_constants, verify_kernel_bounds
from src.solver.integrator import Integrator
from src.solver.manufactured import convergence_study
from src.utils.errors import ConfigError, ForchheimerError
from src.utils.event_bus import RUN_FINISHED, SNAPSHOT_STORED, Event, EventBus
from src.utils.serialization import write_convergence_csv, write_report, write_trajectory

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_VIOLATIONS = 3

SUBCOMMANDS = ("simulate", "audit", "verify-kernel", "sweep", "mms")


def write_error(out_dir: Union[str, Path], error: Exception) -> Path:
    """Machine-readable error record next to the other artifacts."""
    if isinstance(error, ForchheimerError):
        record = error.to_record()
    else:
        record = {"type": type(error).__name__, "message": str(error)}
    return write_report(record, Path(out_dir) / "error.json")


def exit_code_for(error: Exception) -> int:
    return EXIT_CONFIG if isinstance(error, ConfigError) else EXIT_FAILURE


class ForchheimerApp:
    """Runs one subcommand against a validated configuration."""

    def __init__(self, config: ConfigManager, out_dir: Union[str, Path], event_bus: Optional[EventBus] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.out_dir = Path(out_dir)
        self.event_bus = event_bus or EventBus()
        self.event_bus.subscribe(SNAPSHOT_STORED, self._on_snapshot)
        self.event_bus.subscribe(RUN_FINISHED, self._on_finished)
        self.runs: List[dict] = []

        self.commands: Dict[str, Callable[[], int]] = {
            "simulate": self.simulate,
            "audit": self.audit,
            "verify-kernel": self.verify_kernel,
            "sweep": self.sweep,
            "mms": self.mms,
        }

    def run(self, subcommand: str) -> int:
        """Dispatch and map failures to an exit status plus error.json."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if subcommand not in self.commands:
            write_error(self.out_dir, ConfigError(f"unknown subcommand '{subcommand}'",
                                                  [("<subcommand>", "unknown")]))
            return EXIT_CONFIG
        self.logger.info(f"Running '{subcommand}' into {self.out_dir}")
        try:
            status = self.commands[subcommand]()
        except ForchheimerError as e:
            self.logger.error(f"'{subcommand}' failed: {e}")
            write_error(self.out_dir, e)
            return exit_code_for(e)
        except Exception as e:
            self.logger.error(f"Unexpected error in '{subcommand}': {e}", exc_info=True)
            write_error(self.out_dir, e)
            return EXIT_FAILURE
        self.logger.info(f"'{subcommand}' finished with status {status}")
        return status

    # Subcommands

    def simulate(self) -> int:
        spec = self.config.build_problem()
        controls = self.config.build_controls()
        traj = Integrator(spec, controls, self.event_bus).run()
        files = write_trajectory(traj, self.out_dir / "snapshots")
        manifest = {
            "subcommand": "simulate",
            "config": self.config.config.dict(),
            "summary": traj.summary(),
            "kernel_failures": traj.kernel_failures,
            "snapshots": [{"t": t, "file": f"snapshots/{path.name}"} for t, path in zip(traj.times, files)],
            "steps": [record.to_dict() for record in traj.steps],
        }
        write_report(manifest, self.out_dir / "manifest.json")
        return EXIT_OK

    def audit(self) -> int:
        cfg = self.config.config
        spec = self.config.build_problem()
        controls = self.config.build_controls()
        traj = Integrator(spec, controls, self.event_bus).run()

        ctx = AuditContext(traj, spec)
        reports = audit_estimates(traj, spec, cfg.audit.estimates, self.config.estimate_params(), context=ctx)
        margin = cfg.audit.margin if cfg.audit.margin is not None else ctx.default_margin()
        s_values = sorted({r.params["s"] for r in reports})
        quantities = energy_quantities(traj, spec, s_values, build_cutoff(spec.grid, margin), fields=ctx.fields)
        principle = max_principle_audit(traj, spec, requires_nonneg=spec.requires_nonneg)

        report = {
            "subcommand": "audit",
            "config": cfg.dict(),
            "summary": traj.summary(),
            "kernel_constants": ctx.constants.to_dict(),
            "energy_quantities": quantities.to_dict(),
            "orderings": quantities.orderings(),
            "max_principle": principle.to_dict(),
            "estimates": {r.estimate_id: r.to_dict() for r in reports},
        }
        write_report(report, self.out_dir / "report.json")
        return EXIT_OK

    def verify_kernel(self) -> int:
        cfg = self.config.config
        law = self.config.build_law()
        rot = self.config.build_rotation()
        report = verify_kernel_bounds(law, rot, cfg.kernel.samples, cfg.kernel.radius, cfg.seed)
        doc = {
            "subcommand": "verify-kernel",
            "seed": cfg.seed,
            "law": {"coeffs": list(law.coeffs), "exponents": list(law.exponents)},
            "rotation": {"axis": list(rot.axis), "coriolis": rot.coriolis},
            "constants": kernel_constants(law, rot).to_dict(),
            "report": report.to_dict(),
        }
        write_report(doc, self.out_dir / "bound_report.json")
        if not report.passed:
            self.logger.warning(f"Kernel verification found {report.num_violations} violation(s)")
            return EXIT_VIOLATIONS
        return EXIT_OK

    def sweep(self) -> int:
        cfg = self.config.config
        summary = sweep_report(self.config.build_problem(), cfg.audit.omega_star, cfg.audit.estimates,
                               self.config.estimate_params(), self.config.build_controls(), self.event_bus)
        write_report({"subcommand": "sweep", "config": cfg.dict(), "sweep": summary.to_dict()},
                     self.out_dir / "sweep.json")
        return EXIT_OK if summary.complete else EXIT_FAILURE

    def mms(self) -> int:
        cfg = self.config.config
        mms = cfg.mms
        table = convergence_study(mms.case, mms.levels, mode=mms.mode, n=mms.n, T=mms.T)
        write_report({"subcommand": "mms", "config": cfg.dict(), "convergence": table.to_dict()},
                     self.out_dir / "convergence.json")
        write_convergence_csv(table, self.out_dir / "convergence.csv")
        if table.observed_order is not None:
            self.logger.info(f"{mms.case} ({mms.mode}): observed order {table.observed_order:.3f}")
        return EXIT_OK

    # Event handlers

    def _on_snapshot(self, event: Event) -> None:
        self.logger.debug(f"snapshot {event.data['index']} stored at t={event.data['t']:.6g}")

    def _on_finished(self, event: Event) -> None:
        self.runs.append(dict(event.data))


def dispatch(subcommand: str, config: ConfigManager, out_dir: Union[str, Path]) -> int:
    return ForchheimerApp(config, out_dir).run(subcommand)
