"""
Omega_star sweeps: rerun one problem across rotation speeds and track how each audited
ratio moves.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

from src.audit.estimates import ESTIMATES, AuditContext, EstimateParams, EstimateReport, estimate_audit
from src.audit.quantities import energy_quantities
from src.grid.environment import env_bounds, with_omega_star
from src.solver.integrator import Integrator
from src.solver.problem import ProblemSpec, StepControls
from src.utils.errors import ForchheimerError, PreconditionError
from src.utils.event_bus import EventBus

logger = logging.getLogger(__name__)


def ratio_spread(ratios: Sequence[float]) -> float:
    """max/min over the sweep; 1 when every ratio is zero, inf when only some are."""
    if any(not math.isfinite(r) for r in ratios):
        return math.inf
    if all(r == 0 for r in ratios):
        return 1.0
    if any(r == 0 for r in ratios):
        return math.inf
    return max(ratios) / min(ratios)


@dataclass
class SweepPoint:
    omega_star: float
    Omega: float
    coriolis: float
    chi_star: float
    orderings: Dict[str, bool]
    reports: List[EstimateReport] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"omega_star": self.omega_star, "Omega": self.Omega, "coriolis": self.coriolis,
                "chi_star": self.chi_star, "orderings": self.orderings,
                "reports": [r.to_dict() for r in self.reports]}


@dataclass
class SweepSummary:
    estimate_ids: List[str]
    points: List[SweepPoint] = field(default_factory=list)
    failure: Optional[Dict[str, Any]] = None

    def ratios(self, estimate_id: str) -> List[float]:
        return [r.ratio for p in self.points for r in p.reports if r.estimate_id == estimate_id]

    def spreads(self) -> Dict[str, float]:
        return {eid: ratio_spread(self.ratios(eid)) for eid in self.estimate_ids if self.ratios(eid)}

    def non_finite(self) -> Dict[str, bool]:
        return {eid: any(not math.isfinite(r) for r in self.ratios(eid)) for eid in self.estimate_ids}

    @property
    def complete(self) -> bool:
        return self.failure is None

    def to_dict(self) -> Dict[str, Any]:
        return {"estimate_ids": self.estimate_ids, "complete": self.complete,
                "failure": self.failure, "spread": self.spreads(), "non_finite": self.non_finite(),
                "points": [p.to_dict() for p in self.points]}


def sweep_report(spec: ProblemSpec, omega_star_values: Sequence[float], estimate_ids: Sequence[str],
                 params: Optional[Dict[str, EstimateParams]] = None,
                 controls: Optional[StepControls] = None,
                 event_bus: Optional[EventBus] = None) -> SweepSummary:
    """Run ``spec`` once per Omega_star and audit every estimate on each run.

    Omega and the Coriolis coefficient are reset together so rho_star stays fixed. The
    source term, if any, is carried over unchanged. The first failing run stops the sweep;
    the points finished so far are returned with the failure record.
    """
    if len(omega_star_values) < 2:
        raise PreconditionError("a sweep needs at least two Omega_star values")
    unknown = [eid for eid in estimate_ids if eid not in ESTIMATES]
    if unknown:
        raise PreconditionError(f"unknown estimates {unknown}")
    params = params or {}
    summary = SweepSummary(estimate_ids=list(estimate_ids))

    for omega_star in omega_star_values:
        env = with_omega_star(spec.env, spec.grid, float(omega_star))
        point_spec = replace(spec, env=env, rot=env.rot)
        logger.info(f"Sweep point Omega_star={omega_star}: Omega={env.Omega:.6g}, R={env.coriolis:.6g}")
        try:
            traj = Integrator(point_spec, controls, event_bus).run()
            ctx = AuditContext(traj, point_spec)
            quantities = energy_quantities(traj, point_spec, fields=ctx.fields)
            point = SweepPoint(omega_star=float(omega_star), Omega=env.Omega, coriolis=env.coriolis,
                               chi_star=env_bounds(env, spec.grid).chi_star,
                               orderings=quantities.orderings())
            for eid in estimate_ids:
                point.reports.append(estimate_audit(traj, point_spec, eid, params.get(eid), ctx))
        except ForchheimerError as e:
            logger.error(f"Sweep aborted at Omega_star={omega_star}: {e}")
            summary.failure = {"omega_star": float(omega_star), **e.to_record()}
            break
        summary.points.append(point)

    for eid, spread in summary.spreads().items():
        logger.info(f"{eid}: max/min ratio across the sweep {spread:.4g}")
    return summary
