"""
Manufactured-solution cases and grid / time-step convergence studies.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from src.grid.environment import EnvironmentParams, eval_DZ, eval_Z
from src.grid.mesh import Grid, ScalarField
from src.kernel.inversion import jacobian_X, solve_F
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.solver.fields import AnalyticField, build_field
from src.solver.integrator import Integrator, stable_dt
from src.solver.problem import ProblemSpec, Source, StepControls
from src.utils.errors import PreconditionError

logger = logging.getLogger(__name__)

REFERENCE_LAW = ForchheimerLaw(coeffs=(1.0, 1.0), exponents=(1.0,))
REFERENCE_ROTATION = RotationSpec(axis=(0.0, 0.0, 1.0), coriolis=1.0)


def reference_environment(forcing_enabled: bool = True) -> EnvironmentParams:
    return EnvironmentParams(phi=1.0, G=0.5, Omega=0.5, theta=math.pi / 4, omega0=0.0,
                             rot=REFERENCE_ROTATION, forcing_enabled=forcing_enabled)


# case id -> (exact-field preset, offset, amplitude, forcing enabled, default T)
MMS_CASES: Dict[str, tuple] = {
    "steady-const": ("constant", 1.0, 0.0, False, 1.0),
    "mms-quadratic": ("mms-quadratic", 1.0, 0.1, True, 0.1),
    "mms-trig": ("mms-trig", 1.0, 0.1, True, 0.01),
}


@dataclass
class ManufacturedCase:
    case_id: str
    spec: ProblemSpec
    exact: AnalyticField

    def exact_at(self, t: float) -> ScalarField:
        return ScalarField(self.spec.grid, self.exact.value(self.spec.grid.cell_centers(), t))


def manufactured_source(env: EnvironmentParams, law: ForchheimerLaw, rot: RotationSpec,
                        exact: AnalyticField) -> Source:
    """f = phi u_t - div X(grad u + u^2 Z) for the exact field u.

    The divergence is X'(Phi) contracted with D Phi, where
    d_j Phi_i = d_i d_j u + 2 u d_j u Z_i + u^2 (Omega^2 J^2)_ij.
    """
    dz = eval_DZ(env)

    def source(x: np.ndarray, t: float) -> np.ndarray:
        u = exact.value(x, t)
        grad = exact.gradient(x, t)
        z = eval_Z(env, x, t)
        phi = grad + (u ** 2)[..., None] * z
        v = solve_F(law, rot, phi).v
        xp = jacobian_X(law, rot, phi, x_of_y=v)
        dphi = (exact.hessian(x, t)
                + 2.0 * u[..., None, None] * z[..., :, None] * grad[..., None, :]
                + (u ** 2)[..., None, None] * dz)
        div = np.einsum("...ik,...ki->...", xp, dphi)
        return env.phi * exact.time_derivative(x, t) - div

    return source


def manufactured_case(case_id: str, n: int = 8, T: Optional[float] = None) -> ManufacturedCase:
    """Problem on [0, 1]^3 whose exact solution is the named field; Psi is the exact field."""
    try:
        preset, offset, amplitude, forcing, default_T = MMS_CASES[case_id]
    except KeyError:
        raise PreconditionError(f"unknown manufactured case '{case_id}', expected one of {sorted(MMS_CASES)}")
    grid = Grid.cube(n)
    env = reference_environment(forcing_enabled=forcing)
    exact = build_field(preset, grid, offset, amplitude)
    u0 = ScalarField(grid, exact.value(grid.cell_centers(), 0.0))
    spec = ProblemSpec(env=env, law=REFERENCE_LAW, grid=grid, u0=u0, psi=exact,
                       T=default_T if T is None else T,
                       source=manufactured_source(env, REFERENCE_LAW, env.rot, exact))
    return ManufacturedCase(case_id=case_id, spec=spec, exact=exact)


def regrid(case: ManufacturedCase, n: int) -> ManufacturedCase:
    grid = Grid(lo=case.spec.grid.lo, hi=case.spec.grid.hi, n=(n, n, n))
    u0 = ScalarField(grid, case.exact.value(grid.cell_centers(), 0.0))
    return replace(case, spec=replace(case.spec, grid=grid, u0=u0))


@dataclass
class ConvergenceRow:
    level: int
    n: int
    dt: float
    error: Optional[float]
    order: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"level": self.level, "n": self.n, "dt": self.dt, "error": self.error, "order": self.order}


@dataclass
class ConvergenceTable:
    case_id: str
    mode: str
    rows: List[ConvergenceRow] = field(default_factory=list)
    observed_order: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"case_id": self.case_id, "mode": self.mode, "observed_order": self.observed_order,
                "rows": [r.to_dict() for r in self.rows]}


def l2_difference(a: ScalarField, b: ScalarField) -> float:
    return ScalarField(a.grid, a.values - b.values).l2_norm()


def _pairwise_orders(values: Sequence[float], ratios: Sequence[float]) -> List[Optional[float]]:
    orders: List[Optional[float]] = [None]
    for prev, cur, ratio in zip(values, values[1:], ratios):
        if prev > 0 and cur > 0:
            orders.append(math.log(prev / cur) / math.log(ratio))
        else:
            orders.append(None)
    return orders


def convergence_study(case_id: str, levels: Sequence[int], mode: str = "space",
                      n: int = 8, T: Optional[float] = None,
                      controls: Optional[StepControls] = None) -> ConvergenceTable:
    """Observed order of accuracy for a manufactured case.

    ``space``: ``levels`` are cells per axis; error is the L2 distance to the exact
    solution at T, order is the least-squares slope of log error against log dx.
    ``time``: ``levels`` are halvings k of the base step dt0 / 2^k on an n^3 grid;
    order comes from successive differences between consecutive levels.
    """
    if mode not in ("space", "time"):
        raise PreconditionError(f"mode must be 'space' or 'time', got '{mode}'")
    if len(levels) < 2:
        raise PreconditionError("a convergence study needs at least two levels")
    controls = controls or StepControls(snapshot_every=10 ** 9)
    base = manufactured_case(case_id, n=n, T=T)
    table = ConvergenceTable(case_id=case_id, mode=mode)

    if mode == "space":
        spacings, errors = [], []
        for level, cells in enumerate(levels):
            case = regrid(base, cells)
            traj = Integrator(case.spec, controls).run()
            error = l2_difference(traj.final, case.exact_at(case.spec.T))
            spacings.append(case.spec.grid.max_dx)
            errors.append(error)
            table.rows.append(ConvergenceRow(level=level, n=cells, dt=traj.max_dt, error=error))
            logger.info(f"{case_id} n={cells}: L2 error {error:.3e}")
        ratios = [h0 / h1 for h0, h1 in zip(spacings, spacings[1:])]
        for row, order in zip(table.rows, _pairwise_orders(errors, ratios)):
            row.order = order
        if all(e > 0 for e in errors):
            table.observed_order = float(linregress(np.log(spacings), np.log(errors)).slope)
        return table

    dt0 = stable_dt(base.spec, controls)
    finals, dts = [], []
    for k in levels:
        dt = dt0 / 2.0 ** k
        traj = Integrator(base.spec, replace(controls, max_dt=dt)).run()
        finals.append(traj.final)
        dts.append(dt)
    diffs = [l2_difference(a, b) for a, b in zip(finals, finals[1:])]
    ratios = [d0 / d1 for d0, d1 in zip(dts, dts[1:])]
    orders = _pairwise_orders(diffs, ratios[1:])
    for level, (k, dt) in enumerate(zip(levels, dts)):
        error = diffs[level] if level < len(diffs) else None
        table.rows.append(ConvergenceRow(level=k, n=n, dt=dt, error=error,
                                         order=orders[level] if level < len(orders) else None))
        if error is not None:
            logger.info(f"{case_id} dt={dt:.3e}: successive difference {error:.3e}")
    known = [o for o in orders if o is not None]
    table.observed_order = known[-1] if known else None
    return table
