"""
Ratio audits of the a-priori gradient estimates.

Each catalog entry computes a left-hand side by quadrature on a stored trajectory and
the bracketed data functional on the right with the generic constant set to one, and
reports lhs / rhs. Whether a ratio is "small" carries no meaning on its own; what is
audited is its stability across runs.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.audit.cutoff import Cutoff, build_cutoff
from src.audit.quantities import EnergyQuantities, TrajectoryFields, energy_quantities
from src.grid.environment import eval_Z
from src.kernel.bounds import kernel_constants
from src.solver.problem import ProblemSpec, Trajectory
from src.utils.errors import PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.125
MAX_SNAPSHOT_EVERY = 10


@dataclass(frozen=True)
class EstimateParams:
    """Audit parameters; entries left as None take the estimate's default."""
    s: Optional[float] = None
    margin: Optional[float] = None
    T0: Optional[float] = None
    t0: Optional[float] = None
    slice_time: Optional[float] = None


@dataclass
class EstimateReport:
    estimate_id: str
    params: Dict[str, Any]
    lhs: float
    rhs_data: float
    ratio: float
    notes: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"estimate_id": self.estimate_id, "params": self.params, "lhs": self.lhs,
                "rhs_data": self.rhs_data, "ratio": self.ratio, "notes": self.notes}


def ratio_of(lhs: float, rhs: float) -> float:
    if rhs > 0:
        return lhs / rhs
    return 0.0 if lhs == 0 else math.inf


@dataclass
class _Resolved:
    """Parameters after defaults, with the cutoff they imply."""
    s: float
    T0: Optional[float]
    cutoff: Optional[Cutoff]
    quantities: EnergyQuantities
    record: Dict[str, Any] = field(default_factory=dict)


class AuditContext:
    """Shared, read-only state for auditing one trajectory."""

    def __init__(self, traj: Trajectory, spec: ProblemSpec, fields: Optional[TrajectoryFields] = None):
        self.logger = logging.getLogger(__name__)
        self.traj = traj
        self.spec = spec
        self.fields = fields or TrajectoryFields(traj, spec)
        self.grid = self.fields.grid
        self.centers = self.grid.cell_centers()
        self.constants = kernel_constants(spec.law, spec.rot)
        self.a = self.constants.a
        self.phi = spec.env.phi
        self.M_Z = self.fields.forcing_sup()
        self.mu_Z = self.fields.forcing_derivative_sup()

    @property
    def T(self) -> float:
        return self.fields.T

    def default_margin(self) -> float:
        return max(DEFAULT_MARGIN, 2.0 * self.grid.max_dx)

    def zeta_fields(self, cutoff: Cutoff) -> Tuple[List[np.ndarray], List[np.ndarray], List[np.ndarray]]:
        """zeta, |grad zeta|^2 and |zeta_t| at the cell centers for every snapshot."""
        zeta, grad_sq, dt = [], [], []
        for t in self.fields.times:
            zeta.append(cutoff.value(self.centers, t))
            g = cutoff.gradient(self.centers, t)
            grad_sq.append(np.einsum("...i,...i->...", g, g))
            dt.append(np.abs(cutoff.time_derivative(self.centers, t)))
        return zeta, grad_sq, dt


@dataclass(frozen=True)
class Estimate:
    evaluate: Callable[[AuditContext, _Resolved], Tuple[float, float, str]]
    default_s: float
    s_range: Optional[Callable[[float, float], bool]] = None
    s_text: str = ""
    window: bool = False
    zeta: bool = False
    region: bool = False
    sup_in_time: bool = False
    n_index: Optional[Callable[[float, float], float]] = None
    d_index: Optional[Callable[[float], float]] = None


# Left-hand sides

def _weighted(ctx: AuditContext, power: float, mask=None, t_from: float = 0.0) -> float:
    f = ctx.fields
    m = 1.0 if mask is None else mask
    return f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** power * m, t_from)


def _plain(ctx: AuditContext, power: float, mask=None, t_from: float = 0.0) -> float:
    f = ctx.fields
    m = 1.0 if mask is None else mask
    return f.space_time(lambda k: f.grad_norm[k] ** power * m, t_from)


def _u_power(ctx: AuditContext, power: float) -> float:
    f = ctx.fields
    return f.space_time(lambda k: np.abs(f.u[k]) ** power)


def _window(r: _Resolved) -> float:
    return 1.0 + 1.0 / r.T0


# Weighted and plain estimates on the whole box

def _gradu0(ctx, r):
    q, chi1 = r.quantities, ctx.constants.chi1
    lhs = _weighted(ctx, 2.0)
    rhs = (chi1 ** 2 * ctx.phi * (q.ubar0_sq + _u_power(ctx, 2.0))
           + (1.0 + chi1) ** (2 * (2 + ctx.a)) * ctx.M_Z ** 2 * _u_power(ctx, 4.0) + q.E0)
    return lhs, rhs, "M_Z is the sampled sup of |Z|"


def _gradu1(ctx, r):
    q, chi1 = r.quantities, ctx.constants.chi1
    lhs = _plain(ctx, 2.0 - ctx.a)
    rhs = (chi1 ** 2 * ctx.phi * (q.ubar0_sq + _u_power(ctx, 2.0))
           + (1.0 + chi1) ** (2 * (2 + ctx.a)) * (q.T + ctx.M_Z ** 2 * _u_power(ctx, 4.0)) + q.E0)
    return lhs, rhs, "M_Z is the sampled sup of |Z|"


def _gradu2(ctx, r):
    q, a = r.quantities, ctx.a
    chi, M = q.chi_star, q.M_star
    rhs = (chi ** 2 * ctx.phi * q.ubar0_sq + chi ** (2 * (4 + a)) * q.T * M ** 2 * (M + 1) ** 2
           + chi ** (2 * (2 + a)) * q.E_star)
    return _weighted(ctx, 2.0), rhs, ""


def _gradu3(ctx, r):
    q, a = r.quantities, ctx.a
    chi, M = q.chi_star, q.M_star
    rhs = (chi ** 2 * ctx.phi * q.ubar0_sq + chi ** (2 * (4 + a)) * q.T * (M + 1) ** 4
           + chi ** (2 * (2 + a)) * q.E_star)
    return _plain(ctx, 2.0 - a), rhs, ""


def _gradu4(ctx, r):
    q = r.quantities
    rhs = q.chi_star ** (2 * (4 + ctx.a)) * (q.M_star + 1) ** 2 * q.N0
    return _weighted(ctx, 2.0), rhs, ""


def _gradu6a(ctx, r):
    q = r.quantities
    rhs = q.chi_star ** (2 * (4 + ctx.a)) * (q.M_star + 1) ** 4 * q.N_star
    return _weighted(ctx, 2.0), rhs, ""


def _gradu6b(ctx, r):
    q = r.quantities
    rhs = q.chi_star ** (2 * (4 + ctx.a)) * (q.M_star + 1) ** 4 * q.N_star
    return _plain(ctx, 2.0 - ctx.a), rhs, ""


# Estimates with a cut-off function

def _iterate1(ctx, r):
    f, q, s = ctx.fields, r.quantities, r.s
    chi1 = ctx.constants.chi1
    zeta, grad_sq, zt = ctx.zeta_fields(r.cutoff)
    sup_term = ctx.phi * f.sup_in_time(lambda k: f.grad_norm[k] ** (2 * s + 2) * zeta[k] ** 2)
    second = f.space_time(lambda k: f.weight[k] * f.hess_sq[k] * f.grad_norm[k] ** (2 * s) * zeta[k] ** 2)
    lhs = sup_term + (s + 1) * ctx.constants.c8 * chi1 ** -2 * second

    factor = (1.0 + chi1) ** (2 * (1 + ctx.a))
    i0 = (ctx.mu_Z ** 2 * factor
          * f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** (2 * s) * f.u[k] ** 4 * zeta[k] ** 2)
          + factor * f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** (2 * s + 2)
                                  * (ctx.M_Z ** 2 * f.u[k] ** 2 * zeta[k] ** 2 + grad_sq[k]))
          + f.space_time(lambda k: f.grad_norm[k] ** (2 * s + 2) * zeta[k] * zt[k]))
    return lhs, ctx.phi * q.D_s[s] + i0, "left side is the sum of both bounded terms"


def _kug3(ctx, r):
    f, q, s, a = ctx.fields, r.quantities, r.s, ctx.a
    chi, M, T = q.chi_star, q.M_star, q.T
    sgn = 1.0 if s > 0 else 0.0
    zeta, grad_sq, zt = ctx.zeta_fields(r.cutoff)
    sup_zt = max(float(np.max(z)) for z in zt)

    lhs = (f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** (2 * s + 4) * zeta[k] ** 2)
           + M ** 2 * f.space_time(lambda k: f.weight[k] * f.hess_sq[k] * f.grad_norm[k] ** (2 * s)
                                   * zeta[k] ** 2))
    i_star = (chi ** 2 * M ** 2 * ctx.phi * q.D_s[s]
              + T * chi ** (4 * (2 * s + 3)) * M ** 6 * (M + 1) ** (8 * s + 6)
              + chi ** (2 * (4 + a)) * M ** 2 * (M + 1) ** 4
              * f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** (2 * s + 2) * (zeta[k] ** 2 + grad_sq[k]))
              + sgn * M ** 2 * f.space_time(lambda k: f.weight[k] * f.hess_sq[k] * zeta[k] ** 2))
    j_star = (T * chi ** (4 * (1 + a)) * M ** 4 * (M + 1) ** (4 * a) * sup_zt ** 2
              + chi ** (4 * (1 + a * sgn)) * M ** 4 * (M + 1) ** (4 * a * sgn)
              * f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** (2 * s + 2) * zt[k] ** 2))
    return lhs, i_star + j_star, ""


def _ab4(ctx, r):
    f, q, a = ctx.fields, r.quantities, ctx.a
    chi, M, T = q.chi_star, q.M_star, q.T
    zeta, grad_sq, zt = ctx.zeta_fields(r.cutoff)
    sup_grad = max(float(np.max(g)) for g in grad_sq)
    sup_zt = max(float(np.max(z)) for z in zt)

    lhs = (f.space_time(lambda k: f.weight[k] * f.grad_norm[k] ** 4 * zeta[k] ** 2)
           + M ** 2 * f.space_time(lambda k: f.weight[k] * f.hess_sq[k] * zeta[k] ** 2))
    rhs = (1.0 + sup_grad + sup_zt ** 2) * (
        chi ** (2 * (5 + a)) * M ** 2 * (M + 1) ** 4 * ctx.phi * (q.ubar0_sq + q.D_s[0.0])
        + chi ** (4 * (4 + a)) * T * M ** 4 * (M + 1) ** 8
        + chi ** (4 * (3 + a)) * M ** 2 * (M + 1) ** 4 * q.E_star)
    return lhs, rhs, "sup of |grad zeta| and |zeta_t| sampled at cell centers"


# Interior space-time estimates on U'

def _ab11(ctx, r):
    q = r.quantities
    lhs = _weighted(ctx, 4.0, r.cutoff.inner_mask())
    rhs = q.chi_star ** (4 * (4 + ctx.a)) * q.M_star ** 2 * (q.M_star + 1) ** 10 * q.N2
    return lhs, rhs, ""


def _ab22(ctx, r):
    q = r.quantities
    lhs = _weighted(ctx, 4.0, r.cutoff.inner_mask(), r.T0)
    rhs = (_window(r) ** 2 * q.chi_star ** (4 * (4 + ctx.a)) * q.M_star ** 2
           * (q.M_star + 1) ** 10 * q.N_star)
    return lhs, rhs, ""


def _ab23(ctx, r):
    q, s = r.quantities, r.s
    lhs = _weighted(ctx, s, r.cutoff.inner_mask())
    rhs = q.chi_star ** ((4 + ctx.a) * s) * q.M_star ** (s - 2) * (q.M_star + 1) ** (3 * s - 2) * q.N2
    return lhs, rhs, ""


def _ab24(ctx, r):
    q, s = r.quantities, r.s
    lhs = _weighted(ctx, s, r.cutoff.inner_mask(), r.T0)
    rhs = (_window(r) ** (s - 2) * q.chi_star ** ((4 + ctx.a) * s) * q.M_star ** (s - 2)
           * (q.M_star + 1) ** (3 * s - 2) * q.N_star)
    return lhs, rhs, ""


def _ab31(ctx, r):
    q, a = r.quantities, ctx.a
    lhs = _plain(ctx, 4.0 - a, r.cutoff.inner_mask())
    return lhs, q.chi_star ** (4 * (4 + a)) * (q.M_star + 1) ** 12 * q.N2, ""


def _ab32(ctx, r):
    q, a = r.quantities, ctx.a
    lhs = _plain(ctx, 4.0 - a, r.cutoff.inner_mask(), r.T0)
    rhs = _window(r) ** 2 * q.chi_star ** (4 * (4 + a)) * (q.M_star + 1) ** 12 * q.N_star
    return lhs, rhs, ""


def _ab33(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    lhs = _plain(ctx, s, r.cutoff.inner_mask())
    rhs = q.chi_star ** ((4 + a) * (s + a)) * (q.M_star + 1) ** (4 * (s + a - 1)) * q.N2
    return lhs, rhs, ""


def _ab34(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    lhs = _plain(ctx, s, r.cutoff.inner_mask(), r.T0)
    rhs = (_window(r) ** (s + a - 2) * q.chi_star ** ((4 + a) * (s + a))
           * (q.M_star + 1) ** (4 * (s + a - 1)) * q.N_star)
    return lhs, rhs, ""


def _ih0(ctx, r):
    q, s = r.quantities, r.s
    lhs = _weighted(ctx, s, r.cutoff.inner_mask())
    rhs = q.chi_star ** ((4 + ctx.a) * (s + 2)) * q.M_star ** 2 * (q.M_star + 1) ** (4 * s) * q.n_of(s - 2)
    return lhs, rhs, ""


def _kug4(ctx, r):
    q, s = r.quantities, r.s
    lhs = _weighted(ctx, s, r.cutoff.inner_mask(), r.T0)
    rhs = (_window(r) ** s * q.chi_star ** ((4 + ctx.a) * (s + 2)) * q.M_star ** 2
           * (q.M_star + 1) ** (4 * s + 2) * q.N_star)
    return lhs, rhs, ""


def _ih1(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    lhs = _plain(ctx, s, r.cutoff.inner_mask())
    rhs = (q.chi_star ** ((4 + a) * (s + a + 2)) * (q.M_star + 1) ** (4 * (s + a + 0.5))
           * q.n_of(s + a - 2))
    return lhs, rhs, ""


def _ih2(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    lhs = _plain(ctx, s, r.cutoff.inner_mask(), r.T0)
    rhs = (_window(r) ** (s + a) * q.chi_star ** ((4 + a) * (s + a + 2))
           * (q.M_star + 1) ** (4 * (s + a + 1)) * q.N_star)
    return lhs, rhs, ""


# Pointwise-in-time estimates

def _sup_inner(ctx: AuditContext, r: _Resolved, t_from: float = 0.0) -> float:
    f, mask, s = ctx.fields, r.cutoff.inner_mask(), r.s
    return ctx.phi * f.sup_in_time(lambda k: f.grad_norm[k] ** s * mask, t_from)


def _pwtall(ctx, r):
    f, q, s, a = ctx.fields, r.quantities, r.s, ctx.a
    chi, M = q.chi_star, q.M_star
    initial = ctx.phi * ctx.grid.integrate(f.grad_norm[0] ** s)
    if s == 2:
        data = chi ** (4 * (4 + a)) * (M + 1) ** 6 * q.N0
    elif s <= 4:
        data = chi ** ((s + 2) * (4 + a)) * M ** (s - 2) * (M + 1) ** (3 * s + 2) * q.N2
    else:
        data = chi ** ((s + 4) * (4 + a)) * M ** 2 * (M + 1) ** (4 * (s + 1)) * q.n_of(s - 2)
    return _sup_inner(ctx, r), initial + data, "sup over stored snapshots"


def _pwtnew(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    chi, M, w = q.chi_star, q.M_star, _window(r)
    if s == 2:
        rhs = (chi ** ((4 + a) ** 2) * w ** (1 + a) * (M + 1) ** (2 * (3 + a))
               * (M ** a * (M + 1) ** (2 + a) * q.N_star + q.N0))
    elif s <= 4 - a:
        rhs = (chi ** ((4 + a) * (s + a + 2)) * w ** (s + a - 1) * M ** (s - 2)
               * (M + 1) ** (3 * s + 4 * a + 2) * q.N_star)
    elif s <= 4:
        rhs = (chi ** ((4 + a) * (s + a + 4)) * w ** (s + a + 1) * M ** (s - 2)
               * (M + 1) ** (3 * s + 4 * a + 10) * q.N_star)
    else:
        rhs = (chi ** ((4 + a) * (s + a + 4)) * w ** (s + a + 1) * M ** 2
               * (M + 1) ** (4 * s + 4 * a + 6) * q.N_star)
    return _sup_inner(ctx, r, r.T0), rhs, "sup over stored snapshots with t >= T0"


def _pwt6(ctx, r):
    q, s, a = r.quantities, r.s, ctx.a
    rhs = (q.chi_star ** ((4 + a) * (s + a + 4)) * _window(r) ** (s + a + 1)
           * (q.M_star + 1) ** (4 * (s + a + 2)) * q.N_star)
    return _sup_inner(ctx, r, r.T0), rhs, "sup over stored snapshots with t >= T0"


# Fixed-time embedding

def _lu_embed(ctx, r):
    f, s = ctx.fields, r.s
    k = int(np.argmin(np.abs(np.asarray(f.times) - r.record["slice_time"])))
    t = f.times[k]
    r.record["slice_time"] = t
    zeta = r.cutoff.spatial(ctx.centers)
    g = r.cutoff.gradient(ctx.centers)
    grad_sq = np.einsum("...i,...i->...", g, g)
    K, G, H, w = f.weight[k], f.grad_norm[k], f.hess_sq[k], f.u[k]

    M_w = float(np.max(np.abs(w[zeta > 0]))) if np.any(zeta > 0) else 0.0
    corners = ctx.grid.corners()
    M_Q = max(float(np.max(f.z_norm[k])),
              float(np.max(np.linalg.norm(eval_Z(ctx.spec.env, corners, t), axis=1))))
    mu_Q = ctx.mu_Z
    volume = float(np.prod(np.asarray(ctx.grid.hi) - np.asarray(ctx.grid.lo)))
    integrate = ctx.grid.integrate

    lhs = integrate(K * G ** (2 * s + 2) * zeta ** 2)
    rhs = (M_w ** 2 * integrate(K * H * G ** (2 * s - 2) * zeta ** 2)
           + M_w ** 2 * integrate(K * G ** (2 * s) * (grad_sq + (M_w * mu_Q + M_Q) ** 2 * M_w ** 2 * zeta ** 2))
           + (1.0 if s > 1 else 0.0) * M_w ** 2 * integrate(K * H * zeta ** 2)
           + volume * (M_w ** 2 * M_Q) ** (2 * s + 2) * (1.0 + M_w ** 2 * M_Q) ** (2 * s))
    return lhs, rhs, f"w = u(., t), Q = Z(., t) at t={t:.6g}"


def _at_least(bound):
    return lambda s, a: s >= bound


ESTIMATES: Dict[str, Estimate] = {
    "gradu0": Estimate(_gradu0, default_s=2.0),
    "gradu1": Estimate(_gradu1, default_s=2.0),
    "gradu2": Estimate(_gradu2, default_s=2.0),
    "gradu3": Estimate(_gradu3, default_s=2.0),
    "gradu4": Estimate(_gradu4, default_s=2.0),
    "gradu6a": Estimate(_gradu6a, default_s=2.0),
    "gradu6b": Estimate(_gradu6b, default_s=2.0),
    "iterate1": Estimate(_iterate1, default_s=0.0, s_range=_at_least(0.0), s_text="s >= 0",
                         zeta=True, d_index=lambda s: s),
    "Kug3": Estimate(_kug3, default_s=0.0, s_range=_at_least(0.0), s_text="s >= 0",
                     zeta=True, d_index=lambda s: s),
    "ab4": Estimate(_ab4, default_s=0.0, zeta=True, d_index=lambda s: 0.0),
    "ab11": Estimate(_ab11, default_s=4.0, region=True),
    "ab22": Estimate(_ab22, default_s=4.0, region=True, window=True),
    "ab23": Estimate(_ab23, default_s=3.0, s_range=lambda s, a: 2 <= s <= 4, s_text="s in [2, 4]",
                     region=True),
    "ab24": Estimate(_ab24, default_s=3.0, s_range=lambda s, a: 2 <= s <= 4, s_text="s in [2, 4]",
                     region=True, window=True),
    "ab31": Estimate(_ab31, default_s=4.0, region=True),
    "ab32": Estimate(_ab32, default_s=4.0, region=True, window=True),
    "ab33": Estimate(_ab33, default_s=3.0, s_range=lambda s, a: 2 - a < s < 4 - a,
                     s_text="s in (2 - a, 4 - a)", region=True),
    "ab34": Estimate(_ab34, default_s=3.0, s_range=lambda s, a: 2 - a < s < 4 - a,
                     s_text="s in (2 - a, 4 - a)", region=True, window=True),
    "ih0": Estimate(_ih0, default_s=4.0, s_range=_at_least(4.0), s_text="s >= 4", region=True,
                    n_index=lambda s, a: s - 2),
    "ih1": Estimate(_ih1, default_s=5.0, s_range=lambda s, a: s > 4 - a, s_text="s > 4 - a",
                    region=True, n_index=lambda s, a: s + a - 2),
    "ih2": Estimate(_ih2, default_s=5.0, s_range=lambda s, a: s > 4 - a, s_text="s > 4 - a",
                    region=True, window=True),
    "kug4": Estimate(_kug4, default_s=5.0, s_range=lambda s, a: s > 4, s_text="s > 4",
                     region=True, window=True),
    "pwtall": Estimate(_pwtall, default_s=2.0, s_range=_at_least(2.0), s_text="s >= 2",
                       region=True, sup_in_time=True, n_index=lambda s, a: s - 2),
    "pwtnew": Estimate(_pwtnew, default_s=2.0, s_range=_at_least(2.0), s_text="s >= 2",
                       region=True, window=True, sup_in_time=True),
    "pwt6": Estimate(_pwt6, default_s=2.0, s_range=_at_least(2.0), s_text="s >= 2",
                     region=True, window=True, sup_in_time=True),
    "LUembed": Estimate(_lu_embed, default_s=1.0, s_range=_at_least(1.0), s_text="s >= 1"),
}

# ab33/ab34 default to the middle of their open range
_MID_RANGE = {"ab33", "ab34"}


def _resolve(ctx: AuditContext, estimate_id: str, est: Estimate, params: EstimateParams) -> _Resolved:
    a = ctx.a
    if params.s is not None:
        s = float(params.s)
    elif estimate_id in _MID_RANGE:
        s = 3.0 - a
    else:
        s = est.default_s
    if est.s_range is not None and not est.s_range(s, a):
        raise PreconditionError(f"{estimate_id} needs {est.s_text}, got s={s} (a={a:.6g})")
    if est.sup_in_time and ctx.traj.snapshot_every > MAX_SNAPSHOT_EVERY:
        raise PreconditionError(
            f"{estimate_id} takes sups over snapshots; store at least every {MAX_SNAPSHOT_EVERY} steps "
            f"(got every {ctx.traj.snapshot_every})")

    record: Dict[str, Any] = {"s": s}
    T0 = None
    if est.window or (est.zeta and params.T0 is not None):
        T0 = float(params.T0) if params.T0 is not None else 0.5 * ctx.T
        if not 0 < T0 < ctx.T:
            raise PreconditionError(f"T0 must lie in (0, T={ctx.T:.6g}), got {T0}")
        record["T0"] = T0

    cutoff = None
    if est.region or est.zeta or estimate_id == "LUembed":
        margin = float(params.margin) if params.margin is not None else ctx.default_margin()
        temporal = None
        if est.zeta and T0 is not None:
            t0 = float(params.t0) if params.t0 is not None else 0.5 * T0
            temporal = (T0, t0)
            record["t0"] = t0
        cutoff = build_cutoff(ctx.grid, margin, temporal, T=ctx.T)
        record["margin"] = margin
        record["U_prime"] = {"lo": list(cutoff.inner_lo), "hi": list(cutoff.inner_hi)}
    if estimate_id == "LUembed":
        record["slice_time"] = float(params.slice_time) if params.slice_time is not None else ctx.T

    n_values = [est.n_index(s, a)] if est.n_index is not None else []
    d_values = [est.d_index(s)] if est.d_index is not None else []
    quantities = energy_quantities(ctx.traj, ctx.spec, n_values, cutoff, d_list=d_values,
                                   fields=ctx.fields)
    return _Resolved(s=s, T0=T0, cutoff=cutoff, quantities=quantities, record=record)


def estimate_audit(traj: Trajectory, spec: ProblemSpec, estimate_id: str,
                   params: Optional[EstimateParams] = None,
                   context: Optional[AuditContext] = None) -> EstimateReport:
    """Audit one catalog estimate on a trajectory."""
    try:
        est = ESTIMATES[estimate_id]
    except KeyError:
        raise PreconditionError(f"unknown estimate '{estimate_id}', expected one of {sorted(ESTIMATES)}")
    ctx = context or AuditContext(traj, spec)
    resolved = _resolve(ctx, estimate_id, est, params or EstimateParams())
    lhs, rhs, notes = est.evaluate(ctx, resolved)
    ratio = ratio_of(lhs, rhs)
    if not math.isfinite(ratio):
        ctx.logger.warning(f"{estimate_id}: non-finite ratio (lhs={lhs:.3e}, rhs={rhs:.3e})")
    ctx.logger.info(f"{estimate_id}: lhs={lhs:.4e} rhs={rhs:.4e} ratio={ratio:.4e}")
    return EstimateReport(estimate_id=estimate_id, params=resolved.record, lhs=float(lhs),
                          rhs_data=float(rhs), ratio=float(ratio), notes=notes)


def audit_estimates(traj: Trajectory, spec: ProblemSpec, estimate_ids: Sequence[str],
                    params: Optional[Dict[str, EstimateParams]] = None,
                    max_workers: int = 4,
                    context: Optional[AuditContext] = None) -> List[EstimateReport]:
    """Audit several estimates on one trajectory, in parallel, reports in request order."""
    params = params or {}
    ctx = context or AuditContext(traj, spec)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(estimate_audit, traj, spec, eid, params.get(eid), ctx)
                   for eid in estimate_ids]
        return [fut.result() for fut in futures]
