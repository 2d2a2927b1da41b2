"""
Solution and data functionals evaluated on a stored trajectory: the maximum-principle
audit, M_star, E_0, E_star, the N family and D_s.

Space integrals use the midpoint rule over cells, time integrals the trapezoid rule over
snapshot times.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from src.audit.cutoff import Cutoff
from src.grid.environment import env_bounds, eval_DZ, eval_Z
from src.grid.mesh import Grid, gradient, hessian
from src.grid.weight import weight_from_phi
from src.kernel.bounds import kernel_constants
from src.solver.problem import ProblemSpec, Trajectory
from src.utils.errors import PreconditionError

logger = logging.getLogger(__name__)


def boundary_points(grid: Grid) -> np.ndarray:
    """Centers of all boundary faces, shape (m, 3)."""
    pts = []
    for d in range(3):
        faces = np.moveaxis(grid.face_centers(d), d, 0)
        pts.append(faces[0].reshape(-1, 3))
        pts.append(faces[-1].reshape(-1, 3))
    return np.concatenate(pts, axis=0)


def time_integral(times: Sequence[float], values: Sequence[float], t_from: float = 0.0) -> float:
    """Trapezoid over the snapshots with t >= t_from; zero when fewer than two remain."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = t >= t_from
    if np.count_nonzero(keep) < 2:
        return 0.0
    return float(trapezoid(v[keep], t[keep]))


class TrajectoryFields:
    """Per-snapshot derived fields: |grad u|, K, |D^2 u|^2, |Z| and the data Psi.

    Gradients use the Dirichlet trace of Psi at the snapshot time, the same operator
    the flux uses; second derivatives come from central second differences.
    """

    def __init__(self, traj: Trajectory, spec: ProblemSpec):
        if not traj.snapshots:
            raise PreconditionError("trajectory has no snapshots")
        self.logger = logging.getLogger(__name__)
        self.traj = traj
        self.spec = spec
        self.grid = traj.grid
        self.times = list(traj.times)
        self.a = spec.law.degeneracy

        centers = self.grid.cell_centers()
        self.u: List[np.ndarray] = []
        self.grad_norm: List[np.ndarray] = []
        self.weight: List[np.ndarray] = []
        self.hess_sq: List[np.ndarray] = []
        self.z_norm: List[np.ndarray] = []
        for t, snap in zip(self.times, traj.snapshots):
            vals = snap.values
            grad = gradient(self.grid, vals, spec.psi.trace_at(t)).values
            z = eval_Z(spec.env, centers, t)
            phi = grad + (vals ** 2)[..., None] * z
            hess = hessian(self.grid, vals)
            self.u.append(vals)
            self.grad_norm.append(np.sqrt(np.einsum("...i,...i->...", grad, grad)))
            self.weight.append(weight_from_phi(phi, self.a))
            self.hess_sq.append(np.einsum("...ij,...ij->...", hess, hess))
            self.z_norm.append(np.sqrt(np.einsum("...i,...i->...", z, z)))
        self.logger.debug(f"Derived fields ready for {len(self.times)} snapshots")

    @property
    def T(self) -> float:
        return self.times[-1]

    def space_time(self, integrand, t_from: float = 0.0) -> float:
        """int_{t_from}^T int_U integrand(k) dx dt, integrand evaluated per snapshot index k."""
        per_time = [self.grid.integrate(integrand(k)) for k in range(len(self.times))]
        return time_integral(self.times, per_time, t_from)

    def sup_in_time(self, integrand, t_from: float = 0.0) -> float:
        """max over snapshots with t >= t_from of int_U integrand(k) dx."""
        values = [self.grid.integrate(integrand(k))
                  for k, t in enumerate(self.times) if t >= t_from]
        return max(values, default=0.0)

    def forcing_sup(self) -> float:
        """M_Z: sup |Z| over cell centers and box corners at the snapshot times."""
        corners = self.grid.corners()
        sup = 0.0
        for t, zn in zip(self.times, self.z_norm):
            zc = eval_Z(self.spec.env, corners, t)
            sup = max(sup, float(np.max(zn)), float(np.max(np.linalg.norm(zc, axis=1))))
        return sup

    def forcing_derivative_sup(self) -> float:
        """mu_Z: the Frobenius norm of the constant matrix Omega^2 J^2."""
        return float(np.linalg.norm(eval_DZ(self.spec.env)))


@dataclass
class MaxPrincipleAudit:
    violation: float
    times: List[float]
    m0_curve: List[float]
    max_u: List[float]

    def to_dict(self) -> Dict[str, Any]:
        return {"violation": self.violation,
                "curve": [{"t": t, "M0": m, "max_u": u}
                          for t, m, u in zip(self.times, self.m0_curve, self.max_u)]}


def max_principle_audit(traj: Trajectory, spec: ProblemSpec,
                        requires_nonneg: bool = False) -> MaxPrincipleAudit:
    """Compare interior values with the parabolic-boundary maximum up to each snapshot time.

    The boundary data is sampled at the boundary face centers at the snapshot times.
    M0(t) = sup|u0| + sup over tau <= t of |psi|.
    """
    grid = traj.grid
    pts = boundary_points(grid)
    u0 = traj.initial.values
    if requires_nonneg and float(np.min(u0)) < 0:
        raise PreconditionError(f"initial data is negative somewhere (min {float(np.min(u0)):.3e})")

    sup_u0 = float(np.max(np.abs(u0)))
    max_data = float(np.max(u0))
    sup_psi = 0.0
    violation = 0.0
    m0_curve, max_u = [], []
    for t, snap in zip(traj.times, traj.snapshots):
        psi = np.asarray(spec.psi.value(pts, t), dtype=float)
        if requires_nonneg and float(np.min(psi)) < 0:
            raise PreconditionError(f"boundary data is negative at t={t:.6g}")
        sup_psi = max(sup_psi, float(np.max(np.abs(psi))))
        max_data = max(max_data, float(np.max(psi)))
        top = float(np.max(snap.values))
        violation = max(violation, top - max_data)
        m0_curve.append(sup_u0 + sup_psi)
        max_u.append(top)

    if violation > 0:
        logger.info(f"Maximum principle exceeded by {violation:.3e}")
    return MaxPrincipleAudit(violation=violation, times=list(traj.times),
                             m0_curve=m0_curve, max_u=max_u)


@dataclass
class EnergyQuantities:
    """Data functionals of one run; N_s and D_s are keyed by s."""
    T: float
    phi: float
    M_star: float
    a: float
    chi0: float
    chi1: float
    chi_star: float
    ubar0_sq: float
    grad_u0_sq: float
    E0: float
    E_star: float
    N0: float
    N_star: float
    N2: float
    N_s: Dict[float, float] = field(default_factory=dict)
    D_s: Dict[float, float] = field(default_factory=dict)
    M0_t: List[float] = field(default_factory=list)

    def n_of(self, r: float) -> float:
        """N_r; N_2 stands in for r <= 2."""
        if r <= 2:
            return self.N2
        try:
            return self.N_s[r]
        except KeyError:
            raise PreconditionError(f"N_s was not computed for s={r}")

    def orderings(self) -> Dict[str, bool]:
        checks = {
            "n0_chain": self.E_star <= self.N0 <= (self.M_star + 1.0) ** 2 * self.N_star,
            "n_chain": self.E_star <= self.N_star <= self.N2 and all(self.N2 <= v for v in self.N_s.values()),
            "chi1_bound": self.chi1 <= self.chi0 + self.chi_star,
        }
        return checks

    @property
    def e0_ratio(self) -> float:
        """E0 / (chi_star^(2(2+a)) E_star), with C taken as one."""
        scale = self.chi_star ** (2 * (2 + self.a)) * self.E_star
        if scale > 0:
            return self.E0 / scale
        return 0.0 if self.E0 == 0 else float("inf")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "T": self.T,
            "M_star": self.M_star,
            "chi1": self.chi1,
            "chi_star": self.chi_star,
            "E0": self.E0,
            "E_star": self.E_star,
            "N0": self.N0,
            "N_star": self.N_star,
            "N2": self.N2,
            "N_s": {f"{s:g}": v for s, v in sorted(self.N_s.items())},
            "D_s": {f"{s:g}": v for s, v in sorted(self.D_s.items())},
            "M0_t": self.M0_t,
            "E0_over_chi_E_star": self.e0_ratio,
            "orderings": self.orderings(),
        }


def energy_quantities(traj: Trajectory, spec: ProblemSpec, s_list: Sequence[float] = (),
                      cutoff: Optional[Cutoff] = None, d_list: Optional[Sequence[float]] = None,
                      fields: Optional[TrajectoryFields] = None) -> EnergyQuantities:
    """Evaluate the data functionals of a run.

    ``s_list`` selects the N_s (s > 2) and, unless ``d_list`` is given, the D_s to compute;
    D_s needs a cutoff. Norms of grad u0 use the discrete gradient of the stored u0.
    """
    d_list = list(s_list) if d_list is None else list(d_list)
    if d_list and cutoff is None:
        raise PreconditionError("D_s needs a cutoff function")

    fields = fields or TrajectoryFields(traj, spec)
    grid = fields.grid
    times = fields.times
    T = fields.T
    phi = spec.env.phi
    centers = grid.cell_centers()
    kc = kernel_constants(spec.law, spec.rot)
    bounds = env_bounds(spec.env, grid)
    a = kc.a

    ubar0 = traj.initial.values - spec.psi.value(centers, times[0])
    ubar0_sq = grid.integrate(ubar0 ** 2)
    grad_u0 = fields.grad_norm[0]
    grad_u0_sq = grid.integrate(grad_u0 ** 2)

    grad_psi, psi_t, psi_sq = [], [], []
    for t in times:
        g = spec.psi.gradient(centers, t)
        grad_psi.append(grid.integrate(np.einsum("...i,...i->...", g, g)))
        psi_t.append(grid.integrate(spec.psi.time_derivative(centers, t) ** 2))
        psi_sq.append(grid.integrate(spec.psi.value(centers, t) ** 2))
    int_grad_psi = time_integral(times, grad_psi)
    int_psi_t = time_integral(times, psi_t)
    int_psi_sq = time_integral(times, psi_sq)

    E_star = int_grad_psi + phi * int_psi_t + phi * int_psi_sq
    E0 = kc.chi1 ** (2 * (2 + a)) * int_grad_psi + phi * kc.chi1 ** 2 * (int_psi_t + int_psi_sq)
    M_star = max(float(np.max(np.abs(u))) for u in fields.u)

    N0 = phi * ubar0_sq + T * M_star ** 2 + E_star
    N_star = phi * ubar0_sq + T + E_star
    N2 = phi * (ubar0_sq + grad_u0_sq) + T + E_star
    N_s = {float(s): phi * (ubar0_sq + grad_u0_sq + grid.integrate(grad_u0 ** s)) + T + E_star
           for s in s_list if s > 2}

    D_s = {}
    if d_list:
        zeta0 = cutoff.value(centers, times[0])
        D_s = {float(s): grid.integrate(grad_u0 ** (2 * s + 2) * zeta0 ** 2) for s in d_list}

    m0 = max_principle_audit(traj, spec).m0_curve
    quantities = EnergyQuantities(T=T, phi=phi, M_star=M_star, a=a, chi0=kc.chi0, chi1=kc.chi1,
                                  chi_star=bounds.chi_star,
                                  ubar0_sq=ubar0_sq, grad_u0_sq=grad_u0_sq, E0=E0, E_star=E_star,
                                  N0=N0, N_star=N_star, N2=N2, N_s=N_s, D_s=D_s, M0_t=m0)
    logger.info(f"Energy quantities: M_star={M_star:.4g}, E_star={E_star:.4g}, N_star={N_star:.4g}")
    return quantities
