"""
The degeneracy weight K = (1 + |grad w + w^2 Q|)^-a and its pointwise comparison inequalities.
"""
import logging
from typing import Optional

import numpy as np

from src.grid.environment import EnvironmentParams, eval_Z
from src.grid.flux import cell_phi
from src.grid.mesh import Grid, ScalarField, Trace, VecField, gradient
from src.kernel.bounds import SLACK_TOLERANCE, BoundReport
from src.kernel.law import ForchheimerLaw
from src.utils.errors import PreconditionError

logger = logging.getLogger(__name__)


def weight_from_phi(phi: np.ndarray, a: float) -> np.ndarray:
    return (1.0 + np.sqrt(np.einsum("...i,...i->...", phi, phi))) ** (-a)


def weight_K(grid: Grid, env: EnvironmentParams, law: ForchheimerLaw, u, t: float,
             trace: Optional[Trace] = None) -> ScalarField:
    """K = (1 + |Phi|)^-a per cell, with Phi = grad u + u^2 Z(., t)."""
    return ScalarField(grid, weight_from_phi(cell_phi(grid, env, u, t, trace), law.degeneracy))


def forcing_field(grid: Grid, env: EnvironmentParams, t: float) -> VecField:
    return VecField(grid, eval_Z(env, grid.cell_centers(), t))


def kug_verify(w: ScalarField, Q: VecField, s: float, a: float, samples: Optional[int] = None,
               seed: int = 0) -> BoundReport:
    """Check the weight comparisons cellwise for K = K[w, Q].

    Covers the upper and lower comparisons of K|grad w|^s with |grad w|^(s-a), the
    rewritten lower bound at exponent s, and K <= K_* <= 2^(a/2) K for the smooth
    variant K_* = (1 + |Phi|^2)^(-a/2). The first two hold only for s >= a and are
    skipped below that. ``samples`` restricts the check to random cells.
    """
    if s < 0:
        raise PreconditionError(f"weight comparisons need s >= 0, got s={s}")
    if w.grid != Q.grid:
        raise PreconditionError("w and Q live on different grids")

    grad = gradient(w.grid, w.values).values
    wq = (w.values ** 2)[..., None] * Q.values
    phi = grad + wq
    phi_norm = np.sqrt(np.einsum("...i,...i->...", phi, phi))
    K = (1.0 + phi_norm) ** (-a)
    K_smooth = (1.0 + phi_norm ** 2) ** (-a / 2.0)
    gn = np.sqrt(np.einsum("...i,...i->...", grad, grad))
    wqn = np.sqrt(np.einsum("...i,...i->...", wq, wq))
    points = w.grid.cell_centers()

    if samples is not None and samples < K.size:
        rng = np.random.default_rng(seed)
        pick = rng.choice(K.size, size=samples, replace=False)
        K, K_smooth, gn, wqn = (arr.reshape(-1)[pick] for arr in (K, K_smooth, gn, wqn))
        points = points.reshape(-1, 3)[pick]

    report = BoundReport(samples_checked=int(K.size))

    def tol(*terms):
        return SLACK_TOLERANCE * (1.0 + sum(np.abs(t) for t in terms))

    if s >= a:
        lhs = K * gn ** s
        upper = 2.0 ** (2 * s - a) * gn ** (s - a) + 2.0 ** (2 * s + 1 - a) * (1.0 + wqn ** s)
        report.record("kug1", upper - lhs, tol(lhs, upper), points)

        lower = (gn ** (s - a) - (1.0 + wqn ** s)) / 3.0
        report.record("kug2", lhs - lower, tol(lhs, lower), points)

    rewritten = 3.0 * K * gn ** (s + a) + (1.0 + wqn ** (s + a))
    report.record("kugs", rewritten - gn ** s, tol(rewritten, gn ** s), points)

    report.record("Kstar", K_smooth - K, tol(K), points)
    report.record("Kstar", 2.0 ** (a / 2.0) * K - K_smooth, tol(K), points)

    if not report.passed:
        logger.warning(f"Weight comparisons violated {report.num_violations} time(s) at s={s}")
    return report
