"""
The momentum map F(v) = g(|v|) v + R J v, its Jacobian, and the inverse X = F^-1.

All functions accept a single 3-vector or a stack of shape (..., 3).
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.kernel.law import ForchheimerLaw, RotationSpec, eval_g, eval_sg_prime
from src.utils.errors import DomainError, KernelConvergenceError

logger = logging.getLogger(__name__)

MAX_NEWTON_ITERATIONS = 100
MAX_BACKTRACKS = 40
CONTINUATION_STEPS = 8
BISECTION_TOLERANCE = 1e-12
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class ToleranceSpec:
    """Residual tolerance |F(v) - y| <= max(atol, rtol |y|)."""
    atol: float = 1e-12
    rtol: float = 1e-12

    def __post_init__(self):
        if not (self.atol >= 0 and self.rtol >= 0) or (self.atol == 0 and self.rtol == 0):
            raise ValueError("tolerances must be nonnegative and not both zero")

    def bound(self, y_norm: np.ndarray) -> np.ndarray:
        return np.maximum(self.atol, self.rtol * y_norm)


DEFAULT_TOLERANCE = ToleranceSpec()


@dataclass
class InversionResult:
    """Solution of F(v) = y with per-point residuals."""
    v: np.ndarray
    residual: np.ndarray
    iterations: int
    continued: int = 0

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else 0.0


def _as_vectors(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 3:
        raise DomainError(f"{name} must have trailing dimension 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def vector_norm(v: np.ndarray) -> np.ndarray:
    return np.asarray(np.sqrt(np.einsum("...i,...i->...", v, v)))


def apply_F(law: ForchheimerLaw, rot: RotationSpec, v: np.ndarray) -> np.ndarray:
    g = eval_g(law, vector_norm(v))
    out = np.asarray(g)[..., None] * v
    if rot.coriolis:
        out = out + rot.coriolis * (v @ rot.J.T)
    return out


def apply_jacobian_F(law: ForchheimerLaw, rot: RotationSpec, v: np.ndarray) -> np.ndarray:
    s = vector_norm(v)
    g = np.asarray(eval_g(law, s))
    sg = np.asarray(eval_sg_prime(law, s))
    safe = np.where(s > 0, s, 1.0)
    vhat = np.where((s > 0)[..., None], v / safe[..., None], 0.0)

    jac = (sg[..., None, None] * vhat[..., :, None] * vhat[..., None, :]
           + g[..., None, None] * np.eye(3))
    if rot.coriolis:
        jac = jac + rot.coriolis * rot.J
    return jac


def eval_F(law: ForchheimerLaw, rot: RotationSpec, v) -> np.ndarray:
    """F(v) = g(|v|) v + R k x v."""
    return apply_F(law, rot, _as_vectors(v, "v"))


def jacobian_F(law: ForchheimerLaw, rot: RotationSpec, v) -> np.ndarray:
    """F'(v) = s g'(s) v^ v^T + g(s) I + R J with s = |v|; F'(0) = a_0 I + R J.

    For laws with alpha_1 < 1 the matrix at v = 0 is the limit along no direction;
    callers can test ``law.singular_at_origin`` for that regime.
    """
    v = _as_vectors(v, "v")
    if law.singular_at_origin and np.any(vector_norm(v) == 0):
        logger.debug("F'(0) requested with alpha_1 < 1; returning a_0 I + R J")
    return apply_jacobian_F(law, rot, v)


def inverse_3x3(m: np.ndarray) -> np.ndarray:
    """Closed-form inverse of a stack of 3x3 matrices via the adjugate."""
    r0, r1, r2 = m[..., 0, :], m[..., 1, :], m[..., 2, :]
    c0 = np.cross(r1, r2)
    c1 = np.cross(r2, r0)
    c2 = np.cross(r0, r1)
    det = np.einsum("...i,...i->...", r0, c0)
    return np.stack([c0, c1, c2], axis=-1) / det[..., None, None]


def magnitude_guess(law: ForchheimerLaw, y_norm: np.ndarray) -> np.ndarray:
    """Solve h g(h) = |y| for h >= 0 by bisection."""
    a = law.degeneracy
    lo = np.zeros_like(y_norm)
    hi = 1.0 + np.power(y_norm / law.aN, 1.0 - a)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = mid * eval_g(law, mid) < y_norm
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= BISECTION_TOLERANCE * (1.0 + hi)):
            break
    return 0.5 * (lo + hi)


def shell_guess(law: ForchheimerLaw, y: np.ndarray) -> np.ndarray:
    """v0 = h y/|y| on the shell h g(h) = |y|; rotation is ignored."""
    y_norm = vector_norm(y)
    h = magnitude_guess(law, y_norm)
    safe = np.where(y_norm > 0, y_norm, 1.0)
    return (h / safe)[..., None] * y


def _newton(law: ForchheimerLaw, rot: RotationSpec, y: np.ndarray, v: np.ndarray,
            bound: np.ndarray):
    """Damped Newton on a flat (M, 3) batch; returns (v, residual, converged, iterations)."""
    r = apply_F(law, rot, v) - y
    res = vector_norm(r)
    converged = res <= bound
    iterations = 0

    while iterations < MAX_NEWTON_ITERATIONS and not np.all(converged):
        iterations += 1
        idx = np.flatnonzero(~converged)
        va, ya, ra, resa = v[idx], y[idx], r[idx], res[idx]

        step = np.linalg.solve(apply_jacobian_F(law, rot, va), -ra[..., None])[..., 0]
        lam = np.ones(len(idx))
        pending = np.ones(len(idx), dtype=bool)
        trial_v, trial_r, trial_res = va.copy(), ra.copy(), resa.copy()
        for _ in range(MAX_BACKTRACKS + 1):
            p = np.flatnonzero(pending)
            cand_v = va[p] + lam[p, None] * step[p]
            cand_r = apply_F(law, rot, cand_v) - ya[p]
            cand_res = vector_norm(cand_r)
            trial_v[p], trial_r[p], trial_res[p] = cand_v, cand_r, cand_res
            accepted = cand_res < resa[p]
            pending[p[accepted]] = False
            if not pending.any():
                break
            lam[p[~accepted]] *= 0.5
        # no decrease after every halving: stay at the current iterate
        keep = np.flatnonzero(pending)
        trial_v[keep], trial_r[keep], trial_res[keep] = va[keep], ra[keep], resa[keep]

        v[idx], r[idx], res[idx] = trial_v, trial_r, trial_res
        converged[idx] = res[idx] <= bound[idx]

    return v, res, converged, iterations


def solve_F(law: ForchheimerLaw, rot: RotationSpec, y, tol: Optional[ToleranceSpec] = None,
            initial_guess=None) -> InversionResult:
    """Solve F(v) = y for every vector in y.

    Newton starts from the magnitude-shell guess |v| = h with h g(h) = |y| (or from
    ``initial_guess``). Points that fail are retried by continuation in R from 0.
    """
    tol = tol or DEFAULT_TOLERANCE
    y = _as_vectors(y, "y")
    shape = y.shape
    flat_y = y.reshape(-1, 3)
    y_norm = vector_norm(flat_y)
    bound = tol.bound(y_norm)

    if initial_guess is not None:
        v0 = _as_vectors(initial_guess, "initial_guess").reshape(-1, 3).copy()
        if v0.shape != flat_y.shape:
            raise DomainError("initial_guess must match the shape of y")
    else:
        v0 = shell_guess(law, flat_y)

    zero = y_norm == 0
    v0[zero] = 0.0

    v, res, converged, iterations = _newton(law, rot, flat_y, v0, bound)
    continued = 0

    if not np.all(converged):
        failed = np.flatnonzero(~converged)
        continued = len(failed)
        logger.warning(f"Newton failed at {continued} point(s); retrying with continuation in R")
        ys, bs = flat_y[failed], bound[failed]
        vs = shell_guess(law, ys)
        ok = np.zeros(len(failed), dtype=bool)
        for k in range(CONTINUATION_STEPS + 1):
            stage = rot.with_coriolis(rot.coriolis * k / CONTINUATION_STEPS)
            vs, rs, ok, _ = _newton(law, stage, ys, vs, bs)
        v[failed], res[failed] = vs, rs
        if not np.all(ok):
            raise KernelConvergenceError(
                f"F(v) = y unsolved at {int(np.count_nonzero(~ok))} point(s)",
                residual=float(np.max(rs[~ok])),
                count=int(np.count_nonzero(~ok)),
            )

    v[zero] = 0.0
    res[zero] = 0.0
    return InversionResult(
        v=v.reshape(shape),
        residual=res.reshape(shape[:-1]),
        iterations=iterations,
        continued=continued,
    )


def invert_F(law: ForchheimerLaw, rot: RotationSpec, y, tol: Optional[ToleranceSpec] = None,
             initial_guess=None) -> np.ndarray:
    """X(y): the unique v with F(v) = y."""
    return solve_F(law, rot, y, tol=tol, initial_guess=initial_guess).v


def jacobian_X(law: ForchheimerLaw, rot: RotationSpec, y, tol: Optional[ToleranceSpec] = None,
               x_of_y=None) -> np.ndarray:
    """X'(y) = F'(X(y))^-1. Pass ``x_of_y`` when X(y) is already known."""
    if x_of_y is None:
        x_of_y = invert_F(law, rot, y, tol=tol)
    else:
        x_of_y = _as_vectors(x_of_y, "x_of_y")
    return inverse_3x3(apply_jacobian_F(law, rot, x_of_y))
