"""
Explicit constants of the kernel estimates and a sampler that checks every one of them.
"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.kernel.inversion import (
    ToleranceSpec,
    apply_F,
    apply_jacobian_F,
    vector_norm,
    inverse_3x3,
    solve_F,
)
from src.kernel.law import ForchheimerLaw, RotationSpec, eval_g
from src.utils.errors import PreconditionError

logger = logging.getLogger(__name__)

C_STAR = float(np.sqrt(3.0))
XI_PER_SAMPLE = 16
SLACK_TOLERANCE = 1e-12
ROTATION_SIGN_TOLERANCE = 1e-12
EDGE_MAGNITUDES = (1e-6, 1.0, 1e3)
MAX_RECORDED_PER_INEQUALITY = 50

KERNEL_INEQUALITIES = (
    "X0", "X1", "X2", "X3", "Xprime", "hXh", "newpos", "Fmono", "gf1", "Fzz", "claim",
)


@dataclass(frozen=True)
class KernelConstants:
    a: float
    chi0: float
    chi1: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    c_star: float = C_STAR

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def kernel_constants(law: ForchheimerLaw, rot: RotationSpec) -> KernelConstants:
    a = law.degeneracy
    alpha_n = law.alpha_N
    a0, an = law.a0, law.aN
    chi0 = float(sum(law.coeffs))
    chi1 = chi0 + rot.coriolis

    c1 = min(1.0, chi0) ** a
    c2 = 2.0 ** a / (c1 * min(a0, an))
    c3 = an ** (a - 1.0)
    c4 = (min(1.0, a0, an) / 2.0 ** alpha_n) ** (1.0 + a)
    c5 = 2.0 ** (-a) * c4
    c6 = C_STAR * (2.0 ** (-alpha_n) * min(1.0, an)) ** a / (alpha_n + 2.0)
    c7 = C_STAR * 2.0 ** alpha_n / min(a0, an)
    c8 = c4 / (alpha_n + 2.0) ** 2
    c9 = C_STAR / (alpha_n + 2.0)
    return KernelConstants(a=a, chi0=chi0, chi1=chi1, c1=c1, c2=c2, c3=c3, c4=c4, c5=c5,
                           c6=c6, c7=c7, c8=c8, c9=c9)


@dataclass
class Violation:
    inequality: str
    point: Tuple[float, ...]
    slack: float

    def to_dict(self) -> Dict[str, Any]:
        return {"inequality": self.inequality, "point": list(self.point), "slack": self.slack}


@dataclass
class BoundReport:
    """Outcome of a sampled inequality check.

    ``violations`` keeps at most a few records per inequality; ``violation_counts`` is complete.
    ``max_slack`` is the largest deficit found (0 when every check passed).
    """
    samples_checked: int
    violations: List[Violation] = field(default_factory=list)
    max_slack: float = 0.0
    violation_counts: Dict[str, int] = field(default_factory=dict)
    checks: Dict[str, int] = field(default_factory=dict)

    @property
    def num_violations(self) -> int:
        return int(sum(self.violation_counts.values()))

    @property
    def passed(self) -> bool:
        return self.num_violations == 0

    def record(self, inequality: str, slack: np.ndarray, tolerance, points: np.ndarray) -> None:
        """Register one family of checks ``slack >= -tolerance``; points align with slack."""
        slack = np.asarray(slack, dtype=float)
        tolerance = np.broadcast_to(np.asarray(tolerance, dtype=float), slack.shape)
        points = np.asarray(points, dtype=float).reshape(slack.size, -1)
        flat, tol = slack.reshape(-1), tolerance.reshape(-1)

        self.checks[inequality] = self.checks.get(inequality, 0) + flat.size
        bad = np.flatnonzero(~(flat >= -tol))
        if bad.size == 0:
            return
        self.violation_counts[inequality] = self.violation_counts.get(inequality, 0) + int(bad.size)
        deficits = np.where(np.isfinite(flat[bad]), -flat[bad], np.inf)
        self.max_slack = max(self.max_slack, float(np.max(deficits)))
        for i in bad[:MAX_RECORDED_PER_INEQUALITY]:
            self.violations.append(Violation(inequality, tuple(float(p) for p in points[i]), float(flat[i])))

    def merge(self, other: "BoundReport") -> "BoundReport":
        merged = BoundReport(samples_checked=self.samples_checked + other.samples_checked,
                             violations=self.violations + other.violations,
                             max_slack=max(self.max_slack, other.max_slack),
                             violation_counts=dict(self.violation_counts),
                             checks=dict(self.checks))
        for key, count in other.violation_counts.items():
            merged.violation_counts[key] = merged.violation_counts.get(key, 0) + count
        for key, count in other.checks.items():
            merged.checks[key] = merged.checks.get(key, 0) + count
        return merged

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples_checked": self.samples_checked,
            "num_violations": self.num_violations,
            "max_slack": self.max_slack,
            "checks": dict(sorted(self.checks.items())),
            "violation_counts": dict(sorted(self.violation_counts.items())),
            "violations": [v.to_dict() for v in self.violations],
        }


def sample_ball(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Uniform samples in the closed ball of the given radius in R^3."""
    direction = rng.standard_normal((count, 3))
    direction /= vector_norm(direction)[:, None]
    r = radius * rng.random(count) ** (1.0 / 3.0)
    return r[:, None] * direction


def sample_unit_vectors(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    xi = rng.standard_normal(shape + (3,))
    return xi / vector_norm(xi)[..., None]


def edge_points(radius: float) -> np.ndarray:
    """Origin, signed axis points at a few magnitudes within the radius, and |y| = 1 diagonals."""
    points = [np.zeros(3)]
    for mag in EDGE_MAGNITUDES:
        if mag > radius:
            continue
        for axis in range(3):
            for sign in (1.0, -1.0):
                p = np.zeros(3)
                p[axis] = sign * mag
                points.append(p)
    if radius >= 1.0:
        points.append(np.ones(3) / np.sqrt(3.0))
        points.append(-np.ones(3) / np.sqrt(3.0))
    return np.array(points)


def verify_kernel_bounds(law: ForchheimerLaw, rot: RotationSpec, num_samples: int, radius: float,
                         seed: int, constants: Optional[KernelConstants] = None,
                         tol: Optional[ToleranceSpec] = None) -> BoundReport:
    """Check every explicit kernel inequality at sampled and edge points.

    ``constants`` replaces the computed constants, which lets a caller confirm that a
    perturbed constant is detected.
    """
    if num_samples < 1:
        raise PreconditionError("num_samples must be at least 1")
    if not radius > 0:
        raise PreconditionError("radius must be positive")

    kc = constants or kernel_constants(law, rot)
    rng = np.random.default_rng(seed)
    y = np.concatenate([edge_points(radius), sample_ball(rng, num_samples, radius)])
    report = BoundReport(samples_checked=len(y))

    logger.info(f"Checking kernel inequalities at {len(y)} points (radius {radius}, seed {seed})")
    solved = solve_F(law, rot, y, tol=tol)
    v = solved.v
    ny = vector_norm(y)
    nv = vector_norm(v)
    a, chi1 = kc.a, kc.chi1
    weight = (1.0 + ny) ** (-a)
    slack_tol = SLACK_TOLERANCE * (1.0 + ny) ** 2

    report.record("X0", nv - kc.c1 / chi1 * ny * weight, slack_tol, y)
    report.record("X0", kc.c2 * chi1 ** a * ny * weight - nv, slack_tol, y)
    report.record("X1", nv - (chi1 ** (a - 1.0) * ny ** (1.0 - a) - 1.0), slack_tol, y)
    report.record("X1", kc.c3 * ny ** (1.0 - a) - nv, slack_tol, y)

    xy = np.einsum("...i,...i->...", v, y)
    report.record("X2", xy - kc.c4 * chi1 ** -2 * ny ** 2 * weight, slack_tol, y)
    report.record("X2", kc.c2 * chi1 ** a * ny ** 2 * weight - xy, slack_tol, y)
    report.record("X3", xy - kc.c5 * chi1 ** -2 * (ny ** (2.0 - a) - 1.0), slack_tol, y)
    report.record("X3", kc.c3 * ny ** (2.0 - a) - xy, slack_tol, y)

    g = np.asarray(eval_g(law, nv))
    report.record("gf1", ny - g * nv, slack_tol, y)
    report.record("gf1", (g + rot.coriolis) * nv - ny, slack_tol, y)

    fprime = apply_jacobian_F(law, rot, v)
    xprime = inverse_3x3(fprime)
    xp_norm = np.sqrt(np.einsum("...ij,...ij->...", xprime, xprime))
    report.record("Xprime", xp_norm - kc.c6 / chi1 * weight, slack_tol, y)
    report.record("Xprime", kc.c7 * (1.0 + chi1) ** a * weight - xp_norm, slack_tol, y)
    report.record("claim", xp_norm - kc.c9 / (g + rot.coriolis), slack_tol, y)
    report.record("claim", kc.c_star / g - xp_norm, slack_tol, y)

    xi = sample_unit_vectors(rng, (len(y), XI_PER_SAMPLE))
    quad_x = np.einsum("mki,mij,mkj->mk", xi, xprime, xi)
    quad_f = np.einsum("mki,mij,mkj->mk", xi, fprime, xi)
    xi_points = np.repeat(y, XI_PER_SAMPLE, axis=0)
    report.record("hXh", quad_x - kc.c8 * chi1 ** -2 * weight[:, None],
                  slack_tol[:, None], xi_points)
    report.record("Fzz", quad_f - g[:, None], SLACK_TOLERANCE * (1.0 + np.abs(quad_f)), xi_points)

    sym = 0.5 * (xprime + np.swapaxes(xprime, -1, -2))
    report.record("newpos", -np.einsum("...ij,ij->...", sym, rot.J2), ROTATION_SIGN_TOLERANCE, y)

    report = report.merge(verify_monotonicity(law, rot, num_samples, radius, rng))
    report.samples_checked = len(y)

    if report.passed:
        logger.info(f"Kernel inequalities hold at all {len(y)} points")
    else:
        logger.warning(f"Kernel inequalities violated {report.num_violations} time(s): "
                       f"{dict(sorted(report.violation_counts.items()))}")
    return report


def verify_monotonicity(law: ForchheimerLaw, rot: RotationSpec, num_pairs: int, radius: float,
                        rng: np.random.Generator) -> BoundReport:
    """(F(v) - F(w)).(v - w) >= a_0 |v - w|^2 on random pairs in the ball."""
    v = sample_ball(rng, num_pairs, radius)
    w = sample_ball(rng, num_pairs, radius)
    fv, fw = apply_F(law, rot, v), apply_F(law, rot, w)
    diff = v - w
    lhs = np.einsum("...i,...i->...", fv - fw, diff)
    dist = vector_norm(diff)
    tol = SLACK_TOLERANCE * (1.0 + (vector_norm(fv) + vector_norm(fw)) * dist)
    report = BoundReport(samples_checked=0)
    report.record("Fmono", lhs - law.a0 * dist ** 2, tol, np.concatenate([v, w], axis=1))
    return report


