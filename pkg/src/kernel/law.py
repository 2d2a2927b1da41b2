"""
Generalized Forchheimer law g(s) = sum_i a_i s^alpha_i and the rotation k x (.).
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

from src.utils.errors import DomainError, SingularDerivativeError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

UNIT_AXIS_TOLERANCE = 1e-14


@dataclass(frozen=True)
class ForchheimerLaw:
    """Coefficients a_0..a_N and exponents alpha_1 < ... < alpha_N of g (alpha_0 = 0 implicit)."""
    coeffs: Tuple[float, ...]
    exponents: Tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        exponents = tuple(float(e) for e in self.exponents)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "exponents", exponents)

        if len(exponents) < 1:
            raise ValueError("a Forchheimer law needs at least one nonzero exponent")
        if len(coeffs) != len(exponents) + 1:
            raise ValueError(
                f"expected {len(exponents) + 1} coefficients for {len(exponents)} exponents, got {len(coeffs)}"
            )
        if not all(np.isfinite(coeffs)) or not all(np.isfinite(exponents)):
            raise ValueError("coefficients and exponents must be finite")
        if coeffs[0] <= 0 or coeffs[-1] <= 0:
            raise ValueError("a_0 and a_N must be positive")
        if any(c < 0 for c in coeffs[1:-1]):
            raise ValueError("intermediate coefficients must be nonnegative")
        if exponents[0] <= 0:
            raise ValueError("exponents must be positive")
        if any(b <= a for a, b in zip(exponents, exponents[1:])):
            raise ValueError("exponents must be strictly increasing")

    @property
    def num_terms(self) -> int:
        return len(self.exponents)

    @property
    def a0(self) -> float:
        return self.coeffs[0]

    @property
    def aN(self) -> float:
        return self.coeffs[-1]

    @property
    def alpha_N(self) -> float:
        return self.exponents[-1]

    @property
    def degeneracy(self) -> float:
        """The number a = alpha_N / (1 + alpha_N) in (0, 1)."""
        return self.alpha_N / (1.0 + self.alpha_N)

    @property
    def singular_at_origin(self) -> bool:
        """True when g'(s) is unbounded as s -> 0 (alpha_1 < 1)."""
        return self.exponents[0] < 1.0


@dataclass(frozen=True)
class RotationSpec:
    """Unit rotation axis k and Coriolis coefficient R >= 0."""
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    coriolis: float = 0.0
    J: np.ndarray = field(init=False, repr=False, compare=False)
    J2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,) or not np.all(np.isfinite(axis)):
            raise ValueError("rotation axis must be a finite 3-vector")
        if abs(np.linalg.norm(axis) - 1.0) > UNIT_AXIS_TOLERANCE:
            raise ValueError(f"rotation axis must be a unit vector, |k| = {np.linalg.norm(axis)!r}")
        if not np.isfinite(self.coriolis) or self.coriolis < 0:
            raise ValueError("Coriolis coefficient must be a nonnegative real")
        object.__setattr__(self, "axis", tuple(float(k) for k in axis))
        object.__setattr__(self, "coriolis", float(self.coriolis))

        k1, k2, k3 = axis
        J = np.array([[0.0, -k3, k2],
                      [k3, 0.0, -k1],
                      [-k2, k1, 0.0]])
        J.setflags(write=False)
        J2 = J @ J
        J2.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "J2", J2)

    @property
    def is_vertical(self) -> bool:
        """Rotation about the vertical axis, k = +-(0, 0, 1)."""
        return self.axis[0] == 0.0 and self.axis[1] == 0.0

    def with_coriolis(self, coriolis: float) -> "RotationSpec":
        return RotationSpec(axis=self.axis, coriolis=coriolis)


def rotation_matrices(rot: RotationSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Return J (Jx = k x x) and J^2 = J J."""
    return rot.J.copy(), rot.J2.copy()


def _as_nonneg(s: ArrayLike) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("g is only defined for finite arguments")
    if np.any(arr < 0):
        raise DomainError("g is only defined for s >= 0")
    return arr


def eval_g(law: ForchheimerLaw, s: ArrayLike, with_derivative: bool = False):
    """Evaluate g(s), and g'(s) when requested.

    Works elementwise on arrays. g'(0) exists only when alpha_1 >= 1; otherwise a
    SingularDerivativeError is raised for any zero argument.
    """
    s = _as_nonneg(s)
    g = np.full_like(s, law.a0)
    for a, alpha in zip(law.coeffs[1:], law.exponents):
        g = g + a * np.power(s, alpha)

    if not with_derivative:
        return g if g.ndim else float(g)

    if law.singular_at_origin and np.any(s == 0):
        raise SingularDerivativeError(
            f"g'(0) is unbounded for alpha_1 = {law.exponents[0]} < 1"
        )
    dg = np.zeros_like(s)
    for a, alpha in zip(law.coeffs[1:], law.exponents):
        if alpha == 1.0:
            dg = dg + a
        else:
            with np.errstate(divide="ignore"):
                dg = dg + a * alpha * np.power(s, alpha - 1.0)
    if g.ndim:
        return g, dg
    return float(g), float(dg)


def eval_sg_prime(law: ForchheimerLaw, s: ArrayLike) -> np.ndarray:
    """s * g'(s) = sum_i a_i alpha_i s^alpha_i; finite at s = 0 for every law."""
    s = _as_nonneg(s)
    out = np.zeros_like(s)
    for a, alpha in zip(law.coeffs[1:], law.exponents):
        out = out + a * alpha * np.power(s, alpha)
    return out
