"""
Rotating-frame environment: gravity direction e0(t), the forcing field Z(x, t) and the
bounds derived from it.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.grid.mesh import Grid
from src.kernel.law import RotationSpec
from src.utils.errors import DomainError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional inputs before the kappa scaling."""
    kappa: float
    phi_tilde: float
    G_tilde: float
    Omega_tilde: float = 0.0
    rho_star: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.phi_tilde < 1:
            raise ValueError("phi_tilde must lie in (0, 1)")
        if not self.G_tilde > 0:
            raise ValueError("G_tilde must be positive")
        if not self.Omega_tilde >= 0:
            raise ValueError("Omega_tilde must be nonnegative")
        if not self.rho_star >= 0:
            raise ValueError("rho_star must be nonnegative")


@dataclass(frozen=True)
class EnvironmentParams:
    """Nondimensional phi, G, Omega, theta, omega0 and the rotation.

    ``forcing_enabled=False`` switches Z off entirely (gravity and centrifugal), which
    makes constants exact steady states while Omega still feeds R and Omega_star.
    ``rho_star`` is kept when known so the derived bounds need not recover it from R.
    """
    phi: float
    G: float
    Omega: float = 0.0
    theta: float = 0.0
    omega0: float = 0.0
    rot: RotationSpec = RotationSpec()
    forcing_enabled: bool = True
    rho_star: Optional[float] = None

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")
        if not self.G >= 0 or not math.isfinite(self.G):
            raise ValueError("G must be a finite nonnegative real")
        if not self.Omega >= 0 or not math.isfinite(self.Omega):
            raise ValueError("Omega must be a finite nonnegative real")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not math.isfinite(self.omega0):
            raise ValueError("omega0 must be finite")
        if self.rho_star is not None and not self.rho_star >= 0:
            raise ValueError("rho_star must be nonnegative")

    @property
    def coriolis(self) -> float:
        return self.rot.coriolis

    def recovered_rho_star(self) -> float:
        """rho_star from R = 2 rho_star Omega / phi, or the stored value."""
        if self.rho_star is not None:
            return self.rho_star
        if self.Omega > 0:
            return self.rot.coriolis * self.phi / (2.0 * self.Omega)
        return 0.0


@dataclass(frozen=True)
class DerivedEnvBounds:
    r0: float
    Omega_star: float
    d_star: float
    chi_star: float
    M_Z: float
    mu_Z: float

    def to_dict(self):
        return {"r0": self.r0, "Omega_star": self.Omega_star, "d_star": self.d_star,
                "chi_star": self.chi_star, "M_Z": self.M_Z, "mu_Z": self.mu_Z}


def coriolis_from(rho_star: float, Omega: float, phi: float) -> float:
    return 2.0 * rho_star * Omega / phi


def nondimensionalize(p: PhysicalParams, axis=(0.0, 0.0, 1.0), theta: float = 0.0,
                      omega0: float = 0.0, forcing_enabled: bool = True) -> EnvironmentParams:
    """phi = kappa phi~, G = kappa^2 G~, Omega = kappa Omega~, R = 2 rho_star Omega / phi."""
    phi = p.kappa * p.phi_tilde
    G = p.kappa ** 2 * p.G_tilde
    Omega = p.kappa * p.Omega_tilde
    rot = RotationSpec(axis=tuple(axis), coriolis=coriolis_from(p.rho_star, Omega, phi))
    return EnvironmentParams(phi=phi, G=G, Omega=Omega, theta=theta, omega0=omega0, rot=rot,
                             forcing_enabled=forcing_enabled, rho_star=p.rho_star)


def eval_e0(env: EnvironmentParams, t: float) -> np.ndarray:
    if not math.isfinite(t):
        raise DomainError("time must be finite")
    phase = env.Omega * t + env.omega0
    st = math.sin(env.theta)
    return np.array([-st * math.cos(phase), -st * math.sin(phase), math.cos(env.theta)])


def eval_Z(env: EnvironmentParams, x, t: float) -> np.ndarray:
    """Z(x, t) = -G e0(t) + Omega^2 J^2 x for points of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,) or not np.all(np.isfinite(x)):
        raise DomainError("points must be finite with trailing dimension 3")
    if not env.forcing_enabled:
        return np.zeros_like(x)
    return -env.G * eval_e0(env, t) + env.Omega ** 2 * (x @ env.rot.J2.T)


def eval_DZ(env: EnvironmentParams) -> np.ndarray:
    """The constant spatial derivative of Z, Omega^2 J^2."""
    if not env.forcing_enabled:
        return np.zeros((3, 3))
    return env.Omega ** 2 * env.rot.J2


def radius_r0(env: EnvironmentParams, grid: Grid) -> float:
    corners = grid.corners()
    if env.rot.is_vertical:
        corners = corners[:, :2]
    return float(np.max(np.linalg.norm(corners, axis=1)))


def env_bounds(env: EnvironmentParams, grid: Grid) -> DerivedEnvBounds:
    if env.G <= 0:
        raise PreconditionError("derived bounds need G > 0")
    r0 = radius_r0(env, grid)
    if r0 <= 0:
        raise PreconditionError("box must not collapse onto the rotation axis")
    omega_star = env.Omega * math.sqrt(r0 / env.G)
    rho_star = env.recovered_rho_star()
    d_star = math.sqrt(env.G / r0) * max(2.0 * rho_star / env.phi, math.sqrt(r0), 2.0 ** 0.25)
    chi_star = max(1.0, d_star * (1.0 + omega_star))
    return DerivedEnvBounds(
        r0=r0,
        Omega_star=omega_star,
        d_star=d_star,
        chi_star=chi_star,
        M_Z=env.G * (1.0 + omega_star) ** 2,
        mu_Z=math.sqrt(2.0) * env.Omega ** 2,
    )


def with_omega_star(env: EnvironmentParams, grid: Grid, omega_star: float) -> EnvironmentParams:
    """Same environment with Omega set from Omega_star and R kept consistent with rho_star."""
    if omega_star < 0:
        raise PreconditionError("Omega_star must be nonnegative")
    r0 = radius_r0(env, grid)
    rho_star = env.recovered_rho_star()
    Omega = omega_star * math.sqrt(env.G / r0)
    rot = env.rot.with_coriolis(coriolis_from(rho_star, Omega, env.phi))
    return EnvironmentParams(phi=env.phi, G=env.G, Omega=Omega, theta=env.theta,
                             omega0=env.omega0, rot=rot, forcing_enabled=env.forcing_enabled,
                             rho_star=rho_star)
