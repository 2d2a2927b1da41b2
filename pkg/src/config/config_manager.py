"""
Configuration manager: loads run configs and turns them into domain objects.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .config_schema import (
    RunConfig,
    load_config_from_file,
    save_config_to_file,
    validate_config,
)
from src.audit.estimates import EstimateParams
from src.grid.environment import EnvironmentParams, PhysicalParams, coriolis_from, nondimensionalize
from src.grid.mesh import Grid, ScalarField
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.solver.fields import build_field
from src.solver.problem import ProblemSpec, StepControls
from src.utils.errors import ConfigError

# CLI override name -> key path inside the config document
OVERRIDES = {
    "seed": ("seed",),
    "samples": ("kernel", "samples"),
    "estimates": ("audit", "estimates"),
}


def load_config(path: Union[str, Path]) -> RunConfig:
    return load_config_from_file(path)


class ConfigManager:
    """Holds one validated RunConfig and builds the objects each subcommand needs."""

    def __init__(self, config_file: Optional[Union[str, Path]] = None, config: Optional[RunConfig] = None):
        self.logger = logging.getLogger(__name__)
        self.config_file = Path(config_file) if config_file is not None else None
        if config is not None:
            self.config = config
        elif self.config_file is not None:
            self.config = self.load_config()
        else:
            raise ConfigError("ConfigManager needs a config file or a RunConfig")

    def load_config(self) -> RunConfig:
        """Load configuration from file with Pydantic validation."""
        config = load_config_from_file(self.config_file)
        self.logger.info(f"Loaded configuration from {self.config_file}")
        return config

    def save_config(self, file_path: Optional[Union[str, Path]] = None) -> None:
        """Save configuration to file."""
        target = file_path or self.config_file
        if target is None:
            raise ConfigError("no file to save the configuration to")
        save_config_to_file(self.config, target)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value by dotted key path."""
        node: Any = self.config
        for part in key.split("."):
            if not hasattr(node, part):
                return default
            node = getattr(node, part)
        return node

    def set(self, key: str, value: Any) -> None:
        """Set a configuration value by dotted key path and revalidate."""
        self.update(**{key: value})

    def update(self, **kwargs) -> None:
        """Apply several overrides at once; names in OVERRIDES map to their key paths."""
        config_dict = self.config.dict()
        for name, value in kwargs.items():
            if value is None:
                continue
            path = OVERRIDES.get(name, tuple(name.split(".")))
            node = config_dict
            for part in path[:-1]:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"cannot set '{name}'", [(".".join(path), "parent block missing")])
                node = node[part]
            node[path[-1]] = value
        self.config = validate_config(config_dict)

    @property
    def validated_config(self) -> RunConfig:
        return self.config

    # Domain objects

    def build_law(self) -> ForchheimerLaw:
        law = self.config.law
        return ForchheimerLaw(tuple(law.coeffs), tuple(law.exponents))

    def build_environment(self) -> EnvironmentParams:
        cfg = self.config
        rotation = cfg.rotation
        if cfg.physical is not None:
            p = cfg.physical
            params = PhysicalParams(kappa=p.kappa, phi_tilde=p.phi_tilde, G_tilde=p.G_tilde,
                                    Omega_tilde=p.Omega_tilde, rho_star=rotation.rho_star or 0.0)
            return nondimensionalize(params, axis=rotation.axis, theta=p.theta, omega0=p.omega0,
                                     forcing_enabled=p.forcing)
        nd = cfg.nondimensional
        if rotation.coriolis is not None:
            coriolis = rotation.coriolis
        else:
            coriolis = coriolis_from(rotation.rho_star or 0.0, nd.Omega, nd.phi)
        rot = RotationSpec(axis=tuple(rotation.axis), coriolis=coriolis)
        return EnvironmentParams(phi=nd.phi, G=nd.G, Omega=nd.Omega, theta=nd.theta, omega0=nd.omega0,
                                 rot=rot, forcing_enabled=nd.forcing, rho_star=rotation.rho_star)

    def build_rotation(self) -> RotationSpec:
        return self.build_environment().rot

    def build_grid(self) -> Grid:
        g = self.config.grid
        return Grid(lo=g.lo, hi=g.hi, n=g.n)

    def build_problem(self) -> ProblemSpec:
        cfg = self.config
        grid = self.build_grid()
        data = cfg.data
        u0_field = build_field(data.u0, grid, data.offset, data.amplitude)
        psi = build_field(data.psi or data.u0, grid, data.offset, data.amplitude)
        u0 = ScalarField(grid, u0_field.value(grid.cell_centers(), 0.0))
        return ProblemSpec(env=self.build_environment(), law=self.build_law(), grid=grid, u0=u0,
                           psi=psi, T=cfg.time.T, requires_nonneg=data.requires_nonneg)

    def build_controls(self) -> StepControls:
        t = self.config.time
        kappa = self.config.physical.kappa if self.config.physical is not None else 1.0
        return StepControls(safety=t.safety, max_dt=t.max_dt if t.max_dt is not None else math.inf,
                            snapshot_every=t.snapshot_every, store_velocity=t.store_velocity, kappa=kappa)

    def estimate_params(self) -> Dict[str, EstimateParams]:
        audit = self.config.audit
        return {eid: EstimateParams(s=audit.s.get(eid), margin=audit.margin, T0=audit.T0, t0=audit.t0,
                                    slice_time=audit.slice_time)
                for eid in audit.estimates}
