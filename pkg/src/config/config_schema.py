"""
Configuration schema using Pydantic for validation.

Every block forbids unknown keys. Cross-field checks re-run the domain constructors so a
config that loads is one the kernel, grid and solver accept.
"""
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ValidationError, root_validator, validator

from src.audit.estimates import ESTIMATES
from src.grid.environment import EnvironmentParams, PhysicalParams
from src.grid.mesh import Grid
from src.kernel.law import ForchheimerLaw, RotationSpec
from src.solver.fields import FIELD_PRESETS
from src.solver.manufactured import MMS_CASES
from src.utils.errors import ConfigError

ACCEPTANCE_ESTIMATES = ["gradu6a", "gradu6b", "ab23", "ab24", "ab33", "ab34",
                        "ih0", "ih1", "ih2", "kug4", "pwt6", "LUembed"]


class StrictModel(BaseModel):
    class Config:
        extra = "forbid"


class NondimensionalBlock(StrictModel):
    phi: float
    G: float
    Omega: float = 0.0
    theta: float = 0.0
    omega0: float = 0.0
    forcing: bool = True


class PhysicalBlock(StrictModel):
    kappa: float
    phi_tilde: float
    G_tilde: float
    Omega_tilde: float = 0.0
    theta: float = 0.0
    omega0: float = 0.0
    forcing: bool = True


class LawBlock(StrictModel):
    coeffs: List[float] = [1.0, 1.0]
    exponents: List[float] = [1.0]

    @root_validator(skip_on_failure=True)
    def validate_law(cls, values):
        ForchheimerLaw(tuple(values["coeffs"]), tuple(values["exponents"]))
        return values


class RotationBlock(StrictModel):
    axis: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    rho_star: Optional[float] = None
    coriolis: Optional[float] = None

    @root_validator(skip_on_failure=True)
    def validate_rotation(cls, values):
        if values.get("rho_star") is not None and values.get("coriolis") is not None:
            raise ValueError("give either rho_star or coriolis, not both")
        if values.get("rho_star") is not None and values["rho_star"] < 0:
            raise ValueError("rho_star must be nonnegative")
        RotationSpec(axis=values["axis"], coriolis=values.get("coriolis") or 0.0)
        return values


class GridBlock(StrictModel):
    lo: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    hi: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    n: Union[int, Tuple[int, int, int]] = (8, 8, 8)

    @validator("n")
    def expand_n(cls, v):
        return (v, v, v) if isinstance(v, int) else tuple(v)

    @root_validator(skip_on_failure=True)
    def validate_grid(cls, values):
        Grid(lo=values["lo"], hi=values["hi"], n=values["n"])
        return values


class DataBlock(StrictModel):
    u0: str = "constant"
    psi: Optional[str] = None
    offset: float = 1.0
    amplitude: float = 0.0
    requires_nonneg: bool = False

    @validator("u0", "psi")
    def known_preset(cls, v):
        if v is not None and v not in FIELD_PRESETS:
            raise ValueError(f"unknown field preset '{v}', expected one of {sorted(FIELD_PRESETS)}")
        return v


class TimeBlock(StrictModel):
    T: float = 1.0
    safety: float = 0.4
    snapshot_every: int = 1
    max_dt: Optional[float] = None
    store_velocity: bool = False

    @validator("T")
    def validate_T(cls, v):
        if not v >= 0:
            raise ValueError("T must be nonnegative")
        return v

    @validator("safety")
    def validate_safety(cls, v):
        if not 0 < v <= 1:
            raise ValueError("safety must lie in (0, 1]")
        return v

    @validator("snapshot_every")
    def validate_cadence(cls, v):
        if v < 1:
            raise ValueError("snapshot_every must be at least 1")
        return v


class AuditBlock(StrictModel):
    estimates: List[str] = list(ACCEPTANCE_ESTIMATES)
    s: Dict[str, float] = {}
    margin: Optional[float] = None
    T0: Optional[float] = None
    t0: Optional[float] = None
    slice_time: Optional[float] = None
    omega_star: List[float] = [0.0, 1.0, 5.0, 10.0]

    @validator("estimates")
    def known_estimates(cls, v):
        unknown = [e for e in v if e not in ESTIMATES]
        if unknown:
            raise ValueError(f"unknown estimates {unknown}")
        return v

    @validator("s")
    def known_s_keys(cls, v):
        unknown = [e for e in v if e not in ESTIMATES]
        if unknown:
            raise ValueError(f"s given for unknown estimates {unknown}")
        return v


class KernelBlock(StrictModel):
    samples: int = 10000
    radius: float = 1000.0

    @validator("samples")
    def validate_samples(cls, v):
        if v < 1:
            raise ValueError("samples must be positive")
        return v

    @validator("radius")
    def validate_radius(cls, v):
        if not v > 0:
            raise ValueError("radius must be positive")
        return v


class MmsBlock(StrictModel):
    case: str = "mms-trig"
    mode: Literal["space", "time"] = "space"
    levels: List[int] = [8, 16, 32]
    n: int = 8
    T: Optional[float] = None

    @validator("case")
    def known_case(cls, v):
        if v not in MMS_CASES:
            raise ValueError(f"unknown manufactured case '{v}', expected one of {sorted(MMS_CASES)}")
        return v


class RunConfig(StrictModel):
    """Configuration schema for one run of the simulator and audit harness."""

    nondimensional: Optional[NondimensionalBlock] = None
    physical: Optional[PhysicalBlock] = None
    law: LawBlock = LawBlock()
    rotation: RotationBlock = RotationBlock()
    grid: GridBlock = GridBlock()
    data: DataBlock = DataBlock()
    time: TimeBlock = TimeBlock()
    audit: AuditBlock = AuditBlock()
    kernel: KernelBlock = KernelBlock()
    mms: MmsBlock = MmsBlock()
    seed: int = 0

    @root_validator(skip_on_failure=True)
    def validate_parameters(cls, values):
        nondim, phys = values.get("nondimensional"), values.get("physical")
        if (nondim is None) == (phys is None):
            raise ValueError("exactly one of 'physical' and 'nondimensional' is required")
        rotation = values["rotation"]
        if phys is not None:
            if rotation.coriolis is not None:
                raise ValueError("with a physical block the Coriolis coefficient follows from rotation.rho_star")
            PhysicalParams(kappa=phys.kappa, phi_tilde=phys.phi_tilde, G_tilde=phys.G_tilde,
                           Omega_tilde=phys.Omega_tilde, rho_star=rotation.rho_star or 0.0)
        else:
            EnvironmentParams(phi=nondim.phi, G=nondim.G, Omega=nondim.Omega, theta=nondim.theta,
                              omega0=nondim.omega0, forcing_enabled=nondim.forcing)
        return values


def validate_config(config_dict: dict) -> RunConfig:
    """Validate a configuration dictionary, reporting failures with their key paths."""
    try:
        return RunConfig(**config_dict)
    except ValidationError as e:
        problems = []
        for err in e.errors():
            key = ".".join(str(part) for part in err["loc"] if part != "__root__")
            problems.append((key or "<root>", err["msg"]))
        summary = "; ".join(f"{key}: {msg}" for key, msg in problems)
        raise ConfigError(f"Invalid configuration: {summary}", problems)


def create_default_config() -> RunConfig:
    """The documented defaults on the reference environment."""
    return RunConfig(nondimensional=NondimensionalBlock(phi=1.0, G=0.5))


def load_config_from_file(file_path: Union[str, Path]) -> RunConfig:
    """Load and validate configuration from a JSON file."""
    path = Path(file_path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}", [("<file>", "not found")])
    try:
        with open(path, "r", encoding="utf-8") as f:
            config_data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in config file: {e}", [("<file>", str(e))])
    if not isinstance(config_data, dict):
        raise ConfigError("Config document must be a JSON object", [("<root>", "not an object")])
    return validate_config(config_data)


def save_config_to_file(config: RunConfig, file_path: Union[str, Path]) -> None:
    """Save configuration to a JSON file."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
