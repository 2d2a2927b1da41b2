"""
Cut-off functions for interior estimates: products of C^2 smoothstep ramps in space and,
optionally, a ramp in time.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from src.grid.mesh import Grid
from src.utils.errors import PreconditionError

# max of d/dr (3r^2 - 2r^3) on [0, 1], attained at r = 1/2
RAMP_SLOPE = 1.5


def smoothstep(r: np.ndarray) -> np.ndarray:
    r = np.clip(r, 0.0, 1.0)
    return r * r * (3.0 - 2.0 * r)


def smoothstep_slope(r: np.ndarray) -> np.ndarray:
    inside = (r > 0.0) & (r < 1.0)
    return np.where(inside, 6.0 * r * (1.0 - r), 0.0)


@dataclass(frozen=True)
class Cutoff:
    """zeta(x, t) = prod_d ramp_d(x_d) * temporal(t).

    Each spatial ramp is zero within one cell of the box boundary, rises over ``margin``
    and equals one on the inner box U'. With ``temporal=(T0, t0)`` the time factor is
    zero up to T0 - t0 and one from T0 on.
    """
    grid: Grid
    margin: float
    temporal: Optional[Tuple[float, float]] = None
    offset: float = field(init=False)
    inner_lo: Tuple[float, float, float] = field(init=False)
    inner_hi: Tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        grid = self.grid
        if not self.margin >= 2.0 * grid.max_dx:
            raise PreconditionError(
                f"cutoff margin {self.margin} is below two cells ({2.0 * grid.max_dx:.6g})")
        offset = grid.max_dx
        inner_lo = tuple(l + offset + self.margin for l in grid.lo)
        inner_hi = tuple(h - offset - self.margin for h in grid.hi)
        if any(lo >= hi for lo, hi in zip(inner_lo, inner_hi)):
            raise PreconditionError(f"cutoff margin {self.margin} leaves no interior region U'")
        if self.temporal is not None:
            T0, t0 = self.temporal
            if not 0 < t0 < T0:
                raise PreconditionError(f"temporal cutoff needs 0 < t0 < T0, got T0={T0}, t0={t0}")
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "inner_lo", inner_lo)
        object.__setattr__(self, "inner_hi", inner_hi)

    def _ramps(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.grid.lo) + self.offset
        hi = np.asarray(self.grid.hi) - self.offset
        r_low = (x - lo) / self.margin
        r_high = (hi - x) / self.margin
        ramp = smoothstep(r_low) * smoothstep(r_high)
        slope = (smoothstep_slope(r_low) * smoothstep(r_high)
                 - smoothstep(r_low) * smoothstep_slope(r_high)) / self.margin
        return ramp, slope

    def time_factor(self, t: float) -> float:
        if self.temporal is None:
            return 1.0
        T0, t0 = self.temporal
        return float(smoothstep(np.asarray((t - (T0 - t0)) / t0)))

    def time_factor_derivative(self, t: float) -> float:
        if self.temporal is None:
            return 0.0
        T0, t0 = self.temporal
        return float(smoothstep_slope(np.asarray((t - (T0 - t0)) / t0))) / t0

    def spatial(self, x: np.ndarray) -> np.ndarray:
        ramp, _ = self._ramps(x)
        return np.prod(ramp, axis=-1)

    def value(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.spatial(x) * self.time_factor(t)

    def gradient(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        ramp, slope = self._ramps(x)
        out = np.empty(np.shape(ramp))
        for d in range(3):
            others = np.prod(np.delete(ramp, d, axis=-1), axis=-1)
            out[..., d] = slope[..., d] * others
        return out * self.time_factor(t)

    def time_derivative(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.spatial(x) * self.time_factor_derivative(t)

    @property
    def max_partial(self) -> float:
        """Analytic max of |d zeta / d x_i|."""
        return RAMP_SLOPE / self.margin

    @property
    def max_time_derivative(self) -> float:
        if self.temporal is None:
            return 0.0
        return RAMP_SLOPE / self.temporal[1]

    def inner_mask(self) -> np.ndarray:
        """Cells whose centers lie in the closed inner box U'."""
        centers = self.grid.cell_centers()
        lo = np.asarray(self.inner_lo)
        hi = np.asarray(self.inner_hi)
        return np.all((centers >= lo) & (centers <= hi), axis=-1)

    def describe(self) -> dict:
        out = {"margin": self.margin, "inner_lo": list(self.inner_lo), "inner_hi": list(self.inner_hi)}
        if self.temporal is not None:
            out["T0"], out["t0"] = self.temporal
        return out


def build_cutoff(grid: Grid, margin: float, temporal: Optional[Tuple[float, float]] = None,
                 T: Optional[float] = None) -> Cutoff:
    """Cut-off on the grid's box; with ``T`` given the temporal ramp must end before it."""
    if temporal is not None and T is not None and not temporal[0] < T:
        raise PreconditionError(f"T0={temporal[0]} must lie before the final time T={T}")
    if not math.isfinite(margin):
        raise PreconditionError("cutoff margin must be finite")
    return Cutoff(grid=grid, margin=float(margin),
                  temporal=None if temporal is None else (float(temporal[0]), float(temporal[1])))
