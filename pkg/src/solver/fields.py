"""
Analytic space-time fields used as initial data, boundary extensions and exact solutions.

Every field evaluates on points of shape (..., 3) at a scalar time and supplies its
gradient, Hessian and time derivative in closed form.
"""
import math
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from src.grid.mesh import Grid
from src.utils.errors import PreconditionError


class AnalyticField:
    """Base class; subclasses implement the four evaluations."""

    name = "field"

    def value(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def time_derivative(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError

    def trace_at(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        """The Dirichlet trace x -> value(x, t)."""
        return lambda x: self.value(x, t)

    def __sub__(self, other: "AnalyticField") -> "AnalyticField":
        return DifferenceField(self, other)


class ConstantField(AnalyticField):
    name = "constant"

    def __init__(self, c: float):
        self.c = float(c)

    def value(self, x, t):
        return np.full(np.shape(x)[:-1], self.c)

    def gradient(self, x, t):
        return np.zeros(np.shape(x))

    def hessian(self, x, t):
        return np.zeros(np.shape(x) + (3,))

    def time_derivative(self, x, t):
        return np.zeros(np.shape(x)[:-1])


class LinearField(AnalyticField):
    """c + slope . x"""

    name = "linear"

    def __init__(self, c: float, slope: Sequence[float]):
        self.c = float(c)
        self.slope = np.asarray(slope, dtype=float)

    def value(self, x, t):
        return self.c + np.asarray(x) @ self.slope

    def gradient(self, x, t):
        return np.broadcast_to(self.slope, np.shape(x)).copy()

    def hessian(self, x, t):
        return np.zeros(np.shape(x) + (3,))

    def time_derivative(self, x, t):
        return np.zeros(np.shape(x)[:-1])


class SineProductField(AnalyticField):
    """offset + amplitude * exp(-decay t) * prod over axes of sin(pi (x_d - lo_d) / L_d)."""

    name = "sine-product"

    def __init__(self, offset: float, amplitude: float, axes: Sequence[int],
                 lo: Sequence[float] = (0.0, 0.0, 0.0), length: Sequence[float] = (1.0, 1.0, 1.0),
                 decay: float = 0.0):
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.axes = tuple(axes)
        self.lo = np.asarray(lo, dtype=float)
        self.k = math.pi / np.asarray(length, dtype=float)
        self.decay = float(decay)

    def _factors(self, x):
        arg = (np.asarray(x) - self.lo) * self.k
        return np.sin(arg), np.cos(arg)

    def _time(self, t):
        return self.amplitude * math.exp(-self.decay * t)

    def value(self, x, t):
        s, _ = self._factors(x)
        prod = np.ones(np.shape(x)[:-1])
        for d in self.axes:
            prod = prod * s[..., d]
        return self.offset + self._time(t) * prod

    def gradient(self, x, t):
        s, c = self._factors(x)
        out = np.zeros(np.shape(x))
        for d in self.axes:
            term = self.k[d] * c[..., d]
            for e in self.axes:
                if e != d:
                    term = term * s[..., e]
            out[..., d] = term
        return self._time(t) * out

    def hessian(self, x, t):
        s, c = self._factors(x)
        out = np.zeros(np.shape(x) + (3,))
        for i in self.axes:
            for j in self.axes:
                term = np.ones(np.shape(x)[:-1])
                for e in self.axes:
                    if e == i and e == j:
                        term = term * (-self.k[e] ** 2) * s[..., e]
                    elif e == i or e == j:
                        term = term * self.k[e] * c[..., e]
                    else:
                        term = term * s[..., e]
                out[..., i, j] = term
        return self._time(t) * out

    def time_derivative(self, x, t):
        return -self.decay * (self.value(x, t) - self.offset)


class QuadraticRampField(AnalyticField):
    """offset + amplitude * t * xi (1 - xi) with xi = (x_1 - lo_1) / L_1."""

    name = "quadratic-ramp"

    def __init__(self, offset: float, amplitude: float, lo: float = 0.0, length: float = 1.0):
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.lo = float(lo)
        self.length = float(length)

    def _xi(self, x):
        return (np.asarray(x)[..., 0] - self.lo) / self.length

    def value(self, x, t):
        xi = self._xi(x)
        return self.offset + self.amplitude * t * xi * (1.0 - xi)

    def gradient(self, x, t):
        out = np.zeros(np.shape(x))
        out[..., 0] = self.amplitude * t * (1.0 - 2.0 * self._xi(x)) / self.length
        return out

    def hessian(self, x, t):
        out = np.zeros(np.shape(x) + (3,))
        out[..., 0, 0] = -2.0 * self.amplitude * t / self.length ** 2
        return out

    def time_derivative(self, x, t):
        xi = self._xi(x)
        return self.amplitude * xi * (1.0 - xi)


class TidalField(AnalyticField):
    """offset + amplitude * xi * (1 + sin(2 pi t)) / 2: boundary data that rises and falls in time."""

    name = "tidal"

    def __init__(self, offset: float, amplitude: float, lo: float = 0.0, length: float = 1.0):
        self.offset = float(offset)
        self.amplitude = float(amplitude)
        self.lo = float(lo)
        self.length = float(length)

    def _xi(self, x):
        return (np.asarray(x)[..., 0] - self.lo) / self.length

    def _phase(self, t):
        return 0.5 * (1.0 + math.sin(2.0 * math.pi * t))

    def value(self, x, t):
        return self.offset + self.amplitude * self._xi(x) * self._phase(t)

    def gradient(self, x, t):
        out = np.zeros(np.shape(x))
        out[..., 0] = self.amplitude * self._phase(t) / self.length
        return out

    def hessian(self, x, t):
        return np.zeros(np.shape(x) + (3,))

    def time_derivative(self, x, t):
        return self.amplitude * self._xi(x) * math.pi * math.cos(2.0 * math.pi * t)


class DifferenceField(AnalyticField):
    name = "difference"

    def __init__(self, first: AnalyticField, second: AnalyticField):
        self.first = first
        self.second = second

    def value(self, x, t):
        return self.first.value(x, t) - self.second.value(x, t)

    def gradient(self, x, t):
        return self.first.gradient(x, t) - self.second.gradient(x, t)

    def hessian(self, x, t):
        return self.first.hessian(x, t) - self.second.hessian(x, t)

    def time_derivative(self, x, t):
        return self.first.time_derivative(x, t) - self.second.time_derivative(x, t)


def _box(grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(grid.lo)
    return lo, np.asarray(grid.hi) - lo


def _constant(grid, offset, amplitude):
    return ConstantField(offset)


def _linear_x1(grid, offset, amplitude):
    lo, length = _box(grid)
    return LinearField(offset - amplitude * lo[0] / length[0], (amplitude / length[0], 0.0, 0.0))


def _sine_x1(grid, offset, amplitude):
    lo, length = _box(grid)
    return SineProductField(offset, amplitude, axes=(0,), lo=lo, length=length)


def _sine_bump(grid, offset, amplitude):
    lo, length = _box(grid)
    return SineProductField(offset, amplitude, axes=(0, 1, 2), lo=lo, length=length)


def _tidal(grid, offset, amplitude):
    lo, length = _box(grid)
    return TidalField(offset, amplitude, lo=lo[0], length=length[0])


def _mms_quadratic(grid, offset, amplitude):
    lo, length = _box(grid)
    return QuadraticRampField(offset, amplitude, lo=lo[0], length=length[0])


def _mms_trig(grid, offset, amplitude):
    lo, length = _box(grid)
    return SineProductField(offset, amplitude, axes=(0, 1), lo=lo, length=length, decay=1.0)

FIELD_PRESETS: Dict[str, Callable[[Grid, float, float], AnalyticField]] = {
    "constant": _constant,
    "linear-x1": _linear_x1,
    "sine-x1": _sine_x1,
    "sine-bump": _sine_bump,
    "tidal": _tidal,
    "mms-quadratic": _mms_quadratic,
    "mms-trig": _mms_trig,
}


def build_field(preset: str, grid: Grid, offset: float = 0.0, amplitude: float = 1.0) -> AnalyticField:
    """Instantiate a named preset scaled to the grid's box."""
    try:
        factory = FIELD_PRESETS[preset]
    except KeyError:
        raise PreconditionError(f"unknown field preset '{preset}', expected one of {sorted(FIELD_PRESETS)}")
    field = factory(grid, float(offset), float(amplitude))
    field.name = preset
    return field
