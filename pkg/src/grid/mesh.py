"""
Uniform cell-centered Cartesian grid over a box, field containers and the discrete
gradient / divergence pair.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from src.utils.errors import DomainError

logger = logging.getLogger(__name__)

MIN_CELLS = 4

# A boundary trace: maps points of shape (..., 3) to values of shape (...)
Trace = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Box [lo, hi] split into n[0] x n[1] x n[2] equal cells."""
    lo: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    hi: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    n: Tuple[int, int, int] = (8, 8, 8)
    dx: Tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        n = tuple(int(v) for v in self.n)
        if len(lo) != 3 or len(hi) != 3 or len(n) != 3:
            raise ValueError("grid bounds and cell counts must have three entries")
        if any(c < MIN_CELLS for c in n):
            raise ValueError(f"each axis needs at least {MIN_CELLS} cells, got {n}")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("grid bounds must be finite")
        dx = tuple((h - l) / c for l, h, c in zip(lo, hi, n))
        if any(d <= 0 for d in dx):
            raise ValueError(f"grid box must have hi > lo on every axis, got lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "dx", dx)

    @classmethod
    def cube(cls, n: int, lo: float = 0.0, hi: float = 1.0) -> "Grid":
        return cls(lo=(lo,) * 3, hi=(hi,) * 3, n=(n,) * 3)

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(lo=self.lo, hi=self.hi, n=tuple(c * factor for c in self.n))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.n

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def min_dx(self) -> float:
        return min(self.dx)

    @property
    def max_dx(self) -> float:
        return max(self.dx)

    def axis_centers(self, d: int) -> np.ndarray:
        return self.lo[d] + (np.arange(self.n[d]) + 0.5) * self.dx[d]

    def axis_faces(self, d: int) -> np.ndarray:
        return self.lo[d] + np.arange(self.n[d] + 1) * self.dx[d]

    def cell_centers(self) -> np.ndarray:
        """Cell centers, shape n + (3,)."""
        axes = [self.axis_centers(d) for d in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def face_centers(self, d: int) -> np.ndarray:
        """Centers of the faces normal to axis d; n_d + 1 faces along d."""
        axes = [self.axis_faces(e) if e == d else self.axis_centers(e) for e in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def corners(self) -> np.ndarray:
        return np.array([[x, y, z] for x in (self.lo[0], self.hi[0])
                         for y in (self.lo[1], self.hi[1])
                         for z in (self.lo[2], self.hi[2])])

    def face_shape(self, d: int) -> Tuple[int, int, int]:
        shape = list(self.n)
        shape[d] += 1
        return tuple(shape)

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint rule over the box for cell values of shape n (or n + trailing)."""
        return float(np.sum(values) * self.cell_volume)


def _check(grid: Grid, values: np.ndarray, trailing: Tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != tuple(grid.n) + trailing:
        raise DomainError(f"{name} has shape {arr.shape}, expected {tuple(grid.n) + trailing}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _check(self.grid, self.values, (), "scalar field")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_function(cls, grid: Grid, fn: Trace) -> "ScalarField":
        return cls(grid, np.asarray(fn(grid.cell_centers()), dtype=float))

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.integrate(self.values ** 2)))


@dataclass(frozen=True)
class VecField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _check(self.grid, self.values, (3,), "vector field")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.einsum("...i,...i->...", self.values, self.values))


@dataclass(frozen=True)
class FaceFlux:
    """Normal flux q_d on the faces normal to each axis d."""
    grid: Grid
    q: Tuple[np.ndarray, np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.q) != 3:
            raise DomainError("face flux needs one array per axis")
        arrays = []
        for d, arr in enumerate(self.q):
            arr = np.asarray(arr, dtype=float)
            if arr.shape != self.grid.face_shape(d):
                raise DomainError(f"flux on axis {d} has shape {arr.shape}, "
                                  f"expected {self.grid.face_shape(d)}")
            arrays.append(arr)
        object.__setattr__(self, "q", tuple(arrays))

    @classmethod
    def zeros(cls, grid: Grid) -> "FaceFlux":
        return cls(grid, tuple(np.zeros(grid.face_shape(d)) for d in range(3)))

    def boundary_inflow(self) -> float:
        """Sum over boundary faces of the flux entering the box, times face area."""
        total = 0.0
        for d in range(3):
            area = self.grid.cell_volume / self.grid.dx[d]
            qd = np.moveaxis(self.q[d], d, 0)
            total += area * (float(np.sum(qd[-1])) - float(np.sum(qd[0])))
        return total

    def boundary_magnitude(self) -> float:
        """Sum over boundary faces of |q| times face area."""
        total = 0.0
        for d in range(3):
            area = self.grid.cell_volume / self.grid.dx[d]
            qd = np.moveaxis(self.q[d], d, 0)
            total += area * (float(np.sum(np.abs(qd[0]))) + float(np.sum(np.abs(qd[-1]))))
        return total


def field_values(u, grid: Grid) -> np.ndarray:
    if isinstance(u, ScalarField):
        if u.grid != grid:
            raise DomainError("field belongs to a different grid")
        return u.values
    return _check(grid, u, (), "scalar field")


def boundary_values(grid: Grid, trace: Trace, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """Trace values at the low and high boundary faces normal to axis d."""
    faces = np.moveaxis(grid.face_centers(d), d, 0)
    return np.asarray(trace(faces[0]), dtype=float), np.asarray(trace(faces[-1]), dtype=float)


def face_gradient(grid: Grid, u, trace: Trace) -> FaceFlux:
    """Normal difference of u on every face; boundary faces use the Dirichlet trace at dx/2."""
    vals = field_values(u, grid)
    q = []
    for d in range(3):
        h = grid.dx[d]
        low, high = boundary_values(grid, trace, d)
        moved = np.moveaxis(vals, d, 0)
        inner = np.diff(moved, axis=0) / h
        first = (moved[0] - low) / (0.5 * h)
        last = (high - moved[-1]) / (0.5 * h)
        q.append(np.moveaxis(np.concatenate([first[None], inner, last[None]], axis=0), 0, d))
    return FaceFlux(grid, tuple(q))


def _one_sided(f_minus, f0, f_plus, h_back: float, h_ahead: float):
    """Three-point first derivative on a nonuniform stencil, in difference form."""
    w_back = h_ahead / (h_back * (h_back + h_ahead))
    w_ahead = h_back / (h_ahead * (h_back + h_ahead))
    return w_back * (f0 - f_minus) + w_ahead * (f_plus - f0)


def gradient(grid: Grid, u, trace: Optional[Trace] = None) -> VecField:
    """Cell-centered gradient.

    Interior cells use central differences. With a Dirichlet ``trace`` the boundary cells
    use the trace at distance dx/2; without one, second-order one-sided differences.
    """
    vals = field_values(u, grid)
    if trace is None:
        comps = np.gradient(vals, *grid.dx, edge_order=2)
        return VecField(grid, np.stack(comps, axis=-1))

    comps = []
    for d in range(3):
        h = grid.dx[d]
        low, high = boundary_values(grid, trace, d)
        m = np.moveaxis(vals, d, 0)
        out = np.empty_like(m)
        out[1:-1] = (m[2:] - m[:-2]) / (2.0 * h)
        out[0] = _one_sided(low, m[0], m[1], 0.5 * h, h)
        out[-1] = _one_sided(m[-2], m[-1], high, h, 0.5 * h)
        comps.append(np.moveaxis(out, 0, d))
    return VecField(grid, np.stack(comps, axis=-1))


def divergence(grid: Grid, q: FaceFlux) -> ScalarField:
    """Sum over axes of (q at high face - q at low face) / dx."""
    if q.grid != grid:
        raise DomainError("flux belongs to a different grid")
    total = np.zeros(grid.n)
    for d in range(3):
        total += np.diff(q.q[d], axis=d) / grid.dx[d]
    return ScalarField(grid, total)


def hessian(grid: Grid, u) -> np.ndarray:
    """Cell-centered second derivatives, shape n + (3, 3).

    Compact central second differences away from the boundary layer, repeated
    second-order differentiation next to it.
    """
    vals = field_values(u, grid)
    first = np.gradient(vals, *grid.dx, edge_order=2)
    out = np.empty(tuple(grid.n) + (3, 3))
    for i in range(3):
        second = np.gradient(first[i], *grid.dx, edge_order=2)
        for j in range(3):
            out[..., i, j] = second[j]

    interior = tuple(slice(1, -1) for _ in range(3))
    for d in range(3):
        h = grid.dx[d]
        m = np.moveaxis(vals, d, 0)
        compact = (m[2:] - 2.0 * m[1:-1] + m[:-2]) / h ** 2
        compact = np.moveaxis(compact, 0, d)
        sl = [slice(1, -1)] * 3
        sl[d] = slice(None)
        out[interior + (d, d)] = compact[tuple(sl)]
    sym = 0.5 * (out + np.swapaxes(out, -1, -2))
    return sym


