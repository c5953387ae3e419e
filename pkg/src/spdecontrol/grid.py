"""Uniform 1-D spatial grid, boundary handling, and discrete field arithmetic.

All Hilbert-space inner products in the package are trapezoid-rule sums on
the grid; the rule is exact for products of the sine/cosine eigenbasis on a
uniform grid, which keeps the noise expansion discretely orthonormal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import GridMismatchError, InvalidDomainError, TooCoarseError

FloatArray = NDArray[np.float64]


class BoundaryCondition(enum.Enum):
    DIRICHLET_ZERO = "dirichlet"
    NEUMANN_ZERO = "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform grid of J subintervals on (a, b), nodes x_k = a + k*(b-a)/J."""

    a: float
    b: float
    num_cells: int
    bc: BoundaryCondition
    nodes: FloatArray = field(repr=False)
    dx: float

    @property
    def num_nodes(self) -> int:
        return self.num_cells + 1

    def length(self) -> float:
        return self.b - self.a


def build_grid(a: float, b: float, num_cells: int, bc: BoundaryCondition) -> Grid:
    """Construct a uniform grid.

    Args:
        a, b: Domain endpoints, b > a.
        num_cells: Number of subintervals J, at least 4.
        bc: Boundary condition applied by ``apply_bc`` and the solvers.

    Raises:
        InvalidDomainError: If b <= a.
        TooCoarseError: If J < 4.
    """
    if not b > a:
        raise InvalidDomainError(f"domain must satisfy b > a, got a={a}, b={b}")
    if num_cells < 4:
        raise TooCoarseError(f"need at least 4 subintervals, got {num_cells}")
    bc = BoundaryCondition(bc)
    dx = (b - a) / num_cells
    nodes = a + dx * np.arange(num_cells + 1, dtype=np.float64)
    return Grid(a=float(a), b=float(b), num_cells=int(num_cells), bc=bc, nodes=nodes, dx=dx)


@dataclass
class Field:
    """Scalar state values at every grid node, boundary nodes included."""

    grid: Grid
    values: FloatArray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.num_nodes,):
            raise ValueError(
                f"field needs {self.grid.num_nodes} values, got shape {self.values.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


def zero_field(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.num_nodes))


def apply_bc_values(values: FloatArray, bc: BoundaryCondition) -> FloatArray:
    """Enforce the boundary closure in place along the last axis."""
    if bc is BoundaryCondition.DIRICHLET_ZERO:
        values[..., 0] = 0.0
        values[..., -1] = 0.0
    else:
        # Zero-gradient closure: copy the nearest interior node outward.
        values[..., 0] = values[..., 1]
        values[..., -1] = values[..., -2]
    return values


def apply_bc(f: Field) -> Field:
    """Return a copy of the field with its boundary closure enforced."""
    return Field(f.grid, apply_bc_values(f.values.copy(), f.grid.bc))


def trapezoid_weights(grid: Grid) -> FloatArray:
    w = np.full(grid.num_nodes, grid.dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def inner_product(f: Field, g: Field) -> float:
    """Trapezoid-rule approximation of the L^2 inner product on (a, b)."""
    if f.grid is not g.grid and (
        f.grid.a != g.grid.a
        or f.grid.b != g.grid.b
        or f.grid.num_cells != g.grid.num_cells
    ):
        raise GridMismatchError("fields live on different grids")
    return float(np.dot(trapezoid_weights(f.grid), f.values * g.values))


def inner_product_values(grid: Grid, fv: FloatArray, gv: FloatArray) -> np.ndarray:
    """Batched trapezoid inner product over the last axis."""
    return (fv * gv) @ trapezoid_weights(grid)
