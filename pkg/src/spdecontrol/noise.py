"""Truncated Karhunen-Loeve representation of the (Q-)Wiener process.

The driving noise is expanded over the Laplacian eigenbasis of the domain,
W(t) = sum_s sqrt(lambda_s) beta_s(t) e_s, truncated at R_modes. Cylindrical
(space-time white) noise sets every eigenvalue to one. Brownian increments
are drawn from counter-based Philox streams keyed by (master seed, stream
tag, stream index) so that rollouts are independent, reproducible, and
insensitive to scheduling order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import TruncationTooLargeError
from .grid import BoundaryCondition, Field, Grid, apply_bc_values

FloatArray = NDArray[np.float64]

# Stream tags keep noise consumed by different roles disjoint.
STREAM_ROLLOUT = 0
STREAM_PLANT = 1
STREAM_EVAL = 2
STREAM_VERIFY = 3

_MASK64 = (1 << 64) - 1
_INDEX_BITS = 56


class NoiseKind(enum.Enum):
    CYLINDRICAL = "cylindrical"
    DIAGONAL = "diagonal"


@dataclass(frozen=True)
class NoiseModel:
    """Truncated eigenbasis {(lambda_s, e_s)} sampled on a grid.

    ``shapes[s]`` holds e_{s+1} at every node; eigenfunctions are discretely
    orthonormal under the trapezoid inner product.
    """

    grid: Grid
    eigenvalues: FloatArray = field(repr=False)
    shapes: FloatArray = field(repr=False)  # (R_modes, J+1)
    kind: NoiseKind

    @property
    def num_modes(self) -> int:
        return self.shapes.shape[0]


def build_eigenbasis(
    grid: Grid,
    num_modes: int,
    kind: NoiseKind = NoiseKind.CYLINDRICAL,
    eigenvalues: FloatArray | None = None,
) -> NoiseModel:
    """Sample the first ``num_modes`` Laplacian eigenfunctions of the domain.

    DirichletZero uses the sine basis, NeumannZero the constant-plus-cosine
    basis. Modes beyond J-1 alias on the grid and are rejected.
    """
    if num_modes < 1:
        raise ValueError("need at least one mode")
    if num_modes > grid.num_cells - 1:
        raise TruncationTooLargeError(
            f"{num_modes} modes alias on a grid with {grid.num_cells} cells"
        )
    length = grid.length()
    xi = (grid.nodes - grid.a) / length  # normalized coordinate in [0, 1]
    shapes = np.empty((num_modes, grid.num_nodes))
    if grid.bc is BoundaryCondition.DIRICHLET_ZERO:
        amp = np.sqrt(2.0 / length)
        for s in range(1, num_modes + 1):
            shapes[s - 1] = amp * np.sin(s * np.pi * xi)
    else:
        shapes[0] = 1.0 / np.sqrt(length)
        amp = np.sqrt(2.0 / length)
        for s in range(2, num_modes + 1):
            shapes[s - 1] = amp * np.cos((s - 1) * np.pi * xi)

    kind = NoiseKind(kind)
    if kind is NoiseKind.CYLINDRICAL:
        if eigenvalues is not None:
            raise ValueError("cylindrical noise fixes all eigenvalues to 1")
        lam = np.ones(num_modes)
    else:
        if eigenvalues is None:
            raise ValueError("diagonal noise requires explicit eigenvalues")
        lam = np.asarray(eigenvalues, dtype=np.float64)
        if lam.shape != (num_modes,):
            raise ValueError(f"need {num_modes} eigenvalues, got shape {lam.shape}")
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be nonnegative")
    return NoiseModel(grid=grid, eigenvalues=lam, shapes=shapes, kind=kind)


@dataclass(frozen=True)
class IncrementTable:
    """Brownian increments dbeta[j, s] ~ N(0, dt) for one rollout.

    The (seed, stream, index) triple identifies the Philox stream that
    produced the table; the same triple and shape always reproduce it.
    """

    dbeta: FloatArray = field(repr=False)  # (L, R_modes)
    dt: float
    seed: int
    rollout_index: int
    stream: int = STREAM_ROLLOUT

    @property
    def num_steps(self) -> int:
        return self.dbeta.shape[0]


def stream_generator(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for one (seed, stream tag, index) triple.

    Distinct keys give statistically independent Philox streams, so draws
    do not depend on the order rollouts are executed in.
    """
    if index < 0 or index >= (1 << _INDEX_BITS):
        raise ValueError(f"stream index out of range: {index}")
    key = np.array(
        [seed & _MASK64, ((stream & 0xFF) << _INDEX_BITS) | index],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def sample_increments(
    seed: int,
    rollout_index: int,
    num_steps: int,
    model: NoiseModel,
    dt: float,
    stream: int = STREAM_ROLLOUT,
) -> IncrementTable:
    """Draw the (L x R_modes) increment table for one rollout."""
    if num_steps < 0:
        raise ValueError("num_steps must be nonnegative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = stream_generator(seed, stream, rollout_index)
    dbeta = rng.normal(0.0, np.sqrt(dt), size=(num_steps, model.num_modes))
    return IncrementTable(
        dbeta=dbeta, dt=float(dt), seed=int(seed), rollout_index=int(rollout_index), stream=stream
    )


def assemble_noise_values(model: NoiseModel, dbeta_rows: FloatArray) -> FloatArray:
    """Batched noise-field assembly: rows of increments -> fields (last axis nodes)."""
    dbeta_rows = np.asarray(dbeta_rows, dtype=np.float64)
    if dbeta_rows.shape[-1] != model.num_modes:
        raise ValueError(
            f"increment row has {dbeta_rows.shape[-1]} entries, model has {model.num_modes} modes"
        )
    values = (dbeta_rows * np.sqrt(model.eigenvalues)) @ model.shapes
    return apply_bc_values(values, model.grid.bc)


def assemble_noise_field(model: NoiseModel, dbeta_row: FloatArray) -> Field:
    """Field dW = sum_s sqrt(lambda_s) e_s dbeta_s, boundary closure applied."""
    dbeta_row = np.asarray(dbeta_row, dtype=np.float64)
    if dbeta_row.shape != (model.num_modes,):
        raise ValueError(
            f"increment row has shape {dbeta_row.shape}, expected ({model.num_modes},)"
        )
    return Field(model.grid, assemble_noise_values(model, dbeta_row))
