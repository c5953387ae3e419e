"""Semi-implicit time stepping of the controlled semilinear SPDE.

One step advances X by

    X_next = (I - dt eps D2)^{-1} (X + dt (F(X) + U) + (1/sqrt(rho)) dW)

with implicit diffusion (unconditionally stable, so the paper's dt = 0.01
remains usable on fine grids) and explicit reaction, control, and noise.
D2 is the 3-point second-difference operator; Dirichlet boundaries carry
identity rows, Neumann boundaries mirrored off-diagonals (which conserve
the trapezoid integral exactly).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from .errors import NonFiniteStateError
from .grid import BoundaryCondition, Field, Grid, apply_bc_values
from .noise import (
    STREAM_ROLLOUT,
    IncrementTable,
    NoiseModel,
    assemble_noise_values,
    sample_increments,
)

if TYPE_CHECKING:
    from .control import ActuatorSet, ControlSequence, CostSpec

FloatArray = NDArray[np.float64]


class DriftKind(enum.Enum):
    HEAT = "heat"
    NAGUMO = "nagumo"


@dataclass(frozen=True)
class DriftSpec:
    """Reaction term of the SPDE: none (heat) or the bistable Nagumo cubic."""

    kind: DriftKind
    epsilon: float  # diffusion coefficient
    alpha: float = 0.0  # Nagumo threshold, unused for heat

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def reaction(drift: DriftSpec, values: FloatArray) -> FloatArray:
    """Pointwise reaction: zero for heat, u(1-u)(u-alpha) for Nagumo."""
    if drift.kind is DriftKind.HEAT:
        return np.zeros_like(values)
    return values * (1.0 - values) * (values - drift.alpha)


class DiffusionSolver:
    """LU factorization of (I - dt eps D2), reused for every step."""

    def __init__(self, grid: Grid, epsilon: float, dt: float):
        if epsilon <= 0 or dt <= 0:
            raise ValueError("epsilon and dt must be positive")
        self.grid = grid
        self.epsilon = epsilon
        self.dt = dt
        n = grid.num_nodes
        c = dt * epsilon / grid.dx**2
        main = np.full(n, 1.0 + 2.0 * c)
        lower = np.full(n - 1, -c)
        upper = np.full(n - 1, -c)
        if grid.bc is BoundaryCondition.DIRICHLET_ZERO:
            main[0] = main[-1] = 1.0
            upper[0] = 0.0
            lower[-1] = 0.0
        else:
            # Mirrored ghost nodes: row sums stay 1, trapezoid-weighted
            # column sums stay 1, so pure diffusion conserves mass exactly.
            upper[0] = -2.0 * c
            lower[-1] = -2.0 * c
        matrix = sp.diags_array([lower, main, upper], offsets=(-1, 0, 1), format="csc")
        self._lu = splu(matrix)

    def solve(self, values: FloatArray) -> FloatArray:
        """Apply (I - dt eps D2)^{-1} along the last axis."""
        if values.ndim == 1:
            return self._lu.solve(values)
        flat = values.reshape(-1, values.shape[-1])
        return self._lu.solve(flat.T).T.reshape(values.shape)


def laplacian_solver(grid: Grid, epsilon: float, dt: float) -> DiffusionSolver:
    """Build and factorize the implicit diffusion system once."""
    return DiffusionSolver(grid, epsilon, dt)


@dataclass
class SimConfig:
    """Everything needed to advance the SPDE over one horizon."""

    grid: Grid
    drift: DriftSpec
    noise: NoiseModel
    rho: float  # noise scaling 1/sqrt(rho) and Gibbs inverse temperature
    dt: float
    num_steps: int  # L
    initial_condition: Field

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.num_steps < 0:
            raise ValueError("num_steps must be nonnegative")
        self._solver: DiffusionSolver | None = None

    def solver(self) -> DiffusionSolver:
        if self._solver is None or self._solver.dt != self.dt:
            self._solver = laplacian_solver(self.grid, self.drift.epsilon, self.dt)
        return self._solver


def control_field(actuators: "ActuatorSet", u_row: FloatArray) -> Field:
    """Control profile U(x) = sum_l m_l(x) u_l at one time step."""
    u_row = np.asarray(u_row, dtype=np.float64)
    if u_row.shape != (actuators.num_actuators,):
        raise ValueError(
            f"control row has shape {u_row.shape}, expected ({actuators.num_actuators},)"
        )
    return Field(actuators.grid, u_row @ actuators.shapes)


def step_values(
    values: FloatArray,
    config: SimConfig,
    solver: DiffusionSolver,
    drive: FloatArray,
) -> FloatArray:
    """Advance state values one step given the combined explicit drive.

    ``drive`` is dt * control plus (1/sqrt(rho)) * dW; the reaction term is
    evaluated here from the current state.
    """
    rhs = values + config.dt * reaction(config.drift, values) + drive
    out = solver.solve(rhs)
    if config.grid.bc is BoundaryCondition.DIRICHLET_ZERO:
        apply_bc_values(out, config.grid.bc)
    return out


def step(
    state: Field,
    config: SimConfig,
    actuators: "ActuatorSet | None",
    u_row: FloatArray | None,
    dW: Field,
) -> Field:
    """One semi-implicit step of the controlled SPDE.

    Raises:
        NonFiniteStateError: The step produced NaN or Inf values.
    """
    if u_row is None or actuators is None:
        ctrl = 0.0
    else:
        ctrl = config.dt * control_field(actuators, u_row).values
    drive = ctrl + dW.values / np.sqrt(config.rho)
    out = step_values(state.values, config, config.solver(), drive)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError(0, "single step")
    return Field(config.grid, out)


@dataclass
class Trajectory:
    """States X(t_0)..X(t_L) of one rollout plus the increments that drove it."""

    grid: Grid
    states: FloatArray = field(repr=False)  # (L+1, J+1)
    increments: IncrementTable
    dt: float

    @property
    def num_steps(self) -> int:
        return self.states.shape[0] - 1


def rollout(
    config: SimConfig,
    actuators: "ActuatorSet | None",
    controls: "ControlSequence | None",
    seed: int,
    rollout_index: int,
    stream: int = STREAM_ROLLOUT,
    deterministic: bool = False,
) -> Trajectory:
    """Simulate one full horizon, retaining states and noise increments.

    ``deterministic`` replaces the Brownian increments with zeros (the
    rho -> infinity limit) without consuming any randomness.

    Raises:
        NonFiniteStateError: The state blew up mid-horizon.
    """
    L = config.num_steps
    if controls is not None and controls.num_steps != L:
        raise ValueError(f"controls have {controls.num_steps} rows, horizon has {L}")
    if deterministic:
        table = IncrementTable(
            dbeta=np.zeros((L, config.noise.num_modes)),
            dt=config.dt,
            seed=int(seed),
            rollout_index=int(rollout_index),
            stream=stream,
        )
    else:
        table = sample_increments(seed, rollout_index, L, config.noise, config.dt, stream)

    solver = config.solver()
    sqrt_rho = np.sqrt(config.rho)
    states = np.empty((L + 1, config.grid.num_nodes))
    states[0] = config.initial_condition.values
    x = states[0].copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(L):
            if controls is None or actuators is None:
                ctrl = 0.0
            else:
                ctrl = config.dt * (controls.u[j] @ actuators.shapes)
            dw = assemble_noise_values(config.noise, table.dbeta[j])
            x = step_values(x, config, solver, ctrl + dw / sqrt_rho)
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(j, f"rollout {rollout_index}")
            states[j + 1] = x
    return Trajectory(grid=config.grid, states=states, increments=table, dt=config.dt)


@dataclass
class BatchRollouts:
    """Vectorized rollout results: costs, projections, and final profiles."""

    state_costs: FloatArray  # (R,), +inf where the rollout blew up
    deltas: FloatArray = field(repr=False)  # (R, L, N) or (R, L, 0)
    failed: NDArray[np.bool_] = field(repr=False)
    final_values: FloatArray = field(repr=False)  # (R, J+1)
    states: FloatArray | None = field(default=None, repr=False)  # (R, L+1, J+1)

    @property
    def num_rollouts(self) -> int:
        return self.state_costs.shape[0]


def simulate_batch(
    config: SimConfig,
    actuators: "ActuatorSet | None",
    controls: "ControlSequence | None",
    cost_spec: "CostSpec | None",
    seed: int,
    indices: NDArray[np.int_],
    stream: int = STREAM_ROLLOUT,
    keep_states: bool = False,
    executor=None,
    chunk_size: int = 64,
) -> BatchRollouts:
    """Roll out many trajectories of the same horizon in fixed-size chunks.

    Each rollout draws its own Philox stream keyed by (seed, stream,
    index), so the result is independent of chunking and of the executor's
    scheduling; chunks exist only to bound memory and to give ``executor``
    (a concurrent.futures pool) units of work. Results are written into
    preallocated arrays by position.
    """
    indices = np.asarray(indices, dtype=np.int64)
    R = indices.size
    L = config.num_steps
    n = config.grid.num_nodes
    num_act = actuators.num_actuators if actuators is not None else 0

    costs = np.zeros(R)
    deltas = np.zeros((R, L, num_act))
    failed = np.zeros(R, dtype=bool)
    final_values = np.zeros((R, n))
    states = np.zeros((R, L + 1, n)) if keep_states else None

    chunks = [(lo, min(lo + chunk_size, R)) for lo in range(0, R, chunk_size)]

    def run_chunk(bounds):
        lo, hi = bounds
        out = _simulate_chunk(
            config, actuators, controls, cost_spec, seed, indices[lo:hi], stream, keep_states
        )
        costs[lo:hi] = out[0]
        deltas[lo:hi] = out[1]
        failed[lo:hi] = out[2]
        final_values[lo:hi] = out[3]
        if keep_states:
            states[lo:hi] = out[4]

    if executor is None:
        for bounds in chunks:
            run_chunk(bounds)
    else:
        list(executor.map(run_chunk, chunks))

    return BatchRollouts(
        state_costs=costs,
        deltas=deltas,
        failed=failed,
        final_values=final_values,
        states=states,
    )


def _simulate_chunk(config, actuators, controls, cost_spec, seed, indices, stream, keep_states):
    R = indices.size
    L = config.num_steps
    n = config.grid.num_nodes
    solver = config.solver()
    sqrt_rho = np.sqrt(config.rho)
    noise = config.noise

    dbeta = np.empty((R, L, noise.num_modes))
    for i, idx in enumerate(indices):
        dbeta[i] = sample_increments(seed, int(idx), L, noise, config.dt, stream).dbeta

    if actuators is not None:
        proj = dbeta @ actuators.projections.T  # (R, L, N)
        if controls is not None:
            ctrl_profiles = config.dt * (controls.u @ actuators.shapes)  # (L, n)
        else:
            ctrl_profiles = None
    else:
        proj = np.zeros((R, L, 0))
        ctrl_profiles = None

    if cost_spec is not None:
        win_idx = cost_spec.node_indices(config.grid)
    costs = np.zeros(R)
    alive = np.ones(R, dtype=bool)
    x = np.tile(config.initial_condition.values, (R, 1))
    states = np.empty((R, L + 1, n)) if keep_states else None
    if keep_states:
        states[:, 0] = x

    scale = np.sqrt(noise.eigenvalues)
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(L):
            dw = apply_bc_values((dbeta[:, j, :] * scale) @ noise.shapes, config.grid.bc)
            drive = dw / sqrt_rho
            if ctrl_profiles is not None:
                drive = drive + ctrl_profiles[j]
            x = step_values(x, config, solver, drive)
            bad = ~np.all(np.isfinite(x), axis=1)
            if bad.any():
                alive &= ~bad
                x[bad] = 0.0  # frozen; cost forced to +inf below
            if keep_states:
                states[:, j + 1] = x
            if cost_spec is not None and not cost_spec.terminal_only:
                tgt = cost_spec.targets_at(config.grid, win_idx, (j + 1) * config.dt)
                dev = x[:, win_idx] - tgt
                costs += np.einsum("ri,ri->r", dev, dev)

    if cost_spec is not None:
        if cost_spec.terminal_only:
            tgt = cost_spec.targets_at(config.grid, win_idx, L * config.dt)
            dev = x[:, win_idx] - tgt
            costs = np.einsum("ri,ri->r", dev, dev)
        costs *= cost_spec.kappa
    costs[~alive] = np.inf
    return costs, proj, ~alive, x, states
