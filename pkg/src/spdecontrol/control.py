"""Actuator parameterization and the importance-weighted control update.

The control field is U(t)(x) = sum_l m_l(x) u_l(t) with fixed Gaussian
design functions m_l. Sampled noise projects onto the actuators through
P[l, s] = <m_l, sqrt(lambda_s) e_s>, giving the per-step exploration signal
delta-u = P dbeta. Rollout costs are corrected by the control-path term
zeta, exponentiated into Gibbs weights, and averaged into the update

    u_next[j] = u_prev[j] + (1 / (sqrt(rho) dt)) M^{-1} sum_r w_r delta_u[r, j]

where M is the actuator Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import AllRolloutsFailedError, DegenerateActuatorsError
from .grid import Grid, trapezoid_weights
from .noise import NoiseModel

if TYPE_CHECKING:
    from .sim import Trajectory

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class ActuatorSet:
    """N Gaussian actuators sampled on a grid, with Gram matrix and projections."""

    grid: Grid
    mus: FloatArray
    sigmas: FloatArray
    shapes: FloatArray = field(repr=False)  # (N, J+1)
    gram: FloatArray = field(repr=False)  # (N, N)
    gram_factor: tuple = field(repr=False)  # cho_factor output
    projections: FloatArray = field(repr=False)  # (N, R_modes)
    jitter: float = 0.0

    @property
    def num_actuators(self) -> int:
        return self.shapes.shape[0]

    def gram_solve(self, rhs: FloatArray) -> FloatArray:
        """Solve M x = rhs (rhs may carry extra trailing columns)."""
        return cho_solve(self.gram_factor, rhs)


def build_actuators(
    mus: Sequence[float],
    sigmas: Sequence[float],
    grid: Grid,
    noise: NoiseModel,
    max_jitter_scale: float = 1e-6,
) -> ActuatorSet:
    """Sample actuator profiles m_l(x) = exp(-(x - mu_l)^2 / (2 sigma_l^2)).

    The Gram matrix M[i, j] = <m_i, m_j> is Cholesky-factorized once. If the
    factorization fails (overlapping actuators), a diagonal jitter starting
    at 1e-12 * trace(M)/N escalates tenfold up to ``max_jitter_scale`` *
    trace(M)/N before giving up. ``max_jitter_scale=0`` disables jitter.

    Raises:
        DegenerateActuatorsError: Factorization failed at maximum jitter.
    """
    mus = np.asarray(mus, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if mus.ndim != 1 or mus.size < 1:
        raise ValueError("need at least one actuator center")
    if sigmas.shape != mus.shape:
        raise ValueError("mus and sigmas must have matching lengths")
    if np.any(sigmas <= 0):
        raise ValueError("actuator widths must be positive")
    if np.any((mus < grid.a) | (mus > grid.b)):
        raise ValueError("actuator centers must lie inside the domain")

    x = grid.nodes
    shapes = np.exp(-((x[None, :] - mus[:, None]) ** 2) / (2.0 * sigmas[:, None] ** 2))

    w = trapezoid_weights(grid)
    gram = (shapes * w) @ shapes.T
    gram = 0.5 * (gram + gram.T)  # symmetric by construction, keep it exact

    factor, jitter = _factor_with_jitter(gram, max_jitter_scale)

    # P[l, s] = <m_l, sqrt(lambda_s) e_s> under the trapezoid product.
    projections = ((shapes * w) @ noise.shapes.T) * np.sqrt(noise.eigenvalues)[None, :]

    return ActuatorSet(
        grid=grid,
        mus=mus,
        sigmas=sigmas,
        shapes=shapes,
        gram=gram,
        gram_factor=factor,
        projections=projections,
        jitter=jitter,
    )


def _factor_with_jitter(gram: FloatArray, max_jitter_scale: float):
    n = gram.shape[0]
    base = np.trace(gram) / n
    try:
        return cho_factor(gram, lower=True), 0.0
    except LinAlgError:
        pass
    scale = 1e-12
    while scale <= max_jitter_scale:
        jitter = scale * base
        try:
            return cho_factor(gram + jitter * np.eye(n), lower=True), jitter
        except LinAlgError:
            scale *= 10.0
    raise DegenerateActuatorsError(
        "Gram matrix is not positive definite even at maximum jitter; "
        "actuators are (nearly) linearly dependent"
    )


@dataclass
class ControlSequence:
    """Piecewise-constant control u[i] held on [i*dt, (i+1)*dt)."""

    u: FloatArray  # (L, N)
    dt: float

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.u.ndim != 2:
            raise ValueError("control matrix must be (L, N)")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("control entries must be finite")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def num_steps(self) -> int:
        return self.u.shape[0]

    @property
    def num_actuators(self) -> int:
        return self.u.shape[1]

    def copy(self) -> "ControlSequence":
        return ControlSequence(self.u.copy(), self.dt)


def zero_controls(num_steps: int, num_actuators: int, dt: float) -> ControlSequence:
    return ControlSequence(np.zeros((num_steps, num_actuators)), dt)


@dataclass(frozen=True)
class CostWindow:
    """Indicator window [lo, hi] in domain units with a constant target."""

    lo: float
    hi: float
    target: float


@dataclass
class CostSpec:
    """Quadratic tracking cost kappa * sum (X - desired)^2 over window nodes.

    The sum runs over the L post-step states, or only the terminal state
    when ``terminal_only`` is set. ``desired`` optionally replaces the
    per-window constant targets with a profile function of (x, t).
    """

    kappa: float
    windows: Sequence[CostWindow]
    terminal_only: bool = False
    desired: Callable[[FloatArray, float], FloatArray] | None = None

    def node_indices(self, grid: Grid) -> NDArray[np.int_]:
        mask = np.zeros(grid.num_nodes, dtype=bool)
        for win in self.windows:
            if win.lo > win.hi:
                raise ValueError(f"window has lo > hi: {win}")
            if win.lo < grid.a or win.hi > grid.b:
                raise ValueError(f"window {win} outside the domain ({grid.a}, {grid.b})")
            mask |= (grid.nodes >= win.lo) & (grid.nodes <= win.hi)
        return np.nonzero(mask)[0]

    def targets_at(self, grid: Grid, indices: NDArray[np.int_], t: float) -> FloatArray:
        if self.desired is not None:
            return np.asarray(self.desired(grid.nodes[indices], t), dtype=np.float64)
        out = np.empty(indices.size)
        x = grid.nodes[indices]
        for win in self.windows:
            sel = (x >= win.lo) & (x <= win.hi)
            out[sel] = win.target
        return out


def delta_u(actuators: ActuatorSet, dbeta_row: FloatArray) -> FloatArray:
    """Project one row of noise increments onto the actuators: P @ dbeta."""
    dbeta_row = np.asarray(dbeta_row, dtype=np.float64)
    if dbeta_row.shape != (actuators.projections.shape[1],):
        raise ValueError(
            f"increment row has shape {dbeta_row.shape}, "
            f"expected ({actuators.projections.shape[1]},)"
        )
    return actuators.projections @ dbeta_row


def project_increments(actuators: ActuatorSet, dbeta: FloatArray) -> FloatArray:
    """Batched delta-u: (..., L, S) increments -> (..., L, N) projections."""
    return dbeta @ actuators.projections.T


def zeta(
    controls: ControlSequence,
    deltas: FloatArray,
    gram: FloatArray,
    rho: float,
) -> float:
    """Control-path correction added to the state cost.

    zeta = (1/sqrt(rho)) sum_k u_k . delta_u_k + 1/2 sum_k u_k^T M u_k dt,
    with delta_u rows taken from the increments the rollout consumed.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.shape != controls.u.shape:
        raise ValueError(
            f"deltas shape {deltas.shape} does not match controls {controls.u.shape}"
        )
    cross = float(np.sum(controls.u * deltas))
    quad = control_energy(controls, gram)
    return cross / np.sqrt(rho) + 0.5 * quad


def control_energy(controls: ControlSequence, gram: FloatArray) -> float:
    """sum_k u_k^T M u_k dt, the squared control norm over the horizon."""
    return float(np.einsum("ki,ij,kj->", controls.u, gram, controls.u)) * controls.dt


def state_cost(trajectory: "Trajectory", spec: CostSpec) -> float:
    """kappa-weighted squared tracking error over window nodes and steps."""
    grid = trajectory.grid
    idx = spec.node_indices(grid)
    states = trajectory.states
    dt = trajectory.dt
    if spec.terminal_only:
        steps = [states.shape[0] - 1]
    else:
        steps = range(1, states.shape[0])
    total = 0.0
    for j in steps:
        targets = spec.targets_at(grid, idx, j * dt)
        dev = states[j, idx] - targets
        total += float(np.dot(dev, dev))
    return spec.kappa * total


def importance_weights(costs_tilde: FloatArray, rho: float) -> FloatArray:
    """Gibbs weights w_r = exp(-rho (J~_r - min J~)) / sum_q exp(...).

    Subtracting the minimum before exponentiation is exact (weights are
    shift-invariant) and prevents underflow of exp(-rho J~) at realistic
    cost scales. Non-finite costs get weight exactly zero.

    Raises:
        AllRolloutsFailedError: No cost is finite.
    """
    costs_tilde = np.asarray(costs_tilde, dtype=np.float64)
    finite = np.isfinite(costs_tilde)
    if not np.any(finite):
        raise AllRolloutsFailedError("every rollout cost is non-finite")
    shifted = np.where(finite, costs_tilde - costs_tilde[finite].min(), np.inf)
    w = np.exp(-rho * shifted)
    w[~finite] = 0.0
    return w / w.sum()


@dataclass
class RolloutBatch:
    """Per-rollout costs, corrections, projections, and normalized weights."""

    state_costs: FloatArray  # (R,)
    zetas: FloatArray  # (R,)
    total_costs: FloatArray  # (R,), J~ = J + zeta
    weights: FloatArray  # (R,), nonnegative, sums to 1
    deltas: FloatArray = field(repr=False)  # (R, L, N)
    failed: NDArray[np.bool_] = field(repr=False)  # (R,)
    dt: float = 0.0

    @property
    def num_rollouts(self) -> int:
        return self.state_costs.shape[0]

    @property
    def num_failed(self) -> int:
        return int(self.failed.sum())

    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self.weights**2))


def build_rollout_batch(
    state_costs: FloatArray,
    zetas: FloatArray,
    deltas: FloatArray,
    rho: float,
    dt: float,
) -> RolloutBatch:
    """Assemble J~ = J + zeta and the Gibbs weights for a batch of rollouts."""
    state_costs = np.asarray(state_costs, dtype=np.float64)
    zetas = np.asarray(zetas, dtype=np.float64)
    total = state_costs + zetas
    failed = ~np.isfinite(total)
    weights = importance_weights(total, rho)
    return RolloutBatch(
        state_costs=state_costs,
        zetas=zetas,
        total_costs=total,
        weights=weights,
        deltas=np.asarray(deltas, dtype=np.float64),
        failed=failed,
        dt=float(dt),
    )


def update_controls(
    u_prev: ControlSequence,
    batch: RolloutBatch,
    actuators: ActuatorSet,
    rho: float,
) -> ControlSequence:
    """One iteration of the importance-weighted control update.

    The weighted reduction over rollouts runs in fixed index order so results
    are bit-identical however the rollouts were scheduled.
    """
    if batch.deltas.shape[1:] != u_prev.u.shape:
        raise ValueError(
            f"batch deltas {batch.deltas.shape} do not match controls {u_prev.u.shape}"
        )
    # (L, N) weighted average of per-rollout projections.
    avg = np.einsum("r,rln->ln", batch.weights, batch.deltas)
    correction = actuators.gram_solve(avg.T).T / (np.sqrt(rho) * u_prev.dt)
    return ControlSequence(u_prev.u + correction, u_prev.dt)


def one_shot_optimal_controls(
    batch: RolloutBatch,
    actuators: ActuatorSet,
    rho: float,
) -> ControlSequence:
    """Optimal controls from a zero-control batch (iterative update at u = 0)."""
    num_steps = batch.deltas.shape[1]
    start = zero_controls(num_steps, actuators.num_actuators, batch.dt)
    return update_controls(start, batch, actuators, rho)
