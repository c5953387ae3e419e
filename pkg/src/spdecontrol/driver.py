"""Outer optimization loops: open-loop trajectory optimization and MPC.

Each open-loop iteration samples R rollouts under the current controls,
corrects their state costs by zeta, forms Gibbs weights, and applies the
importance-weighted update. The MPC loop replans with a warm-started
control sequence, applies the first control row to a plant driven by a
held-out noise stream, and shifts the plan one step left.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .control import (
    ActuatorSet,
    ControlSequence,
    CostSpec,
    build_rollout_batch,
    update_controls,
    zero_controls,
)
from .grid import Field
from .noise import STREAM_PLANT, STREAM_ROLLOUT, assemble_noise_field, sample_increments
from .sim import SimConfig, simulate_batch, step

FloatArray = NDArray[np.float64]


@dataclass
class IterationRecord:
    """Per-iteration batch summary."""

    mean_state_cost: float
    mean_total_cost: float
    effective_sample_size: float
    num_failed: int


@dataclass
class OptimRun:
    """Inputs and accumulated results of an open-loop optimization."""

    config: SimConfig
    actuators: ActuatorSet
    cost_spec: CostSpec
    iterations: int
    rollouts: int
    seed: int
    threads: int = 1
    initial_controls: ControlSequence | None = None
    stream_offset: int = 0  # first stream index used by iteration 0
    controls: ControlSequence | None = None
    controls_history: list[ControlSequence] = field(default_factory=list)
    history: list[IterationRecord] = field(default_factory=list)
    completed: bool = False

    def cost_history(self) -> FloatArray:
        return np.array([rec.mean_state_cost for rec in self.history])

    def total_cost_history(self) -> FloatArray:
        return np.array([rec.mean_total_cost for rec in self.history])


def _make_executor(threads: int):
    if threads <= 1:
        return None
    return ThreadPoolExecutor(max_workers=threads)


def open_loop_optimize(run: OptimRun) -> OptimRun:
    """Iterate the importance-weighted control update for ``run.iterations``.

    Iteration i consumes rollout streams ``stream_offset + i*R .. + (i+1)*R - 1``,
    so every iteration explores fresh noise and results do not depend on the
    worker count.

    Raises:
        AllRolloutsFailedError: Every rollout of some iteration blew up
            (partial history is preserved on the run).
    """
    if run.iterations < 1:
        raise ValueError("need at least one iteration")
    if run.rollouts < 2:
        raise ValueError("need at least two rollouts per iteration")
    L = run.config.num_steps
    if run.initial_controls is None:
        controls = zero_controls(L, run.actuators.num_actuators, run.config.dt)
    else:
        controls = run.initial_controls.copy()
    if controls.num_steps != L:
        raise ValueError("initial controls do not match the horizon")

    executor = _make_executor(run.threads)
    try:
        for i in range(run.iterations):
            indices = run.stream_offset + i * run.rollouts + np.arange(run.rollouts)
            batch = _sample_iteration_batch(run, controls, indices, executor)
            controls = update_controls(controls, batch, run.actuators, run.config.rho)
            run.controls_history.append(controls)
            ok = ~batch.failed
            run.history.append(
                IterationRecord(
                    mean_state_cost=float(batch.state_costs[ok].mean()),
                    mean_total_cost=float(batch.total_costs[ok].mean()),
                    effective_sample_size=batch.effective_sample_size(),
                    num_failed=batch.num_failed,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown()
    run.controls = controls
    run.completed = True
    return run


def _sample_iteration_batch(run: OptimRun, controls: ControlSequence, indices, executor):
    result = simulate_batch(
        run.config,
        run.actuators,
        controls=controls,
        cost_spec=run.cost_spec,
        seed=run.seed,
        indices=indices,
        stream=STREAM_ROLLOUT,
        executor=executor,
    )
    # zeta_r = (1/sqrt(rho)) sum_k u_k . delta_u_k^(r) + energy/2, shared
    # quadratic term since every rollout ran the same control sequence.
    cross = np.einsum("rln,ln->r", result.deltas, controls.u)
    quad = np.einsum("ki,ij,kj->", controls.u, run.actuators.gram, controls.u) * controls.dt
    zetas = cross / np.sqrt(run.config.rho) + 0.5 * quad
    return build_rollout_batch(
        result.state_costs, zetas, result.deltas, run.config.rho, run.config.dt
    )


def evaluate_controls(
    config: SimConfig,
    actuators: ActuatorSet,
    controls: ControlSequence | None,
    cost_spec: CostSpec,
    num_rollouts: int,
    seed: int,
    stream: int,
    threads: int = 1,
    keep_states: bool = False,
):
    """Fresh evaluation batch under fixed controls (no optimization)."""
    executor = _make_executor(threads)
    try:
        return simulate_batch(
            config,
            actuators,
            controls=controls,
            cost_spec=cost_spec,
            seed=seed,
            indices=np.arange(num_rollouts),
            stream=stream,
            executor=executor,
            keep_states=keep_states,
        )
    finally:
        if executor is not None:
            executor.shutdown()


def plant_step(
    state: Field,
    config: SimConfig,
    actuators: ActuatorSet | None,
    u_row: FloatArray | None,
    seed: int,
    step_index: int,
) -> Field:
    """Advance the held-out plant one step under its own noise stream.

    The draw is keyed by (seed, plant tag, step_index) only, so different
    controllers executed against the same seed face identical disturbances.
    """
    table = sample_increments(seed, step_index, 1, config.noise, config.dt, STREAM_PLANT)
    dw = assemble_noise_field(config.noise, table.dbeta[0])
    return step(state, config, actuators, u_row, dw)


def apply_on_plant(
    config: SimConfig,
    actuators: ActuatorSet | None,
    controls: ControlSequence | None,
    seed: int,
    total_steps: int,
) -> FloatArray:
    """Execute a fixed control sequence open-loop on the plant noise stream.

    Returns the (total_steps+1, J+1) applied state history; rows beyond the
    control horizon reuse the last control row.
    """
    n = config.grid.num_nodes
    states = np.empty((total_steps + 1, n))
    states[0] = config.initial_condition.values
    state = Field(config.grid, states[0].copy())
    for s in range(total_steps):
        if controls is None or actuators is None:
            u_row = None
        else:
            u_row = controls.u[min(s, controls.num_steps - 1)]
        state = plant_step(state, config, actuators, u_row, seed, s)
        states[s + 1] = state.values
    return states


@dataclass
class MpcRun:
    """Inputs and accumulated results of a receding-horizon run.

    ``seed`` drives the controller's internal exploration noise;
    ``plant_seed`` (default: same) drives the held-out disturbances acting
    on the plant. Keeping ``seed`` fixed while sweeping ``plant_seed``
    evaluates one fixed controller against independent disturbance paths.
    """

    config: SimConfig
    actuators: ActuatorSet
    cost_spec: CostSpec
    iterations: int  # inner optimization iterations per closed-loop step
    rollouts: int
    seed: int
    plant_seed: int | None = None
    threads: int = 1
    initial_controls: ControlSequence | None = None
    applied_states: FloatArray | None = None  # (steps+1, J+1)
    applied_controls: FloatArray | None = None  # (steps, N)
    step_records: list[IterationRecord] = field(default_factory=list)
    steps_executed: int = 0
    completed: bool = False


def shift_controls(controls: ControlSequence) -> ControlSequence:
    """Receding-horizon warm start: drop the first row, repeat the last."""
    shifted = np.vstack([controls.u[1:], controls.u[-1:]])
    return ControlSequence(shifted, controls.dt)


def mpc_run(run: MpcRun, total_steps: int) -> MpcRun:
    """Closed-loop control: replan, apply the first row, advance the plant.

    The plant is the same simulator driven by the held-out stream
    (seed, plant tag, step), one increment row per closed-loop step, so two
    controllers executed against the same seed see identical disturbances.
    """
    if total_steps < 1:
        raise ValueError("need at least one closed-loop step")
    config = run.config
    L = config.num_steps
    n = config.grid.num_nodes
    plant_seed = run.seed if run.plant_seed is None else run.plant_seed

    plan = run.initial_controls
    if plan is None:
        plan = zero_controls(L, run.actuators.num_actuators, config.dt)

    applied_states = np.empty((total_steps + 1, n))
    applied_states[0] = config.initial_condition.values
    applied_controls = np.empty((total_steps, run.actuators.num_actuators))

    state = Field(config.grid, applied_states[0].copy())
    for s in range(total_steps):
        inner_config = SimConfig(
            grid=config.grid,
            drift=config.drift,
            noise=config.noise,
            rho=config.rho,
            dt=config.dt,
            num_steps=L,
            initial_condition=state,
        )
        inner = OptimRun(
            config=inner_config,
            actuators=run.actuators,
            cost_spec=run.cost_spec,
            iterations=run.iterations,
            rollouts=run.rollouts,
            seed=run.seed,
            threads=run.threads,
            initial_controls=plan,
            stream_offset=s * run.iterations * run.rollouts,
        )
        open_loop_optimize(inner)
        plan = inner.controls
        run.step_records.append(inner.history[-1])

        # Apply the first planned control to the plant for one step.
        state = plant_step(state, inner_config, run.actuators, plan.u[0], plant_seed, s)
        applied_states[s + 1] = state.values
        applied_controls[s] = plan.u[0]

        plan = shift_controls(plan)

    run.applied_states = applied_states
    run.applied_controls = applied_controls
    run.steps_executed = total_steps
    run.completed = True
    return run
