"""Sampling-based stochastic optimal control for semilinear 1-D SPDEs.

Simulates controlled reaction-diffusion SPDEs driven by truncated
Karhunen-Loeve noise, optimizes piecewise-constant actuator controls by
importance-weighted rollout averaging, and verifies the underlying
change-of-measure identities by Monte Carlo.
"""

import os

# BLAS kernels must not change with caller thread count, or runs with
# different --threads settings would not be bit-identical. Must happen
# before numpy loads its BLAS backend.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var

from .errors import (  # noqa: E402
    AllRolloutsFailedError,
    ConfigError,
    DegenerateActuatorsError,
    GridMismatchError,
    InsufficientSamplesError,
    InvalidDomainError,
    NonFiniteStateError,
    TooCoarseError,
    TruncationTooLargeError,
)
from .grid import BoundaryCondition, Field, Grid, apply_bc, build_grid, inner_product  # noqa: E402
from .noise import (  # noqa: E402
    IncrementTable,
    NoiseKind,
    NoiseModel,
    assemble_noise_field,
    build_eigenbasis,
    sample_increments,
)
from .control import (  # noqa: E402
    ActuatorSet,
    ControlSequence,
    CostSpec,
    CostWindow,
    RolloutBatch,
    build_actuators,
    build_rollout_batch,
    delta_u,
    importance_weights,
    one_shot_optimal_controls,
    state_cost,
    update_controls,
    zeta,
)
from .sim import (  # noqa: E402
    DriftKind,
    DriftSpec,
    SimConfig,
    Trajectory,
    control_field,
    laplacian_solver,
    reaction,
    rollout,
    simulate_batch,
    step,
)
from .measures import (  # noqa: E402
    MeasureReport,
    estimate_free_energy,
    log_rn_derivative,
    run_verification,
    verify_kl_and_legendre,
    verify_martingale,
)
from .driver import MpcRun, OptimRun, mpc_run, open_loop_optimize  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "AllRolloutsFailedError",
    "ConfigError",
    "DegenerateActuatorsError",
    "GridMismatchError",
    "InsufficientSamplesError",
    "InvalidDomainError",
    "NonFiniteStateError",
    "TooCoarseError",
    "TruncationTooLargeError",
    "BoundaryCondition",
    "Field",
    "Grid",
    "apply_bc",
    "build_grid",
    "inner_product",
    "IncrementTable",
    "NoiseKind",
    "NoiseModel",
    "assemble_noise_field",
    "build_eigenbasis",
    "sample_increments",
    "ActuatorSet",
    "ControlSequence",
    "CostSpec",
    "CostWindow",
    "RolloutBatch",
    "build_actuators",
    "build_rollout_batch",
    "delta_u",
    "importance_weights",
    "one_shot_optimal_controls",
    "state_cost",
    "update_controls",
    "zeta",
    "DriftKind",
    "DriftSpec",
    "SimConfig",
    "Trajectory",
    "control_field",
    "laplacian_solver",
    "reaction",
    "rollout",
    "simulate_batch",
    "step",
    "MeasureReport",
    "estimate_free_energy",
    "log_rn_derivative",
    "run_verification",
    "verify_kl_and_legendre",
    "verify_martingale",
    "MpcRun",
    "OptimRun",
    "mpc_run",
    "open_loop_optimize",
    "__version__",
]
