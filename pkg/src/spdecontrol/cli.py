"""Command-line interface: simulate | optimize | mpc | verify.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 statistical-contract failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Experiment, load_experiment
from .control import ControlSequence
from .driver import MpcRun, OptimRun, evaluate_controls, mpc_run, open_loop_optimize
from .errors import (
    AllRolloutsFailedError,
    ConfigError,
    InsufficientSamplesError,
    NonFiniteStateError,
)
from .measures import format_report, run_verification
from .noise import STREAM_EVAL
from .outputs import ManifestWriter, node_header, write_csv, write_trajectory_csv
from .sim import rollout

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_CONTRACT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdecontrol",
        description="Sampling-based stochastic optimal control of 1-D semilinear SPDEs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "roll out trajectories under zero or fixed controls"),
        ("optimize", "open-loop trajectory optimization"),
        ("mpc", "receding-horizon control with per-step replanning"),
        ("verify", "Monte-Carlo checks of the change-of-measure identities"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None, help="YAML config file")
        cmd.add_argument("--preset", default=None, help="named preset experiment")
        cmd.add_argument("--seed", type=int, default=None, help="override master seed")
        cmd.add_argument("--threads", type=int, default=1, help="rollout worker threads")
        cmd.add_argument("--out-dir", type=Path, default=None, help="output directory")
    return parser


def _load(args) -> Experiment:
    exp = load_experiment(
        path=args.config,
        preset=args.preset,
        seed=args.seed,
        out_dir=None if args.out_dir is None else str(args.out_dir),
    )
    Path(exp.output_dir).mkdir(parents=True, exist_ok=True)
    return exp


def _manifest(exp: Experiment, command: str) -> ManifestWriter:
    return ManifestWriter(exp.output_dir, command, exp.config_hash(), exp.seed, __version__)


def cmd_simulate(args) -> int:
    exp = _load(args)
    manifest = _manifest(exp, "simulate")
    manifest.note_seed_lineage(rollouts="(seed, rollout-stream, index 0..R-1)")
    if exp.simulate_control_value is None:
        actuators, controls = None, None
    else:
        actuators = exp.actuators
        controls = ControlSequence(
            np.full(
                (exp.sim.num_steps, exp.actuators.num_actuators), exp.simulate_control_value
            ),
            exp.sim.dt,
        )
    times = exp.sim.dt * np.arange(exp.sim.num_steps + 1)
    for r in range(exp.simulate_rollouts):
        traj = rollout(exp.sim, actuators, controls, exp.seed, r)
        path = manifest.add_output(f"trajectory_{r:03d}.csv")
        write_trajectory_csv(path, times, traj.states)
    manifest.write()
    return EXIT_OK


def _write_optimize_outputs(exp: Experiment, run: OptimRun, manifest: ManifestWriter) -> None:
    history = np.array(
        [
            [
                i + 1,
                rec.mean_state_cost,
                rec.mean_total_cost,
                rec.effective_sample_size,
            ]
            for i, rec in enumerate(run.history)
        ]
    )
    write_csv(
        manifest.add_output("cost_history.csv"),
        ["iteration", "mean_J", "mean_J_tilde", "effective_sample_size"],
        history,
    )
    write_csv(
        manifest.add_output("final_controls.csv"),
        [f"u_{l}" for l in range(exp.actuators.num_actuators)],
        run.controls.u,
    )

    eval_batch = evaluate_controls(
        exp.sim,
        exp.actuators,
        run.controls,
        exp.cost,
        exp.eval_rollouts,
        exp.seed,
        STREAM_EVAL,
        threads=run.threads,
    )
    mean_profile = eval_batch.final_values.mean(axis=0)
    std_profile = eval_batch.final_values.std(axis=0, ddof=1)
    header = node_header(exp.grid.num_nodes)
    write_csv(manifest.add_output("eval_mean_profile.csv"), header, mean_profile[None, :])
    write_csv(manifest.add_output("eval_std_profile.csv"), header, std_profile[None, :])
    manifest.add_iteration_rows(
        [
            {
                "iteration": i + 1,
                "mean_J": rec.mean_state_cost,
                "mean_J_tilde": rec.mean_total_cost,
                "ess": rec.effective_sample_size,
                "failed": rec.num_failed,
            }
            for i, rec in enumerate(run.history)
        ]
    )
    manifest.note_seed_lineage(
        training="(seed, rollout-stream, i*R + r)",
        evaluation="(seed, eval-stream, 0..eval_rollouts-1)",
    )


def cmd_optimize(args) -> int:
    exp = _load(args)
    manifest = _manifest(exp, "optimize")
    run = OptimRun(
        config=exp.sim,
        actuators=exp.actuators,
        cost_spec=exp.cost,
        iterations=exp.iterations,
        rollouts=exp.rollouts,
        seed=exp.seed,
        threads=args.threads,
    )
    open_loop_optimize(run)
    _write_optimize_outputs(exp, run, manifest)
    manifest.write()
    return EXIT_OK


def cmd_mpc(args) -> int:
    exp = _load(args)
    manifest = _manifest(exp, "mpc")
    run = MpcRun(
        config=exp.sim,
        actuators=exp.actuators,
        cost_spec=exp.cost,
        iterations=exp.mpc_inner_iterations,
        rollouts=exp.mpc_rollouts,
        seed=exp.seed,
        threads=args.threads,
    )
    mpc_run(run, exp.mpc_steps)
    times = exp.sim.dt * np.arange(exp.mpc_steps + 1)
    write_trajectory_csv(
        manifest.add_output("applied_trajectory.csv"), times, run.applied_states
    )
    write_csv(
        manifest.add_output("applied_controls.csv"),
        [f"u_{l}" for l in range(exp.actuators.num_actuators)],
        run.applied_controls,
    )
    write_csv(
        manifest.add_output("replan_costs.csv"),
        ["step", "mean_J", "mean_J_tilde", "effective_sample_size"],
        np.array(
            [
                [s + 1, rec.mean_state_cost, rec.mean_total_cost, rec.effective_sample_size]
                for s, rec in enumerate(run.step_records)
            ]
        ),
    )
    manifest.note_seed_lineage(
        training="(seed, rollout-stream, (s*I + i)*R + r)",
        plant="(seed, plant-stream, step)",
    )
    manifest.write()
    return EXIT_OK


def cmd_verify(args) -> int:
    exp = _load(args)
    manifest = _manifest(exp, "verify")
    controls = ControlSequence(
        np.full((exp.sim.num_steps, exp.actuators.num_actuators), exp.verify_control_value),
        exp.sim.dt,
    )
    report = run_verification(
        exp.sim,
        exp.actuators,
        controls,
        exp.cost,
        exp.verify_rollouts,
        exp.seed,
        threads=args.threads,
    )
    text = format_report(report)
    print(text)
    report_path = manifest.add_output("measure_report.txt")
    Path(report_path).write_text(text + "\n")
    manifest.note_seed_lineage(
        controlled="(seed, rollout-stream, 0..R-1)",
        uncontrolled="(seed, verify-stream, 0..R-1)",
        martingale="(seed+1, rollout-stream, 0..R-1)",
    )
    manifest.write()
    return EXIT_OK if report.all_ok() else EXIT_CONTRACT


_COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "mpc": cmd_mpc,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None and args.preset is None:
        parser.error(f"{args.command}: need --config or --preset")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InsufficientSamplesError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteStateError, AllRolloutsFailedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
