"""Experiment configuration: YAML schema, strict validation, named presets.

A config file is a nested mapping; unknown keys anywhere are rejected with
the offending key named. A top-level ``preset:`` key starts from one of the
built-in experiments (heat_tracking, nagumo_accelerate, nagumo_suppress)
and overlays the remaining keys on top of it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .control import ActuatorSet, CostSpec, CostWindow, build_actuators
from .errors import ConfigError
from .grid import BoundaryCondition, Field, Grid, apply_bc, build_grid
from .noise import NoiseKind, NoiseModel, build_eigenbasis
from .sim import DriftKind, DriftSpec, SimConfig

_SCHEMA = {
    "preset": str,
    "grid": {"a": float, "b": float, "cells": int, "bc": str},
    "drift": {"kind": str, "epsilon": float, "alpha": float},
    "noise": {"modes": int, "kind": str, "eigenvalues": list},
    "sim": {"rho": float, "dt": float, "steps": int, "initial": str},
    "actuators": {"centers": list, "widths": list},
    "cost": {"kappa": float, "terminal_only": bool, "windows": list},
    "optim": {
        "iterations": int,
        "rollouts": int,
        "seed": int,
        "eval_rollouts": int,
    },
    "mpc": {"steps": int, "inner_iterations": int, "rollouts": int},
    "simulate": {"rollouts": int, "control_value": float},
    "verify": {"rollouts": int, "control_value": float},
    "output": {"dir": str},
}

_INITIAL_PROFILES = ("zero", "nagumo-front")

PRESETS: dict[str, dict] = {
    # Heat tracking: hold three temperature windows at 5 / 2.5 / 5 on (0, 1)
    # against space-time white noise. Actuator layout and kappa are reference
    # -run choices; the windows and targets follow the published cost.
    "heat_tracking": {
        "grid": {"a": 0.0, "b": 1.0, "cells": 64, "bc": "dirichlet"},
        "drift": {"kind": "heat", "epsilon": 0.3},
        "noise": {"modes": 32, "kind": "cylindrical"},
        "sim": {"rho": 10.0, "dt": 0.01, "steps": 100, "initial": "zero"},
        "actuators": {
            "centers": [0.2, 0.35, 0.5, 0.65, 0.8],
            "widths": [0.05, 0.05, 0.05, 0.05, 0.05],
        },
        "cost": {
            "kappa": 1.0,
            "terminal_only": False,
            "windows": [
                {"lo": 0.18, "hi": 0.22, "target": 5.0},
                {"lo": 0.48, "hi": 0.52, "target": 2.5},
                {"lo": 0.78, "hi": 0.82, "target": 5.0},
            ],
        },
        "optim": {"iterations": 100, "rollouts": 100, "seed": 0, "eval_rollouts": 100},
        "mpc": {"steps": 100, "inner_iterations": 2, "rollouts": 100},
        "simulate": {"rollouts": 1},
        "verify": {"rollouts": 10000, "control_value": 0.3},
        "output": {"dir": "out"},
    },
    # Nagumo acceleration: drive the voltage to 1 near the far end of the
    # axon (fraction-of-domain window [0.7, 0.99] of (0, 10)) within 2.5 s.
    "nagumo_accelerate": {
        "grid": {"a": 0.0, "b": 10.0, "cells": 200, "bc": "neumann"},
        "drift": {"kind": "nagumo", "epsilon": 1.0, "alpha": -0.5},
        "noise": {"modes": 64, "kind": "cylindrical"},
        "sim": {"rho": 100.0, "dt": 0.01, "steps": 250, "initial": "nagumo-front"},
        "actuators": {
            "centers": [6.8, 7.4, 8.0, 8.6, 9.2, 9.8],
            "widths": [0.45, 0.45, 0.45, 0.45, 0.45, 0.45],
        },
        "cost": {
            "kappa": 1.0,
            "terminal_only": False,
            "windows": [{"lo": 7.0, "hi": 9.9, "target": 1.0}],
        },
        "optim": {"iterations": 60, "rollouts": 100, "seed": 0, "eval_rollouts": 64},
        "mpc": {"steps": 250, "inner_iterations": 4, "rollouts": 50},
        "simulate": {"rollouts": 1},
        "verify": {"rollouts": 10000, "control_value": 0.1},
        "output": {"dir": "out"},
    },
    # Nagumo suppression: drive the voltage to 0 in the raw-coordinate window
    # [0.7, 0.99], where the initial profile already carries the wave body.
    "nagumo_suppress": {
        "grid": {"a": 0.0, "b": 10.0, "cells": 200, "bc": "neumann"},
        "drift": {"kind": "nagumo", "epsilon": 1.0, "alpha": -0.5},
        "noise": {"modes": 64, "kind": "cylindrical"},
        "sim": {"rho": 100.0, "dt": 0.01, "steps": 250, "initial": "nagumo-front"},
        "actuators": {
            "centers": [0.3, 0.85, 1.4, 2.0],
            "widths": [0.25, 0.25, 0.25, 0.3],
        },
        "cost": {
            "kappa": 1.0,
            "terminal_only": False,
            "windows": [{"lo": 0.7, "hi": 0.99, "target": 0.0}],
        },
        "optim": {"iterations": 60, "rollouts": 100, "seed": 0, "eval_rollouts": 64},
        "mpc": {"steps": 250, "inner_iterations": 4, "rollouts": 50},
        "simulate": {"rollouts": 1},
        "verify": {"rollouts": 10000, "control_value": 0.1},
        "output": {"dir": "out"},
    },
}


@dataclass
class Experiment:
    """Validated, fully-resolved experiment ready to run."""

    raw: dict
    grid: Grid
    drift: DriftSpec
    noise: NoiseModel
    sim: SimConfig
    actuators: ActuatorSet
    cost: CostSpec
    iterations: int
    rollouts: int
    seed: int
    eval_rollouts: int
    mpc_steps: int
    mpc_inner_iterations: int
    mpc_rollouts: int
    simulate_rollouts: int
    simulate_control_value: float | None
    verify_rollouts: int
    verify_control_value: float
    output_dir: str

    def config_hash(self) -> str:
        """Platform-stable hash of the semantically meaningful config."""
        canon = copy.deepcopy(self.raw)
        canon.pop("output", None)  # where files land does not change results
        blob = json.dumps(canon, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_keys(data: dict, schema: dict, path: str = "") -> None:
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key: {where}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            _check_keys(value, expected, where)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{where} must be a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{where} must be an integer")
        elif expected is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{where} must be a boolean")
        elif expected is str:
            if not isinstance(value, str):
                raise ConfigError(f"{where} must be a string")
        elif expected is list:
            if not isinstance(value, list):
                raise ConfigError(f"{where} must be a list")


def _merge(base: dict, overlay: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path) -> dict:
    """Read a YAML config file and resolve its preset, keys checked strictly."""
    with open(path) as handle:
        data = yaml.safe_load(handle)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    return resolve_dict(data)


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset: {name} (have {', '.join(sorted(PRESETS))})")
    return copy.deepcopy(PRESETS[name])


def resolve_dict(data: dict) -> dict:
    """Overlay a raw config mapping onto its preset (if any) and key-check it."""
    _check_keys(data, _SCHEMA)
    name = data.get("preset")
    if name is not None:
        base = preset_config(name)
        overlay = {k: v for k, v in data.items() if k != "preset"}
        merged = _merge(base, overlay)
        merged["preset"] = name
        return merged
    return copy.deepcopy(data)


def _initial_field(grid: Grid, profile: str) -> Field:
    if profile == "zero":
        values = np.zeros(grid.num_nodes)
    elif profile == "nagumo-front":
        values = 1.0 / (1.0 + np.exp(-(2.0 - grid.nodes) / np.sqrt(2.0)))
    else:
        raise ConfigError(
            f"sim.initial must be one of {_INITIAL_PROFILES}, got {profile!r}"
        )
    return apply_bc(Field(grid, values))


def build_experiment(data: dict, seed: int | None = None, out_dir: str | None = None) -> Experiment:
    """Validate a resolved config mapping and construct every component.

    Raises:
        ConfigError: Missing/unknown keys or precondition violations
            (wrapped from the module constructors).
    """
    data = resolve_dict(data)
    required = ("grid", "drift", "noise", "sim", "actuators", "cost", "optim")
    for section in required:
        if section not in data:
            raise ConfigError(f"missing config section: {section}")

    try:
        g = data["grid"]
        grid = build_grid(
            float(g["a"]),
            float(g["b"]),
            int(g["cells"]),
            BoundaryCondition(g["bc"]),
        )

        d = data["drift"]
        drift = DriftSpec(
            kind=DriftKind(d["kind"]),
            epsilon=float(d["epsilon"]),
            alpha=float(d.get("alpha", 0.0)),
        )

        nz = data["noise"]
        eig = nz.get("eigenvalues")
        noise = build_eigenbasis(
            grid,
            int(nz["modes"]),
            kind=NoiseKind(nz.get("kind", "cylindrical")),
            eigenvalues=None if eig is None else np.asarray(eig, dtype=np.float64),
        )

        s = data["sim"]
        initial = _initial_field(grid, s.get("initial", "zero"))
        sim = SimConfig(
            grid=grid,
            drift=drift,
            noise=noise,
            rho=float(s["rho"]),
            dt=float(s["dt"]),
            num_steps=int(s["steps"]),
            initial_condition=initial,
        )

        act = data["actuators"]
        actuators = build_actuators(act["centers"], act["widths"], grid, noise)

        c = data["cost"]
        windows = []
        for win in c["windows"]:
            extra = set(win) - {"lo", "hi", "target"}
            if extra:
                raise ConfigError(f"unknown cost window key: {sorted(extra)[0]}")
            windows.append(
                CostWindow(float(win["lo"]), float(win["hi"]), float(win["target"]))
            )
        cost = CostSpec(
            kappa=float(c["kappa"]),
            windows=windows,
            terminal_only=bool(c.get("terminal_only", False)),
        )
        if cost.kappa <= 0:
            raise ConfigError("cost.kappa must be positive")
        cost.node_indices(grid)  # validates window bounds against the domain

        o = data["optim"]
        mpc = data.get("mpc", {})
        iterations = int(o["iterations"])
        experiment = Experiment(
            raw=data,
            grid=grid,
            drift=drift,
            noise=noise,
            sim=sim,
            actuators=actuators,
            cost=cost,
            iterations=iterations,
            rollouts=int(o["rollouts"]),
            seed=int(o["seed"]) if seed is None else int(seed),
            eval_rollouts=int(o.get("eval_rollouts", 100)),
            mpc_steps=int(mpc.get("steps", sim.num_steps)),
            mpc_inner_iterations=int(mpc.get("inner_iterations", iterations)),
            mpc_rollouts=int(mpc.get("rollouts", int(o["rollouts"]))),
            simulate_rollouts=int(data.get("simulate", {}).get("rollouts", 1)),
            simulate_control_value=(
                None
                if data.get("simulate", {}).get("control_value") is None
                else float(data["simulate"]["control_value"])
            ),
            verify_rollouts=int(data.get("verify", {}).get("rollouts", 10000)),
            verify_control_value=float(data.get("verify", {}).get("control_value", 0.3)),
            output_dir=str(
                out_dir if out_dir is not None else data.get("output", {}).get("dir", "out")
            ),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"missing or malformed config value: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if seed is not None:
        experiment.raw = _merge(experiment.raw, {"optim": {"seed": int(seed)}})
    return experiment


def load_experiment(
    path: str | Path | None = None,
    preset: str | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
) -> Experiment:
    """Build an experiment from a config file, a preset name, or both."""
    if path is None and preset is None:
        raise ConfigError("need a config file or a preset name")
    if path is not None:
        data = load_config(path)
        if preset is not None and data.get("preset") not in (None, preset):
            raise ConfigError("config file names a different preset than --preset")
        if preset is not None and "preset" not in data:
            data = resolve_dict({**data, "preset": preset})
    else:
        data = preset_config(preset)
        data["preset"] = preset
    return build_experiment(data, seed=seed, out_dir=out_dir)
