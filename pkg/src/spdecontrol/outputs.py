"""Persistent run outputs: canonical CSV arrays and the run manifest.

Floats are written with 17 significant digits so reading a file back
reproduces the in-memory float64 values exactly.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

FLOAT_FORMAT = "%.17g"


def write_csv(path: str | Path, header: list[str], array: NDArray) -> None:
    array = np.atleast_2d(np.asarray(array, dtype=np.float64))
    if array.shape[1] != len(header):
        raise ValueError(f"{len(header)} header columns for array with {array.shape[1]}")
    np.savetxt(path, array, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(header), comments="")


def read_csv(path: str | Path) -> tuple[list[str], NDArray]:
    with open(path) as handle:
        header = handle.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def trajectory_header(num_nodes: int) -> list[str]:
    return ["t"] + [f"x_{k}" for k in range(num_nodes)]


def node_header(num_nodes: int) -> list[str]:
    return [f"x_{k}" for k in range(num_nodes)]


def write_trajectory_csv(path: str | Path, times: NDArray, states: NDArray) -> None:
    """Rows t, X(t, x_0..x_J); one row per stored time."""
    table = np.column_stack([times, states])
    write_csv(path, trajectory_header(states.shape[1]), table)


class ManifestWriter:
    """Collects run metadata and emits the manifest exactly once."""

    def __init__(self, out_dir: str | Path, command: str, config_hash: str, seed: int, version: str):
        self.out_dir = Path(out_dir)
        self.data = {
            "command": command,
            "config_hash": config_hash,
            "master_seed": seed,
            "tool_version": version,
            "started_unix": time.time(),
            "wall_seconds": None,
            "seed_lineage": {},
            "iterations": [],
            "outputs": [],
        }
        self._written = False

    def add_output(self, name: str) -> Path:
        self.data["outputs"].append(name)
        return self.out_dir / name

    def add_iteration_rows(self, rows: list[dict]) -> None:
        self.data["iterations"] = rows

    def note_seed_lineage(self, **streams: str) -> None:
        self.data["seed_lineage"].update(streams)

    def write(self) -> Path:
        if self._written:
            raise RuntimeError("manifest already written")
        self.data["wall_seconds"] = time.time() - self.data["started_unix"]
        path = self.out_dir / "manifest.json"
        with open(path, "w") as handle:
            json.dump(self.data, handle, indent=2, sort_keys=True)
            handle.write("\n")
        self._written = True
        return path
