"""Field files: a CSV of (coordinates..., value) plus a JSON sidecar.

Sidecar keys: schema, dim, time, kind ("droplet" | "perturbation"),
coords ("x" | "r" | "z"), frame {M, gamma, sigma_M} and optional solver
settings used to rebuild cell volumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FIELD_SCHEMA = "thinfilm.field/1"


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def dump_json(obj, path) -> None:
    """Deterministic JSON (sorted keys, fixed indentation, trailing newline)."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


@dataclass
class FieldFile:
    coords: np.ndarray  # (n,) for x / r, (n, dim) for z
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.meta["dim"])

    @property
    def time(self) -> float:
        return float(self.meta.get("time", 0.0))

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "droplet")

    def to_droplet(self):
        from .simulator import Grid, SolverConfig
        from .transform import DropletField

        vols = None
        solver = self.meta.get("solver")
        if solver:
            grid = Grid(SolverConfig(self.dim, solver["h"], solver.get("dt", 1e-3), solver["X_max"]))
            if len(grid.centers) == len(self.coords) and np.allclose(grid.centers, self.coords):
                vols = grid.volumes
        return DropletField(self.dim, self.coords, self.values, self.time, cell_volumes=vols)


def write_field(path, coords, values, dim: int, time: float = 0.0, kind: str = "droplet",
                frame=None, extra: dict | None = None) -> Path:
    path = Path(path)
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float)
    if coords.ndim == 1:
        cols = ["r" if (kind == "droplet" and dim >= 2) else ("x" if kind == "droplet" else "z")]
        table = np.column_stack([coords, values])
        coord_kind = cols[0]
    else:
        cols = [f"z{i + 1}" for i in range(coords.shape[1])]
        table = np.column_stack([coords, values])
        coord_kind = "z"
    header = ",".join(cols + ["value"])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {"schema": FIELD_SCHEMA, "dim": dim, "time": float(time), "kind": kind, "coords": coord_kind}
    if frame is not None:
        meta["frame"] = frame.as_dict() if hasattr(frame, "as_dict") else dict(frame)
    if extra:
        meta.update(extra)
    dump_json(meta, sidecar_path(path))
    return path


def read_field(path) -> FieldFile:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if header[-1] != "value":
        raise ValueError(f"{path}: last column must be 'value'")
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    coords = data[:, :-1]
    if coords.shape[1] == 1:
        coords = coords[:, 0]
    if "dim" not in meta:
        if header[0] == "r":
            raise ValueError(f"{path}: radial field needs a sidecar giving its dimension")
        meta["dim"] = 1 if coords.ndim == 1 else coords.shape[1]
        meta["kind"] = "perturbation" if header[0].startswith("z") else "droplet"
    return FieldFile(coords, data[:, -1], meta)
