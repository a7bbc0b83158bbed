# Bilayer: deep learning for large bending of bilayer plates
#
# Copyright (C) 2024-2026 The Bilayer developers
#
# This file is part of Bilayer.
#
# Bilayer is free software: you can redistribute it and/or modify it
# under the terms of the GNU Lesser General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# Bilayer is distributed in the hope that it will be useful, but
# WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public
# License along with Bilayer. If not, see <https://www.gnu.org/licenses/>.
"""module for file reading and writing"""

from __future__ import annotations

import csv
import logging
import os
import re
from pathlib import Path
from typing import TYPE_CHECKING, Any, Union

import numpy as np
from numba import njit

from .network import Architecture, NetworkParameters
from .trainer import MetricsRow, OptimizerState

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from .boundary import BoundaryLift, NetworkLift
    from .geometry import PlateDomain

logger = logging.getLogger(__name__)

# the type of a path
PathLike = Union[str, "os.PathLike[str]"]

# columns of the metrics file
METRICS_COLUMNS = ("step", "E", "C", "Istar", "elapsed_s", "phase", "eL2", "shape")

# file names in run directories
METRICS_FILE = "metrics.csv"
G1_FILE = "g1.txt"
CHECKPOINT_PATTERN = re.compile(r"^ckpt_(\d+)\.txt$")


def _format_float(x: float) -> str:
    """Shortest representation that reads back to the same float."""
    return repr(float(x))


def write_checkpoint(
    path: PathLike,
    params: NetworkParameters,
    *,
    role: str | None = None,
) -> None:
    """
    Write network parameters to a text checkpoint.

    The first line is ``arch <blocks> <width> <size> <seed>``, optionally
    followed by ``role=<role>``, and each following line holds one
    parameter.  Parameters round-trip exactly.

    """
    arch = params.arch
    if arch.inputs != 2:
        msg = "checkpoints only support networks with two inputs"
        raise ValueError(msg)
    header = f"arch {arch.blocks} {arch.width} {arch.size} {params.seed}"
    if role is not None:
        if not re.fullmatch(r"\w+", role):
            msg = f"invalid checkpoint role {role!r}"
            raise ValueError(msg)
        header += f" role={role}"
    theta = np.asarray(params.theta, dtype=float)
    tmp = Path(f"{os.fspath(path)}.tmp")
    with open(tmp, "w") as fp:
        fp.write(header + "\n")
        fp.writelines(_format_float(x) + "\n" for x in theta)
    os.replace(tmp, path)


def _outputs_from_size(blocks: int, width: int, size: int) -> int:
    """Infer the output dimension of a network from its parameter count."""
    hidden = 3 * width + 2 * blocks * width * (width + 1)
    outputs, rest = divmod(size - hidden, width + 1)
    if rest != 0 or outputs < 1:
        msg = f"parameter count {size} does not match {blocks} blocks of width {width}"
        raise ValueError(msg)
    return outputs


def read_checkpoint(path: PathLike) -> tuple[NetworkParameters, str | None]:
    """
    Read network parameters from a text checkpoint.  Returns the parameters
    and the role from the header, if any.
    """
    with open(path) as fp:
        header = fp.readline().split()
        values = [line.strip() for line in fp if line.strip()]
    if len(header) not in (5, 6) or header[0] != "arch":
        msg = f"{os.fspath(path)}: invalid checkpoint header"
        raise ValueError(msg)
    blocks, width, size, seed = map(int, header[1:5])
    role = None
    if len(header) == 6:
        key, sep, role = header[5].partition("=")
        if key != "role" or not sep:
            msg = f"{os.fspath(path)}: invalid checkpoint header"
            raise ValueError(msg)
    if len(values) != size:
        msg = f"{os.fspath(path)}: expected {size} parameters, found {len(values)}"
        raise ValueError(msg)
    outputs = _outputs_from_size(blocks, width, size)
    arch = Architecture(blocks, width, outputs=outputs)
    theta = np.array([float(v) for v in values])
    return NetworkParameters(theta, arch, seed), role


def read_lift(path: PathLike) -> NetworkLift:
    """
    Read a trained *g1* network from a checkpoint with role ``g1``.
    """
    from .boundary import NetworkLift

    params, role = read_checkpoint(path)
    if role != "g1":
        msg = f"{os.fspath(path)}: checkpoint does not hold a g1 network"
        raise ValueError(msg)
    return NetworkLift(params)


def optimizer_path(checkpoint: PathLike) -> Path:
    """Return the path of the optimiser state next to a checkpoint."""
    path = Path(checkpoint)
    return path.with_name(path.stem + ".adam.npz")


def write_optimizer_state(path: PathLike, state: OptimizerState, step: int) -> None:
    """Write the optimiser state and global step to a ``.npz`` file."""
    with open(path, "wb") as fp:
        np.savez(
            fp,
            m=state.m,
            v=state.v,
            t=state.t,
            step=step,
            hyper=np.array([state.lr, *state.betas, state.eps]),
        )


def read_optimizer_state(path: PathLike) -> tuple[OptimizerState, int]:
    """Read the optimiser state and global step from a ``.npz`` file."""
    with np.load(path) as npz:
        lr, b1, b2, eps = npz["hyper"].tolist()
        state = OptimizerState(
            npz["m"].copy(),
            npz["v"].copy(),
            int(npz["t"]),
            lr=lr,
            betas=(b1, b2),
            eps=eps,
        )
        step = int(npz["step"])
    return state, step


def checkpoint_step(path: PathLike) -> int:
    """Return the global step encoded in a checkpoint file name."""
    match = CHECKPOINT_PATTERN.match(Path(path).name)
    if match is None:
        msg = f"{os.fspath(path)}: not a checkpoint file name"
        raise ValueError(msg)
    return int(match.group(1))


def _metrics_record(row: MetricsRow) -> list[str]:
    def opt(x: Any, fmt: Any = _format_float) -> str:
        return "" if x is None else fmt(x)

    return [
        str(row.step),
        _format_float(row.E),
        _format_float(row.C),
        _format_float(row.Istar),
        opt(row.elapsed),
        row.phase,
        opt(row.e_l2),
        opt(row.shape, str),
    ]


def write_metrics(path: PathLike, rows: list[MetricsRow], *, append: bool = False) -> None:
    """
    Write rows of metrics to a CSV file, with a header unless appending to
    an existing file.
    """
    exists = append and os.path.exists(path)
    with open(path, "a" if append else "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        if not exists:
            writer.writerow(METRICS_COLUMNS)
        writer.writerows(map(_metrics_record, rows))


def read_metrics(path: PathLike) -> list[MetricsRow]:
    """Read rows of metrics from a CSV file."""

    def opt(x: str, cast: Any = float) -> Any:
        return cast(x) if x else None

    rows = []
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        header = next(reader, None)
        if header is None or tuple(header[:5]) != METRICS_COLUMNS[:5]:
            msg = f"{os.fspath(path)}: not a metrics file"
            raise ValueError(msg)
        for record in reader:
            record = record + [""] * (len(METRICS_COLUMNS) - len(record))
            step, e, c, istar, elapsed, phase, e_l2, shape = record[:8]
            rows.append(
                MetricsRow(
                    int(step),
                    float(e),
                    float(c),
                    float(istar),
                    opt(elapsed),
                    phase,
                    opt(e_l2),
                    opt(shape, str),
                ),
            )
    return rows


@njit(nogil=True)
def _quad_faces(keep, n1):
    """
    Compiled function to list the quads of kept grid cells.
    """
    m1, m2 = keep.shape
    count = 0
    for i in range(m1):
        for j in range(m2):
            if keep[i, j]:
                count += 1
    faces = np.empty((count, 4), dtype=np.int64)
    k = 0
    for j in range(m2):
        for i in range(m1):
            if keep[i, j]:
                v = j * n1 + i
                faces[k, 0] = v
                faces[k, 1] = v + 1
                faces[k, 2] = v + 1 + n1
                faces[k, 3] = v + n1
                k += 1
    return faces


def mesh_grid(
    domain: PlateDomain,
    resolution: tuple[int, int],
) -> tuple[NDArray[Any], NDArray[Any]]:
    """
    Structured quad mesh of *domain* with *resolution* vertices per axis.

    Cells whose centre lies in the hole are omitted, and vertices without
    cells are dropped.  Returns the reference vertex positions, with the
    first axis varying fastest, and the counterclockwise quads as 0-based
    vertex indices.

    """
    n1, n2 = resolution
    if n1 < 2 or n2 < 2:
        msg = f"mesh resolution must be at least 2 per axis, got {resolution}"
        raise ValueError(msg)
    a1, b1, a2, b2 = domain.outer.bounds
    x1 = np.linspace(a1, b1, n1)
    x2 = np.linspace(a2, b2, n2)
    centres = np.stack(
        np.meshgrid((x1[1:] + x1[:-1]) / 2, (x2[1:] + x2[:-1]) / 2, indexing="ij"),
        axis=-1,
    )
    keep = np.ones((n1 - 1, n2 - 1), dtype=bool)
    if domain.hole is not None:
        keep &= ~domain.hole.contains(centres, closed=True)
    faces = _quad_faces(keep, n1)
    vertices = np.stack(np.meshgrid(x1, x2, indexing="xy"), axis=-1).reshape(-1, 2)
    used, faces = np.unique(faces, return_inverse=True)
    return vertices[used], faces.reshape(-1, 4)


def write_mesh(path: PathLike, vertices: NDArray[Any], faces: NDArray[Any]) -> None:
    """
    Write a surface mesh in Wavefront format, with 1-based face indices.
    """
    with open(path, "w") as fp:
        for x, y, z in vertices:
            fp.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for a, b, c, d in faces + 1:
            fp.write(f"f {a} {b} {c} {d}\n")


def export_mesh(
    params: NetworkParameters,
    bc: BoundaryLift,
    domain: PlateDomain,
    resolution: tuple[int, int],
    path: PathLike | None = None,
) -> tuple[NDArray[Any], NDArray[Any]]:
    """
    Evaluate the deformation on a structured mesh of *domain* and write it
    to *path*, if given.  Returns the deformed vertices and the quads.
    """
    from .boundary import deformation

    points, faces = mesh_grid(domain, resolution)
    vertices = np.asarray(deformation(params, bc)(points).value)
    if path is not None:
        write_mesh(path, vertices, faces)
        logger.debug("wrote mesh with %d vertices to %s", len(vertices), path)
    return vertices, faces


class RunDirectory:
    """
    Output directory of a training run.

    Receives metrics rows, checkpoints, and mesh snapshots from the trainer.
    When a run is resumed after *resume_step*, rows for later steps are
    removed from the existing metrics file.

    """

    def __init__(
        self,
        path: PathLike,
        domain: PlateDomain,
        bc: BoundaryLift,
        *,
        resolution: tuple[int, int] = (101, 41),
        resume_step: int | None = None,
    ) -> None:
        self.path = Path(path)
        self.domain = domain
        self.bc = bc
        self.resolution = resolution
        self.path.mkdir(parents=True, exist_ok=True)
        metrics = self.path / METRICS_FILE
        if resume_step is None or not metrics.exists():
            write_metrics(metrics, [])
        else:
            rows = [r for r in read_metrics(metrics) if r.step <= resume_step]
            rows = [r for r in rows if r.phase != "test"]
            write_metrics(metrics, rows)

    def __repr__(self) -> str:
        return f"RunDirectory({os.fspath(self.path)!r})"

    @property
    def metrics_path(self) -> Path:
        return self.path / METRICS_FILE

    def write_metrics(self, row: MetricsRow) -> None:
        write_metrics(self.metrics_path, [row], append=True)

    def checkpoint(
        self,
        step: int,
        params: NetworkParameters,
        state: OptimizerState,
    ) -> None:
        path = self.path / f"ckpt_{step}.txt"
        write_checkpoint(path, params)
        write_optimizer_state(optimizer_path(path), state, step)
        logger.info("wrote checkpoint %s", path)

    def snapshot(self, step: int, params: NetworkParameters) -> None:
        export_mesh(
            params,
            self.bc,
            self.domain,
            self.resolution,
            self.path / f"mesh_{step}.obj",
        )

    def checkpoints(self) -> list[Path]:
        """Return all checkpoints, ordered by step."""
        paths = [p for p in self.path.iterdir() if CHECKPOINT_PATTERN.match(p.name)]
        return sorted(paths, key=checkpoint_step)
