"""Session report rendering: figures and delimited telemetry extracts.

Consumes a recorded session log and writes, next to a CSV of the pose
track, matplotlib renderings of the reconstructed occupancy map, the
driven trajectory, head tracking, and bus load, plus the PGM/sidecar
map export.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .locomotion import Pose2D
from .mapping import OccupancyGrid
from .protocol import SessionLog

__all__ = ["grid_from_map_deltas", "write_session_report"]


def grid_from_map_deltas(log: SessionLog) -> OccupancyGrid | None:
    """Rebuild the occupancy grid by folding the map_delta stream."""
    grid: OccupancyGrid | None = None
    for env in log.outbound():
        if env.topic != "map_delta":
            continue
        p = env.payload
        if grid is None:
            grid = OccupancyGrid(
                p["resolution"],
                Pose2D(p["origin"][0], p["origin"][1], 0.0),
                p["width"],
                p["height"],
            )
        for ix, iy, value in p["cells"]:
            grid.cells[iy, ix] = value
    return grid


def _pose_track(log: SessionLog) -> list[tuple[float, float, float, float]]:
    return [
        (e.stamp, e.payload["x"], e.payload["y"], e.payload["heading"])
        for e in log.outbound()
        if e.topic == "pose2d"
    ]


def write_session_report(log: SessionLog, out_dir: str | Path) -> list[Path]:
    """Write figures, the map export, and pose CSV; returns created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    track = _pose_track(log)
    csv_path = out / "pose_track.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stamp_s", "x_m", "y_m", "heading_rad"])
        writer.writerows(track)
    created.append(csv_path)

    grid = grid_from_map_deltas(log)
    if grid is not None:
        pgm_path = out / "map.pgm"
        pgm_path.write_bytes(grid.to_pgm())
        created.append(pgm_path)
        sidecar = out / "map.yaml"
        sidecar.write_text(grid.sidecar_text("map.pgm"))
        created.append(sidecar)
        created.append(_map_figure(grid, track, out / "map.png"))

    if track:
        created.append(_trajectory_figure(track, out / "trajectory.png"))
    head = _head_figure(log, out / "head_tracking.png")
    if head is not None:
        created.append(head)
    bus = _bus_figure(log, out / "bus_load.png")
    if bus is not None:
        created.append(bus)
    return created


def _map_figure(grid: OccupancyGrid, track, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 6))
    prob = 1.0 - 1.0 / (1.0 + np.exp(grid.cells))
    extent = (
        grid.origin.x_m,
        grid.origin.x_m + grid.width_cells * grid.resolution_m,
        grid.origin.y_m,
        grid.origin.y_m + grid.height_cells * grid.resolution_m,
    )
    im = ax.imshow(prob, origin="lower", cmap="gray_r", extent=extent, vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, label="occupancy probability")
    if track:
        xs = [p[1] for p in track]
        ys = [p[2] for p in track]
        ax.plot(xs, ys, color="tab:red", linewidth=1.2, label="odometry")
        ax.legend(loc="upper right")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("occupancy map")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _trajectory_figure(track, path: Path) -> Path:
    ts = [p[0] for p in track]
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for ax, idx, label in zip(axes, (1, 2, 3), ("x [m]", "y [m]", "heading [rad]")):
        ax.plot(ts, [p[idx] for p in track], linewidth=0.9)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[-1].set_xlabel("virtual time [s]")
    axes[0].set_title("dead-reckoned trajectory")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _head_figure(log: SessionLog, path: Path) -> Path | None:
    cmd = [
        (e.stamp, e.payload["command"]["pan"], e.payload["measured"]["pan"])
        for e in log.outbound()
        if e.topic == "ptru_state"
    ]
    if not cmd:
        return None
    ts = [c[0] for c in cmd]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(ts, [c[1] for c in cmd], label="commanded pan", linewidth=0.9)
    ax.plot(ts, [c[2] for c in cmd], label="plant pan", linewidth=0.9)
    ax.set_xlabel("virtual time [s]")
    ax.set_ylabel("pan [rad]")
    ax.grid(alpha=0.3)
    ax.legend()
    ax.set_title("head tracking")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _bus_figure(log: SessionLog, path: Path) -> Path | None:
    rows = [
        (e.stamp, e.payload["bit_times"], e.payload["budget"], e.payload["overrun"])
        for e in log.outbound()
        if e.topic == "bus_cycle"
    ]
    if not rows:
        return None
    ts = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(ts, [r[1] for r in rows], linewidth=0.9, label="bit-times per cycle")
    ax.axhline(rows[0][2], color="tab:red", linestyle="--", label="cycle budget")
    overruns = [t for t, _, _, o in rows if o]
    if overruns:
        ax.scatter(overruns, [rows[0][2]] * len(overruns), color="tab:red", s=12,
                   label="overrun")
    ax.set_xlabel("virtual time [s]")
    ax.set_ylabel("bit-times")
    ax.grid(alpha=0.3)
    ax.legend()
    ax.set_title("device bus load")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
