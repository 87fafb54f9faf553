"""Known-pose log-odds occupancy mapping and grid path planning.

Each lidar beam decrements the cells it traverses and increments the
cell containing the hit, with values clamped to [-10, 10].  Planning is
A* over the 8-connected free cells with unit/sqrt(2) step costs and the
octile-distance heuristic; corner cutting through diagonally-adjacent
occupied cells is not allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .locomotion import Pose2D
from .world import Scan

__all__ = [
    "GridUpdateParams",
    "NoPathError",
    "OccupancyGrid",
    "OccupiedEndpointError",
    "OutsideGridError",
    "plan_path",
    "update_map",
]

LOG_ODDS_CLAMP = 10.0
SQRT2 = math.sqrt(2.0)


class OutsideGridError(ValueError):
    """Robot pose fell outside the mapped area."""


class NoPathError(ValueError):
    """Start and goal are not connected through free cells."""


class OccupiedEndpointError(ValueError):
    def __init__(self, which: str, cell: tuple[int, int]):
        self.which = which
        self.cell = cell
        super().__init__(f"{which} cell {cell} is occupied")


@dataclass(frozen=True)
class GridUpdateParams:
    log_odds_free: float = -0.4
    log_odds_hit: float = 0.85
    clamp: float = LOG_ODDS_CLAMP


class OccupancyGrid:
    """Axis-aligned log-odds grid; cell (0, 0) sits at the origin corner."""

    def __init__(
        self,
        resolution_m: float,
        origin: Pose2D,
        width_cells: int,
        height_cells: int,
    ):
        if resolution_m <= 0.0:
            raise ValueError("resolution must be > 0")
        if width_cells < 1 or height_cells < 1:
            raise ValueError("grid must be at least 1x1")
        if origin.heading_rad != 0.0:
            raise ValueError("grid must be axis aligned (origin heading 0)")
        self.resolution_m = float(resolution_m)
        self.origin = origin
        self.width_cells = int(width_cells)
        self.height_cells = int(height_cells)
        self.cells = np.zeros((height_cells, width_cells), dtype=float)

    @classmethod
    def covering(
        cls, bbox: tuple[float, float, float, float], resolution_m: float
    ) -> "OccupancyGrid":
        """Smallest grid containing bbox.

        The origin snaps to the resolution lattice shifted by half a cell,
        so walls drawn on round coordinates cross cell interiors instead of
        running along cell boundaries (which would split their evidence
        between two columns).
        """
        xmin, ymin, xmax, ymax = bbox
        ox = (math.floor(xmin / resolution_m) - 0.5) * resolution_m
        oy = (math.floor(ymin / resolution_m) - 0.5) * resolution_m
        w = max(1, int(math.ceil((xmax - ox) / resolution_m)))
        h = max(1, int(math.ceil((ymax - oy) / resolution_m)))
        return cls(resolution_m, Pose2D(ox, oy, 0.0), w, h)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((x - self.origin.x_m) / self.resolution_m)),
            int(math.floor((y - self.origin.y_m) / self.resolution_m)),
        )

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (
            self.origin.x_m + (ix + 0.5) * self.resolution_m,
            self.origin.y_m + (iy + 0.5) * self.resolution_m,
        )

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width_cells and 0 <= iy < self.height_cells

    def value(self, ix: int, iy: int) -> float:
        return float(self.cells[iy, ix])

    def to_pgm(self, occupied_above: float = 0.6, free_below: float = -0.6) -> bytes:
        """Render as a binary PGM: occupied 0, free 254, unknown 205.

        Thresholds compare against values rounded to nine decimals so an
        offline render from wire-quantized cell updates matches exactly.
        Rows are flipped so the top image row is the highest y.
        """
        vals = np.round(self.cells, 9)
        img = np.full(vals.shape, 205, dtype=np.uint8)
        img[vals > occupied_above] = 0
        img[vals < free_below] = 254
        header = f"P5\n{self.width_cells} {self.height_cells}\n255\n".encode("ascii")
        return header + img[::-1, :].tobytes()

    def sidecar_text(self, image_name: str = "map.pgm") -> str:
        return (
            f"image: {image_name}\n"
            f"resolution: {self.resolution_m}\n"
            f"origin: [{self.origin.x_m}, {self.origin.y_m}, 0.0]\n"
            f"width: {self.width_cells}\n"
            f"height: {self.height_cells}\n"
            "negate: 0\n"
            "occupied_thresh: 0.65\n"
            "free_thresh: 0.196\n"
        )


def traverse_cells(
    grid: OccupancyGrid,
    start_xy: tuple[float, float],
    end_xy: tuple[float, float],
) -> list[tuple[int, int]]:
    """Cells crossed from start to end (inclusive), clipped to the grid.

    Amanatides-Woo walk: steps one cell boundary at a time, so the result
    is the exact set of cells the ray passes through.
    """
    res = grid.resolution_m
    x0 = (start_xy[0] - grid.origin.x_m) / res
    y0 = (start_xy[1] - grid.origin.y_m) / res
    x1 = (end_xy[0] - grid.origin.x_m) / res
    y1 = (end_xy[1] - grid.origin.y_m) / res
    ix, iy = int(math.floor(x0)), int(math.floor(y0))
    end_ix, end_iy = int(math.floor(x1)), int(math.floor(y1))
    dx, dy = x1 - x0, y1 - y0

    step_x = 1 if dx > 0 else -1
    step_y = 1 if dy > 0 else -1
    t_max_x = math.inf if dx == 0 else (
        ((ix + (step_x > 0)) - x0) / dx
    )
    t_max_y = math.inf if dy == 0 else (
        ((iy + (step_y > 0)) - y0) / dy
    )
    t_delta_x = math.inf if dx == 0 else abs(1.0 / dx)
    t_delta_y = math.inf if dy == 0 else abs(1.0 / dy)

    out: list[tuple[int, int]] = []
    guard = 4 * (grid.width_cells + grid.height_cells) + 4
    for _ in range(guard):
        if grid.in_bounds(ix, iy):
            out.append((ix, iy))
        elif out:
            break  # left the grid after having been inside
        if ix == end_ix and iy == end_iy:
            break
        if t_max_x < t_max_y:
            t_max_x += t_delta_x
            ix += step_x
        else:
            t_max_y += t_delta_y
            iy += step_y
    return out


def update_map(
    grid: OccupancyGrid,
    pose: Pose2D,
    scan: Scan,
    params: GridUpdateParams | None = None,
) -> list[tuple[int, int, float]]:
    """Apply one scan from a known pose; returns the changed cells.

    Beams at the max-range sentinel free their traversed cells but add no
    hit.  The returned delta holds (ix, iy, new_log_odds) per touched cell.
    """
    params = params or GridUpdateParams()
    if not grid.in_bounds(*grid.world_to_cell(pose.x_m, pose.y_m)):
        raise OutsideGridError(
            f"pose ({pose.x_m:.3f}, {pose.y_m:.3f}) outside the grid"
        )
    lf, lh, clamp = params.log_odds_free, params.log_odds_hit, params.clamp
    width, height = grid.width_cells, grid.height_cells
    res = grid.resolution_m
    gox, goy = grid.origin.x_m, grid.origin.y_m
    flat = grid.cells.ravel()

    # staged[i] is the working value of flat cell i; orig remembers the first
    # value seen so the delta reports only genuinely changed cells
    staged: dict[int, float] = {}
    orig: dict[int, float] = {}
    px, py = pose.x_m, pose.y_m
    x0 = (px - gox) / res
    y0 = (py - goy) / res
    base = scan.angle_min_rad + pose.heading_rad
    floor = math.floor

    def bump(idx: int, amount: float) -> None:
        v = staged.get(idx)
        if v is None:
            v = float(flat[idx])
            orig[idx] = v
        v += amount
        if v > clamp:
            v = clamp
        elif v < -clamp:
            v = -clamp
        staged[idx] = v

    for i, rng in enumerate(scan.ranges_m):
        angle = base + i * scan.angle_increment_rad
        hit = rng < scan.range_max_m
        x1 = x0 + rng * math.cos(angle) / res
        y1 = y0 + rng * math.sin(angle) / res
        ix, iy = int(floor(x0)), int(floor(y0))
        end_ix, end_iy = int(floor(x1)), int(floor(y1))
        dx, dy = x1 - x0, y1 - y0
        step_x = 1 if dx > 0 else -1
        step_y = 1 if dy > 0 else -1
        t_max_x = math.inf if dx == 0 else ((ix + (step_x > 0)) - x0) / dx
        t_max_y = math.inf if dy == 0 else ((iy + (step_y > 0)) - y0) / dy
        t_delta_x = math.inf if dx == 0 else abs(1.0 / dx)
        t_delta_y = math.inf if dy == 0 else abs(1.0 / dy)
        # walk the exact cell sequence (one boundary crossing per step);
        # the ray starts inside the rectangular grid, so leaving it once
        # means no later cell can be inside either
        while True:
            at_end = ix == end_ix and iy == end_iy
            if not (0 <= ix < width and 0 <= iy < height):
                break
            bump(iy * width + ix, lh if (at_end and hit) else lf)
            if at_end:
                break
            if t_max_x < t_max_y:
                t_max_x += t_delta_x
                ix += step_x
            else:
                t_max_y += t_delta_y
                iy += step_y

    changed = [i for i in staged if staged[i] != orig[i]]
    changed.sort()
    for i in changed:
        flat[i] = staged[i]
    return [(i % width, i // width, staged[i]) for i in changed]


def _neighbors(ix: int, iy: int, free: np.ndarray):
    h, w = free.shape
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            nx, ny = ix + dx, iy + dy
            if not (0 <= nx < w and 0 <= ny < h) or not free[ny, nx]:
                continue
            if dx != 0 and dy != 0:
                # no corner cutting between diagonal obstacles
                if not free[iy, ix + dx] or not free[iy + dy, ix]:
                    continue
                yield nx, ny, SQRT2
            else:
                yield nx, ny, 1.0


def _octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return max(dx, dy) + (SQRT2 - 1.0) * min(dx, dy)


def plan_path(
    grid: OccupancyGrid,
    start_cell: tuple[int, int],
    goal_cell: tuple[int, int],
    occupied_threshold: float = 0.5,
) -> tuple[list[tuple[float, float]], float]:
    """Shortest 8-connected path between cell centers; (waypoints, cost).

    Cells with log odds at or above occupied_threshold are blocked.
    """
    for which, cell in (("start", start_cell), ("goal", goal_cell)):
        if not grid.in_bounds(*cell):
            raise ValueError(f"{which} cell {cell} out of bounds")
    free = grid.cells < occupied_threshold
    if not free[start_cell[1], start_cell[0]]:
        raise OccupiedEndpointError("start", start_cell)
    if not free[goal_cell[1], goal_cell[0]]:
        raise OccupiedEndpointError("goal", goal_cell)

    g: dict[tuple[int, int], float] = {start_cell: 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    open_heap: list[tuple[float, int, int, tuple[int, int]]] = []
    heappush(open_heap, (_octile(start_cell, goal_cell), start_cell[0], start_cell[1], start_cell))
    closed: set[tuple[int, int]] = set()

    while open_heap:
        _, _, _, cur = heappop(open_heap)
        if cur in closed:
            continue
        if cur == goal_cell:
            path = [cur]
            while cur in came:
                cur = came[cur]
                path.append(cur)
            path.reverse()
            return [grid.cell_center(*c) for c in path], g[goal_cell]
        closed.add(cur)
        base = g[cur]
        for nx, ny, cost in _neighbors(cur[0], cur[1], free):
            cand = base + cost
            node = (nx, ny)
            if cand < g.get(node, math.inf) - 1e-12:
                g[node] = cand
                came[node] = cur
                heappush(open_heap, (cand + _octile(node, goal_cell), nx, ny, node))
    raise NoPathError(f"no path from {start_cell} to {goal_cell}")
