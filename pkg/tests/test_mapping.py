import heapq
import math
import random

import numpy as np
import pytest

from telesim.locomotion import Pose2D
from telesim.mapping import (
    GridUpdateParams,
    NoPathError,
    OccupancyGrid,
    OccupiedEndpointError,
    OutsideGridError,
    SQRT2,
    plan_path,
    traverse_cells,
    update_map,
)
from telesim.world import LidarParams, load_scenario

ROOM = """
wall -2 -2  2 -2
wall  2 -2  2  2
wall  2  2 -2  2
wall -2  2 -2 -2
start 0 0 0
"""


def room_grid(resolution=0.05) -> OccupancyGrid:
    # half-cell offset keeps the walls (on round coordinates) mid-cell
    return OccupancyGrid(resolution, Pose2D(-2.525, -2.525, 0.0), 101, 101)


def dijkstra_oracle(free: np.ndarray, start, goal):
    """Independent uniform-cost search over the same neighbor rule."""
    h, w = free.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    seen = set()
    while heap:
        d, cur = heapq.heappop(heap)
        if cur in seen:
            continue
        if cur == goal:
            return d
        seen.add(cur)
        cx, cy = cur
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = cx + dx, cy + dy
                if not (0 <= nx < w and 0 <= ny < h) or not free[ny, nx]:
                    continue
                if dx != 0 and dy != 0 and (not free[cy, cx + dx] or not free[cy + dy, cx]):
                    continue
                cost = SQRT2 if dx != 0 and dy != 0 else 1.0
                nd = d + cost
                if nd < dist.get((nx, ny), math.inf):
                    dist[(nx, ny)] = nd
                    heapq.heappush(heap, (nd, (nx, ny)))
    return None


class TestTraverseCells:
    def test_axis_ray(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 10, 10)
        cells = traverse_cells(g, (0.5, 0.5), (4.5, 0.5))
        assert cells == [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]

    def test_diagonal_ray(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 10, 10)
        cells = traverse_cells(g, (0.25, 0.5), (2.25, 1.5))
        assert cells[0] == (0, 0)
        assert cells[-1] == (2, 1)
        # steps only cross one boundary at a time
        for a, b in zip(cells, cells[1:]):
            assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1

    def test_clipped_at_bounds(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 4, 4)
        cells = traverse_cells(g, (0.5, 0.5), (10.5, 0.5))
        assert cells == [(0, 0), (1, 0), (2, 0), (3, 0)]


class TestUpdateMap:
    def test_hit_and_free_direction(self):
        g = OccupancyGrid(0.5, Pose2D(0, 0, 0), 10, 10)
        from telesim.world import Scan

        scan = Scan(0.0, 0.0, 1.0, 0.1, 10.0, (3.0,), 0.0)
        delta = update_map(g, Pose2D(0.25, 0.25, 0.0), scan)
        by_cell = {(ix, iy): v for ix, iy, v in delta}
        assert by_cell[(6, 0)] == pytest.approx(0.85)
        for cell in [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0)]:
            assert by_cell[cell] == pytest.approx(-0.4)

    def test_saturation_clamped(self):
        g = OccupancyGrid(0.5, Pose2D(0, 0, 0), 10, 10)
        from telesim.world import Scan

        scan = Scan(0.0, 0.0, 1.0, 0.1, 10.0, (3.0,), 0.0)
        for _ in range(30):
            update_map(g, Pose2D(0.25, 0.25, 0.0), scan)
        assert g.value(6, 0) == 10.0
        assert g.value(2, 0) == -10.0

    def test_sentinel_beam_no_hit(self):
        g = OccupancyGrid(0.5, Pose2D(0, 0, 0), 10, 10)
        from telesim.world import Scan

        scan = Scan(0.0, 0.0, 1.0, 0.1, 3.0, (3.0,), 0.0)
        delta = update_map(g, Pose2D(0.25, 0.25, 0.0), scan)
        assert all(v < 0 for _, _, v in delta)

    def test_pose_outside_grid(self):
        g = OccupancyGrid(0.5, Pose2D(0, 0, 0), 10, 10)
        from telesim.world import Scan

        scan = Scan(0.0, 0.0, 1.0, 0.1, 3.0, (3.0,), 0.0)
        with pytest.raises(OutsideGridError):
            update_map(g, Pose2D(-1.0, 0.0, 0.0), scan)

    def test_room_coverage(self):
        world = load_scenario(ROOM)
        grid = room_grid()
        params = LidarParams(beam_count=360)
        hits: dict[tuple[int, int], int] = {}
        poses = [
            Pose2D(x, y, 0.0)
            for x in (-1.0, 0.0, 1.0)
            for y in (-1.0, 0.0, 1.0)
        ]
        for pose in poses:
            world.pose = pose
            scan = world.lidar_scan(params)
            update_map(grid, pose, scan)
            for i, rng in enumerate(scan.ranges_m):
                if rng < scan.range_max_m:
                    a = pose.heading_rad + scan.angle_min_rad + i * scan.angle_increment_rad
                    cell = grid.world_to_cell(
                        pose.x_m + rng * math.cos(a), pose.y_m + rng * math.sin(a)
                    )
                    hits[cell] = hits.get(cell, 0) + 1
        # wall cells hit at least three times are confidently occupied
        for cell, n in hits.items():
            if n >= 3:
                assert grid.value(*cell) > 0.0
        # traversed interior cells are free
        for x in (-0.5, 0.0, 0.5):
            for y in (-0.5, 0.0, 0.5):
                assert grid.value(*grid.world_to_cell(x, y)) < 0.0


class TestPlanPath:
    def test_straight_corridor(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 20, 5)
        waypoints, cost = plan_path(g, (0, 2), (19, 2))
        assert cost == pytest.approx(19.0)
        assert waypoints[0] == (0.5, 2.5)
        assert waypoints[-1] == (19.5, 2.5)
        assert all(y == 2.5 for _, y in waypoints)

    def test_through_gap_matches_oracle(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 21, 21)
        g.cells[:, 10] = 5.0
        g.cells[10, 10] = 0.0  # one gap
        waypoints, cost = plan_path(g, (2, 10), (18, 10))
        oracle = dijkstra_oracle(g.cells < 0.5, (2, 10), (18, 10))
        assert cost == pytest.approx(oracle, abs=1e-9)

    def test_goal_enclosed(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 9, 9)
        for dx, dy in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)):
            g.cells[4 + dy, 4 + dx] = 5.0
        with pytest.raises(NoPathError):
            plan_path(g, (0, 0), (4, 4))

    def test_occupied_endpoints(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 5, 5)
        g.cells[0, 0] = 5.0
        with pytest.raises(OccupiedEndpointError):
            plan_path(g, (0, 0), (4, 4))
        with pytest.raises(OccupiedEndpointError):
            plan_path(g, (4, 4), (0, 0))

    def test_random_grids_match_dijkstra(self):
        rng = random.Random(13)
        for trial in range(25):
            g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 32, 32)
            blocked = np.array(
                [[rng.random() < 0.3 for _ in range(32)] for _ in range(32)]
            )
            g.cells[blocked] = 5.0
            g.cells[0, 0] = g.cells[31, 31] = 0.0
            free = g.cells < 0.5
            oracle = dijkstra_oracle(free, (0, 0), (31, 31))
            if oracle is None:
                with pytest.raises(NoPathError):
                    plan_path(g, (0, 0), (31, 31))
            else:
                _, cost = plan_path(g, (0, 0), (31, 31))
                assert cost == pytest.approx(oracle, abs=1e-9)


class TestPGMExport:
    def test_header_and_size(self):
        g = room_grid()
        data = g.to_pgm()
        assert data.startswith(b"P5\n101 101\n255\n")
        assert len(data) == len(b"P5\n101 101\n255\n") + 101 * 101

    def test_value_mapping(self):
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 3, 1)
        g.cells[0, 0] = 5.0
        g.cells[0, 1] = -5.0
        body = g.to_pgm()[len(b"P5\n3 1\n255\n"):]
        assert body == bytes([0, 254, 205])

    def test_sidecar(self):
        g = room_grid()
        text = g.sidecar_text("room.pgm")
        assert "resolution: 0.05" in text
        assert "image: room.pgm" in text

    def test_threshold_uses_wire_rounding(self):
        # 4 hits and 7 frees accumulate to 0.6 + 1e-16; the 9-digit wire
        # rounding snaps it to 0.6, which must not count as occupied
        g = OccupancyGrid(1.0, Pose2D(0, 0, 0), 1, 1)
        g.cells[0, 0] = 0.85 * 4 - 2.8
        assert g.cells[0, 0] > 0.6  # raw float is a hair above
        body = g.to_pgm()[len(b"P5\n1 1\n255\n"):]
        assert body == bytes([205])
