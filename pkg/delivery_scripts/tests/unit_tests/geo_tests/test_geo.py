import math
from collections import deque

import numpy as np
import pytest
from shapely.geometry import box

from coop_delivery.core.errors import InvalidSpeed, NoRoute
from coop_delivery.core.geo import (
    EquirectangularProjection,
    Location,
    ServiceArea,
    euclidean_distance,
    flight_distance,
    manhattan_distance,
    project_lonlat,
    travel_time,
    unproject_xy,
)


def square_area(resolution=10.0):
    return ServiceArea(
        0.0, 0.0, 4000.0, 4000.0, grid_resolution=resolution, no_fly_zones=(box(1500, 1500, 2500, 2500),)
    )


class TestManhattanDistance:
    def test_l1_arithmetic(self):
        assert manhattan_distance(Location(0, 0), Location(3000, 4000)) == 7000

    def test_identity(self):
        assert manhattan_distance(Location(12.5, 7.0), Location(12.5, 7.0)) == 0

    def test_symmetry_and_triangle(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a, b, c = (Location(*rng.uniform(0, 20000, 2)) for _ in range(3))
            assert manhattan_distance(a, b) == manhattan_distance(b, a)
            assert manhattan_distance(a, c) <= manhattan_distance(a, b) + manhattan_distance(b, c) + 1e-9
            assert manhattan_distance(a, b) >= euclidean_distance(a, b)


class TestTravelTime:
    @pytest.mark.parametrize("distance,speed,expected", [(800, 16, 50), (0, 16, 0), (2000, 5, 400)])
    def test_division(self, distance, speed, expected):
        assert travel_time(distance, speed) == expected

    @pytest.mark.parametrize("speed", [0, -1.0])
    def test_invalid_speed(self, speed):
        with pytest.raises(InvalidSpeed):
            travel_time(100, speed)


def grid_path_length(area, a, b):
    """Breadth-first 4-connected path over the router's blocked grid, with entry and exit legs."""
    router = area.router
    start, goal = router.to_cell(a), router.to_cell(b)
    hops = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        if cell == goal:
            break
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (cell[0] + dx, cell[1] + dy)
            if not (0 <= nxt[0] < router.cols and 0 <= nxt[1] < router.rows):
                continue
            if nxt in hops or router.blocked[nxt[1], nxt[0]]:
                continue
            hops[nxt] = hops[cell] + 1
            queue.append(nxt)
    assert goal in hops, f"no grid path from {a} to {b}"
    legs = euclidean_distance(a, router.to_world(start)) + euclidean_distance(router.to_world(goal), b)
    return hops[goal] * router.cell + legs


class TestFlightDistance:
    def test_no_zones_is_euclidean(self):
        area = ServiceArea(0, 0, 20000, 20000)
        assert flight_distance(Location(0, 0), Location(3000, 4000), area) == pytest.approx(5000)

    def test_identity(self):
        area = square_area()
        assert flight_distance(Location(100, 100), Location(100, 100), area) == 0

    def test_clear_segment_ignores_zone(self):
        area = square_area()
        a, b = Location(100, 100), Location(3900, 100)
        assert flight_distance(a, b, area) == pytest.approx(3800)

    def test_square_zone_detour(self):
        area = square_area(resolution=10.0)
        a, b = Location(1000, 2000), Location(3000, 2000)
        # around two corners of the square
        analytic = 2 * math.hypot(500, 500) + 1000
        value = flight_distance(a, b, area)
        assert analytic - 1e-3 <= value <= analytic + 4 * area.grid_resolution, (
            f"detour around the square should be close to {analytic}, got {value}"
        )

    @pytest.mark.parametrize(
        "a, b, analytic",
        [
            ((1000, 2000), (3000, 2000), 2 * math.hypot(500, 500) + 1000),
            ((2000, 1000), (2000, 3000), 2 * math.hypot(500, 500) + 1000),
            ((1000, 1000), (3000, 3000), 2 * math.hypot(500, 1500)),
        ],
    )
    def test_bounded_by_grid_search(self, a, b, analytic):
        area = square_area(resolution=10.0)
        a, b = Location(*a), Location(*b)
        value = flight_distance(a, b, area)
        oracle = grid_path_length(area, a, b)
        assert analytic - 1e-3 <= value, f"{value} undercuts the shortest detour {analytic}"
        assert value <= oracle + 1e-6, f"{value} is longer than the grid path {oracle}"

    def test_zones_never_shorten(self):
        area = square_area(resolution=25.0)
        rng = np.random.default_rng(11)
        for _ in range(20):
            a, b = (Location(*rng.uniform(0, 1400, 2)), Location(*rng.uniform(2600, 4000, 2)))
            with_zone = flight_distance(a, b, area)
            assert with_zone >= euclidean_distance(a, b) - 1e-6

    def test_symmetric(self):
        area = square_area(resolution=25.0)
        a, b = Location(1000, 1900), Location(3000, 2100)
        assert flight_distance(a, b, area) == pytest.approx(flight_distance(b, a, area))

    def test_endpoint_inside_zone(self):
        with pytest.raises(NoRoute):
            flight_distance(Location(2000, 2000), Location(3500, 3500), square_area(resolution=25.0))

    def test_enclosed_endpoint(self):
        walls = (
            box(1800, 1800, 2200, 1850),
            box(1800, 2150, 2200, 2200),
            box(1800, 1800, 1850, 2200),
            box(2150, 1800, 2200, 2200),
        )
        area = ServiceArea(0, 0, 4000, 4000, grid_resolution=20.0, no_fly_zones=walls)
        with pytest.raises(NoRoute):
            flight_distance(Location(2000, 2000), Location(100, 100), area)


class TestServiceArea:
    def test_zone_outside_bounds(self):
        with pytest.raises(ValueError):
            ServiceArea(0, 0, 100, 100, no_fly_zones=(box(90, 90, 150, 150),))

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            ServiceArea(0, 0, 100, 100, grid_resolution=0)

    def test_contains_and_normalize(self):
        area = ServiceArea(0, 0, 20000, 10000)
        assert area.contains(Location(20000, 0))
        assert not area.contains(Location(-1, 0))
        assert area.normalize(Location(5000, 5000)) == (0.25, 0.5)


class TestProjection:
    def test_inverse_round_trip(self):
        proj = EquirectangularProjection(121.47, 31.23, 10000, 10000)
        x, y = proj.forward(121.50, 31.25)
        lon, lat = proj.inverse(x, y)
        assert lon == pytest.approx(121.50, abs=1e-9)
        assert lat == pytest.approx(31.25, abs=1e-9)

    def test_anchor_maps_to_centroid(self):
        area = ServiceArea(0, 0, 20000, 20000)
        proj = EquirectangularProjection.anchored_at(area, 121.47, 31.23)
        x, y = proj.forward(121.47, 31.23)
        assert (float(x), float(y)) == (10000.0, 10000.0)

    def test_one_degree_latitude(self):
        proj = EquirectangularProjection(0.0, 0.0)
        _, y = proj.forward(0.0, 1.0)
        assert float(y) == pytest.approx(111_195, rel=1e-3)

    def test_area_helpers_are_inverse(self):
        area = ServiceArea(0, 0, 20000, 20000)
        lon = np.array([121.40, 121.47, 121.55])
        lat = np.array([31.20, 31.23, 31.30])
        x, y = project_lonlat(lon, lat, area, (121.47, 31.23))
        assert float(x[1]) == pytest.approx(10000.0) and float(y[1]) == pytest.approx(10000.0)
        back_lon, back_lat = unproject_xy(x, y, area, (121.47, 31.23))
        np.testing.assert_allclose(back_lon, lon)
        np.testing.assert_allclose(back_lat, lat)
