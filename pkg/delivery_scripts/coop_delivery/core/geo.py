# Copyright (c) 2024, the coop-delivery authors.  All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Planar geometry shared by every agent kind.

Locations are meters east/north of the service-area origin. Ground vehicles and
couriers travel Manhattan distances; UAVs fly the shortest path on an occupancy
grid that avoids no-fly polygons, shortened by line-of-sight string pulling.
"""

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry import LineString, Point, Polygon
from shapely.prepared import prep

from coop_delivery.core.errors import InvalidSpeed, NoRoute

EARTH_RADIUS_M = 6_371_008.8


class Location(NamedTuple):
    x: float
    y: float


def manhattan_distance(a: Location, b: Location) -> float:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def euclidean_distance(a: Location, b: Location) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def travel_time(distance: float, speed: float) -> float:
    if speed <= 0:
        raise InvalidSpeed(f"speed must be > 0 m/s, got {speed}", speed=speed)
    if distance < 0:
        raise ValueError(f"distance must be >= 0 m, got {distance}")
    return distance / speed


@dataclass(frozen=True, eq=False)
class ServiceArea:
    """Axis-aligned service rectangle with optional convex no-fly polygons."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    grid_resolution: float = 50.0
    no_fly_zones: Tuple[Polygon, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.grid_resolution <= 0:
            raise ValueError(f"grid_resolution must be > 0, got {self.grid_resolution}")
        bounds = Polygon(
            [
                (self.x_min, self.y_min),
                (self.x_max, self.y_min),
                (self.x_max, self.y_max),
                (self.x_min, self.y_max),
            ]
        )
        for zone in self.no_fly_zones:
            if not bounds.covers(zone):
                raise ValueError(f"no-fly zone {zone.wkt} lies outside the service area")

    @classmethod
    def from_config(cls, cfg) -> "ServiceArea":
        return cls(
            x_min=cfg.x_min,
            y_min=cfg.y_min,
            x_max=cfg.x_max,
            y_max=cfg.y_max,
            grid_resolution=cfg.grid_resolution,
            no_fly_zones=tuple(Polygon(zone) for zone in cfg.no_fly_zones),
        )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def centroid(self) -> Location:
        return Location((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    def contains(self, loc: Location) -> bool:
        return self.x_min <= loc[0] <= self.x_max and self.y_min <= loc[1] <= self.y_max

    def normalize(self, loc: Location) -> Tuple[float, float]:
        return (loc[0] - self.x_min) / self.width, (loc[1] - self.y_min) / self.height

    def in_no_fly_zone(self, loc: Location) -> bool:
        point = Point(loc)
        return any(zone.contains(point) for zone in self.no_fly_zones)

    @cached_property
    def router(self) -> "FlightRouter":
        return FlightRouter(self)


class FlightRouter:
    """Grid A* between cell centers, followed by line-of-sight shortening.

    Cells whose centers lie within 0.75 cells of a zone are blocked so that any
    segment between adjacent free centers stays clear of every zone.
    """

    _DIRS = (
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, math.sqrt(2)),
        (1, -1, math.sqrt(2)),
        (-1, 1, math.sqrt(2)),
        (-1, -1, math.sqrt(2)),
    )

    def __init__(self, area: ServiceArea, cache_size: int = 200_000) -> None:
        self.area = area
        self.cell = area.grid_resolution
        self.cols = max(1, int(math.ceil(area.width / self.cell)))
        self.rows = max(1, int(math.ceil(area.height / self.cell)))
        # Touching a zone boundary is allowed; crossing its interior is not.
        self._interiors = [prep(zone.buffer(-1e-6)) for zone in area.no_fly_zones]
        self._zones = [prep(zone) for zone in area.no_fly_zones]
        self._cache: Dict[Tuple[Location, Location], float] = {}
        self._cache_size = cache_size
        self.blocked = self._build_blocked_grid() if self._zones else None

    def _build_blocked_grid(self) -> np.ndarray:
        blocked = np.zeros((self.rows, self.cols), dtype=bool)
        margin = 0.75 * self.cell
        for zone in self.area.no_fly_zones:
            inflated = prep(zone.buffer(margin))
            x0, y0, x1, y1 = zone.bounds
            c0, r0 = self.to_cell(Location(x0 - margin, y0 - margin))
            c1, r1 = self.to_cell(Location(x1 + margin, y1 + margin))
            for cy in range(r0, r1 + 1):
                for cx in range(c0, c1 + 1):
                    if not blocked[cy, cx] and inflated.contains(Point(self.to_world((cx, cy)))):
                        blocked[cy, cx] = True
        return blocked

    def to_cell(self, loc: Location) -> Tuple[int, int]:
        cx = int((loc[0] - self.area.x_min) // self.cell)
        cy = int((loc[1] - self.area.y_min) // self.cell)
        return min(max(cx, 0), self.cols - 1), min(max(cy, 0), self.rows - 1)

    def to_world(self, cell: Tuple[int, int]) -> Location:
        return Location(
            self.area.x_min + (cell[0] + 0.5) * self.cell,
            self.area.y_min + (cell[1] + 0.5) * self.cell,
        )

    def line_of_sight(self, a: Location, b: Location) -> bool:
        if a == b:
            return not any(z.contains(Point(a)) for z in self._interiors)
        segment = LineString([a, b])
        return not any(z.intersects(segment) for z in self._interiors)

    def distance(self, a: Location, b: Location) -> float:
        if a == b:
            return 0.0
        if not self._zones or self.line_of_sight(a, b):
            return euclidean_distance(a, b)
        key = (a, b) if a <= b else (b, a)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        length = self._polyline_length(self.path(key[0], key[1]))
        if len(self._cache) >= self._cache_size:
            self._cache.clear()
        self._cache[key] = length
        return length

    def path(self, a: Location, b: Location) -> List[Location]:
        """Shortened waypoint list from ``a`` to ``b`` avoiding every zone."""
        for end in (a, b):
            if any(z.contains(Point(end)) for z in self._interiors):
                raise NoRoute(f"{end} lies inside a no-fly zone", location=list(end))
        start = self._entry_cell(a)
        goal = self._entry_cell(b)
        cells = self._a_star_cells(start, goal)
        if cells is None:
            raise NoRoute(f"no flight path between {a} and {b}")
        points = [a] + [self.to_world(c) for c in cells] + [b]
        return self._string_pull(points)

    def _entry_cell(self, loc: Location) -> Tuple[int, int]:
        """Nearest free cell whose center is visible from ``loc``."""
        origin = self.to_cell(loc)
        queue = [origin]
        seen = {origin}
        head = 0
        while head < len(queue):
            cell = queue[head]
            head += 1
            if not self.blocked[cell[1], cell[0]] and self.line_of_sight(loc, self.to_world(cell)):
                return cell
            for dx, dy, _ in self._DIRS:
                nxt = (cell[0] + dx, cell[1] + dy)
                if self._in_bounds(nxt) and nxt not in seen and len(seen) < 4096:
                    seen.add(nxt)
                    queue.append(nxt)
        raise NoRoute(f"{loc} is enclosed by no-fly zones", location=list(loc))

    def _in_bounds(self, cell: Tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.cols and 0 <= cell[1] < self.rows

    def _a_star_cells(
        self, start: Tuple[int, int], goal: Tuple[int, int]
    ) -> Optional[List[Tuple[int, int]]]:
        if start == goal:
            return [start]
        g_score = {start: 0.0}
        came_from: Dict[Tuple[int, int], Tuple[int, int]] = {}
        closed = set()

        def heuristic(cell: Tuple[int, int]) -> float:
            return math.hypot(cell[0] - goal[0], cell[1] - goal[1])

        counter = 0
        heap = [(heuristic(start), counter, start)]
        while heap:
            _, _, cur = heapq.heappop(heap)
            if cur in closed:
                continue
            if cur == goal:
                cells = [cur]
                while cur in came_from:
                    cur = came_from[cur]
                    cells.append(cur)
                cells.reverse()
                return cells
            closed.add(cur)
            for dx, dy, move_cost in self._DIRS:
                nxt = (cur[0] + dx, cur[1] + dy)
                if not self._in_bounds(nxt) or self.blocked[nxt[1], nxt[0]]:
                    continue
                # no corner cutting
                if dx and dy and (self.blocked[cur[1], cur[0] + dx] or self.blocked[cur[1] + dy, cur[0]]):
                    continue
                tentative = g_score[cur] + move_cost
                if tentative < g_score.get(nxt, math.inf):
                    g_score[nxt] = tentative
                    came_from[nxt] = cur
                    counter += 1
                    heapq.heappush(heap, (tentative + heuristic(nxt), counter, nxt))
        return None

    def _string_pull(self, points: Sequence[Location]) -> List[Location]:
        pulled = [points[0]]
        i = 0
        while i < len(points) - 1:
            j = len(points) - 1
            while j > i + 1 and not self.line_of_sight(points[i], points[j]):
                j -= 1
            pulled.append(points[j])
            i = j
        return pulled

    @staticmethod
    def _polyline_length(points: Iterable[Location]) -> float:
        points = list(points)
        return sum(euclidean_distance(p, q) for p, q in zip(points, points[1:]))


def flight_distance(a: Location, b: Location, area: Optional[ServiceArea] = None) -> float:
    if area is None or not area.no_fly_zones:
        return euclidean_distance(a, b)
    return area.router.distance(Location(*a), Location(*b))


class EquirectangularProjection:
    """Lon/lat <-> local meters, anchored at a reference point."""

    def __init__(self, lon0: float, lat0: float, x0: float = 0.0, y0: float = 0.0) -> None:
        self.lon0 = lon0
        self.lat0 = lat0
        self.x0 = x0
        self.y0 = y0
        self._kx = EARTH_RADIUS_M * math.cos(math.radians(lat0)) * math.pi / 180.0
        self._ky = EARTH_RADIUS_M * math.pi / 180.0

    @classmethod
    def anchored_at(cls, area: ServiceArea, lon0: float, lat0: float) -> "EquirectangularProjection":
        c = area.centroid
        return cls(lon0, lat0, c.x, c.y)

    def forward(self, lon, lat):
        return (
            self.x0 + (np.asarray(lon) - self.lon0) * self._kx,
            self.y0 + (np.asarray(lat) - self.lat0) * self._ky,
        )

    def inverse(self, x, y):
        return (
            self.lon0 + (np.asarray(x) - self.x0) / self._kx,
            self.lat0 + (np.asarray(y) - self.y0) / self._ky,
        )


def project_lonlat(lon, lat, area: ServiceArea, anchor: Tuple[float, float]):
    """Meters of lon/lat points, with ``anchor`` (lon, lat) placed on the area centroid."""
    return EquirectangularProjection.anchored_at(area, *anchor).forward(lon, lat)


def unproject_xy(x, y, area: ServiceArea, anchor: Tuple[float, float]):
    return EquirectangularProjection.anchored_at(area, *anchor).inverse(x, y)
