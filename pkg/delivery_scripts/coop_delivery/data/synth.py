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

"""Synthetic scenarios shaped like a city day of instant-delivery demand.

Orders arrive from a two-peak mixture (lunch and dinner bumps over a uniform
base); vehicles alternate idle gaps and random passenger trips.
"""

from typing import Any, Dict, List, Union

import numpy as np
from pydantic import ValidationError

from coop_delivery.config.schema import ScenarioConfig
from coop_delivery.core.errors import InvalidConfig
from coop_delivery.core.geo import Location, ServiceArea, manhattan_distance
from coop_delivery.core.logger import logger
from coop_delivery.data.records import OrderRecord, TrajectoryRecord
from coop_delivery.data.scenario import Scenario, validate_scenario
from coop_delivery.data.trajectories import scaled_count, vehicles_from_records

MAX_REJECTION_ROUNDS = 1000
NOMINAL_COURIER_SPEED = 5.0  # m/s, only used to fill the observed dropoff time


def _coerce(config: Union[ScenarioConfig, Dict[str, Any]]) -> ScenarioConfig:
    if isinstance(config, ScenarioConfig):
        return config
    try:
        return ScenarioConfig.model_validate(config)
    except ValidationError as err:
        raise InvalidConfig(f"invalid scenario config: {err}") from err


def arrival_times(cfg: ScenarioConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted ordering times: Gaussian bumps at the two meal peaks over a uniform base, truncated to the horizon."""
    lo, hi = cfg.horizon_start, cfg.horizon_end
    out = np.empty(n)
    todo = np.arange(n)
    for _ in range(MAX_REJECTION_ROUNDS):
        if todo.size == 0:
            break
        k = todo.size
        peak = rng.random(k) < cfg.peak_share
        centers = np.where(rng.random(k) < 0.5, cfg.lunch_peak, cfg.dinner_peak)
        draws = np.where(peak, rng.normal(centers, cfg.peak_std), rng.uniform(lo, hi, k))
        ok = (draws >= lo) & (draws <= hi)
        out[todo[ok]] = draws[ok]
        todo = todo[~ok]
    if todo.size:
        raise InvalidConfig("arrival peaks lie too far outside the horizon to sample")
    return np.sort(out)


def uniform_points(area: ServiceArea, n: int, rng: np.random.Generator, avoid_zones: bool = True) -> np.ndarray:
    points = np.empty((n, 2))
    todo = np.arange(n)
    for _ in range(MAX_REJECTION_ROUNDS):
        if todo.size == 0:
            return points
        k = todo.size
        draws = np.column_stack([rng.uniform(area.x_min, area.x_max, k), rng.uniform(area.y_min, area.y_max, k)])
        ok = np.array([not (avoid_zones and area.in_no_fly_zone(Location(*p))) for p in draws], dtype=bool)
        points[todo[ok]] = draws[ok]
        todo = todo[~ok]
    raise InvalidConfig("no-fly zones leave no room to place points")


def dropoff_points(area: ServiceArea, pickups: np.ndarray, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the disk of ``radius`` around each pickup, kept inside the area and out of no-fly zones."""
    out = np.empty_like(pickups)
    todo = np.arange(len(pickups))
    for _ in range(MAX_REJECTION_ROUNDS):
        if todo.size == 0:
            return out
        k = todo.size
        r = radius * np.sqrt(rng.random(k))
        theta = rng.uniform(0.0, 2 * np.pi, k)
        draws = pickups[todo] + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
        ok = np.array([area.contains(Location(*p)) and not area.in_no_fly_zone(Location(*p)) for p in draws], dtype=bool)
        out[todo[ok]] = draws[ok]
        todo = todo[~ok]
    raise InvalidConfig("max_delivery_radius leaves no room to place dropoffs")


def synth_orders(cfg: ScenarioConfig, area: ServiceArea, rng: np.random.Generator) -> List[OrderRecord]:
    n = scaled_count(cfg.demand_ratio, cfg.base_order_count)
    times = arrival_times(cfg, n, rng)
    pickups = uniform_points(area, n, rng)
    dropoffs = dropoff_points(area, pickups, cfg.max_delivery_radius, rng)
    weights = rng.uniform(cfg.weight_min, cfg.weight_max, n)
    records = []
    for k in range(n):
        l_o, l_s = Location(*map(float, pickups[k])), Location(*map(float, dropoffs[k]))
        records.append(
            OrderRecord(
                t_pickup=float(times[k]),
                l_pickup=l_o,
                t_dropoff=float(times[k]) + manhattan_distance(l_o, l_s) / NOMINAL_COURIER_SPEED,
                l_dropoff=l_s,
                weight=float(weights[k]),
                order_id=f"p{k + 1:06d}",
            )
        )
    return records


def _trip_destination(area: ServiceArea, origin: np.ndarray, length: float, rng: np.random.Generator) -> np.ndarray:
    # split the Manhattan length over both axes, then clip into the area
    share = rng.random()
    signs = rng.choice([-1.0, 1.0], size=2)
    dest = origin + signs * np.array([share * length, (1 - share) * length])
    return np.clip(dest, [area.x_min, area.y_min], [area.x_max, area.y_max])


def synth_vehicle_records(
    cfg: ScenarioConfig, area: ServiceArea, vehicle_id: str, rng: np.random.Generator
) -> List[TrajectoryRecord]:
    """Idle gaps drawn from an exponential, trips as random OD pairs driven at ``trip_speed``."""
    here = uniform_points(area, 1, rng, avoid_zones=False)[0]
    t = cfg.horizon_start
    records = [TrajectoryRecord(vehicle_id, t, Location(*map(float, here)), False)]
    while True:
        origin = uniform_points(area, 1, rng, avoid_zones=False)[0]
        length = rng.uniform(cfg.trip_min, cfg.trip_max)
        dest = _trip_destination(area, origin, length, rng)
        start = t + rng.exponential(cfg.idle_gap_mean) + np.abs(origin - here).sum() / cfg.trip_speed
        end = start + np.abs(dest - origin).sum() / cfg.trip_speed
        if end > cfg.horizon_end:
            break
        records.append(TrajectoryRecord(vehicle_id, float(start), Location(*map(float, origin)), True, cfg.trip_speed))
        records.append(TrajectoryRecord(vehicle_id, float(end), Location(*map(float, dest)), False))
        here, t = dest, end
    return records


def synth_scenario(config: Union[ScenarioConfig, Dict[str, Any]], seed: int, name: str = "synthetic") -> Scenario:
    """Generates a scenario; the same (config, seed) always yields the same scenario."""
    cfg = _coerce(config)
    area = ServiceArea.from_config(cfg.area)
    rng = np.random.default_rng(seed)
    orders = synth_orders(cfg, area, rng)
    uav_stations = uniform_points(area, cfg.uav_stations, rng)
    courier_stations = uniform_points(area, cfg.courier_stations, rng, avoid_zones=False)
    n_vehicles = scaled_count(cfg.taxi_ratio, cfg.taxi_fleet_size)
    width = len(str(n_vehicles))
    records = []
    for v in range(n_vehicles):
        records.extend(synth_vehicle_records(cfg, area, f"{v:0{width}d}", rng))
    scenario = Scenario(
        area=area,
        orders=tuple(orders),
        vehicles=tuple(vehicles_from_records(records)),
        uav_stations=tuple(Location(*map(float, p)) for p in uav_stations),
        courier_stations=tuple(Location(*map(float, p)) for p in courier_stations),
        horizon_start=cfg.horizon_start,
        horizon_end=cfg.horizon_end,
        uavs_per_station=cfg.uavs_per_station,
        couriers_per_station=cfg.couriers_per_station,
        name=name,
    )
    validate_scenario(scenario)
    logger.info(
        f"Synthesized scenario {name!r}: {len(orders)} orders, {n_vehicles} vehicles, "
        f"{cfg.uav_stations} UAV and {cfg.courier_stations} courier stations"
    )
    return scenario
