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

"""A self-contained simulation input: orders, vehicles, stations and the service area.

On disk a scenario is a directory holding ``scenario.json`` next to
``orders.csv`` and ``trajectories.csv``.
"""

import json
import os
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Sequence, Tuple

from coop_delivery.config.schema import DeliveryConfig, ServiceAreaConfig
from coop_delivery.core.agents import (
    AgentRegistry,
    CourierState,
    GvState,
    Parcel,
    UavState,
    idle_route,
)
from coop_delivery.core.errors import InvalidScenario
from coop_delivery.core.geo import Location, ServiceArea
from coop_delivery.core.logger import logger
from coop_delivery.data.orders import DAY, TRAIN_DAYS, load_orders, orders_by_day, save_orders, split_train_eval
from coop_delivery.data.records import OrderRecord
from coop_delivery.data.trajectories import (
    read_trajectory_records,
    save_trajectories,
    vehicle_records,
    vehicles_from_records,
)

FORMAT = "coop-delivery-scenario"
VERSION = 1
SCENARIO_FILE = "scenario.json"
ORDERS_FILE = "orders.csv"
TRAJECTORIES_FILE = "trajectories.csv"


@dataclass(frozen=True)
class Scenario:
    area: ServiceArea
    orders: Tuple[OrderRecord, ...]
    vehicles: Tuple[GvState, ...]
    uav_stations: Tuple[Location, ...]
    courier_stations: Tuple[Location, ...]
    horizon_start: float = 8 * 3600.0
    horizon_end: float = 20 * 3600.0
    uavs_per_station: int = 25
    couriers_per_station: int = 20
    name: str = "scenario"

    def parcels(self) -> List[Parcel]:
        return [record.to_parcel() for record in self.orders]


def uav_id(station: int, unit: int) -> str:
    return f"uav-{station:02d}-{unit:02d}"


def courier_id(station: int, unit: int) -> str:
    return f"courier-{station:02d}-{unit:02d}"


def build_fleet(scenario: Scenario, cfg: DeliveryConfig = DeliveryConfig()) -> AgentRegistry:
    """Dedicated agents idle at their stations at the horizon start, plus the scenario's vehicles."""
    agents = cfg.agents
    e_max = agents.energy_capacity(cfg.feasibility.energy)
    t0 = scenario.horizon_start
    registry = AgentRegistry()
    for s, loc in enumerate(scenario.uav_stations):
        station = f"uav-station-{s:02d}"
        for k in range(scenario.uavs_per_station):
            registry.add(
                UavState(
                    id=uav_id(s, k),
                    station=station,
                    station_location=loc,
                    location=loc,
                    speed=agents.uav_speed,
                    e_max=e_max,
                    e_remaining=e_max,
                    alpha=agents.alpha,
                    payload_cap=agents.uav_payload_cap,
                    route=idle_route(loc, t0, e_max, station),
                )
            )
    for s, loc in enumerate(scenario.courier_stations):
        station = f"courier-station-{s:02d}"
        for k in range(scenario.couriers_per_station):
            registry.add(
                CourierState(
                    id=courier_id(s, k),
                    station=station,
                    location=loc,
                    speed=agents.courier_speed,
                    n_max=agents.n_max,
                    route=idle_route(loc, t0, station=station),
                )
            )
    for gv in scenario.vehicles:
        registry.add(replace(gv, speed=agents.gv_speed))
    return registry


def validate_scenario(scenario: Scenario) -> None:
    """Raises InvalidScenario on anything the simulation cannot run."""
    area = scenario.area
    if scenario.horizon_end <= scenario.horizon_start:
        raise InvalidScenario("horizon_end must be after horizon_start")
    ids = set()
    last_t = -float("inf")
    for k, order in enumerate(scenario.orders):
        if not order.order_id:
            raise InvalidScenario(f"order #{k} has no id")
        if order.order_id in ids:
            raise InvalidScenario(f"duplicate order id {order.order_id}")
        ids.add(order.order_id)
        if order.t_pickup < last_t:
            raise InvalidScenario(f"orders are not sorted by ordering time at {order.order_id}")
        last_t = order.t_pickup
        if not scenario.horizon_start <= order.t_pickup <= scenario.horizon_end:
            raise InvalidScenario(f"order {order.order_id} at t={order.t_pickup} lies outside the horizon")
        if order.weight <= 0:
            raise InvalidScenario(f"order {order.order_id} has weight {order.weight}")
        for loc in (order.l_pickup, order.l_dropoff):
            if not area.contains(loc):
                raise InvalidScenario(f"order {order.order_id} location {tuple(loc)} lies outside the service area")
    for loc in scenario.uav_stations + scenario.courier_stations:
        if not area.contains(loc):
            raise InvalidScenario(f"station {tuple(loc)} lies outside the service area")
    for loc in scenario.uav_stations:
        if area.in_no_fly_zone(loc):
            raise InvalidScenario(f"UAV station {tuple(loc)} lies in a no-fly zone")
    if scenario.uavs_per_station < 0 or scenario.couriers_per_station < 0:
        raise InvalidScenario("agents per station must be >= 0")
    seen = set()
    for gv in scenario.vehicles:
        if gv.id in seen:
            raise InvalidScenario(f"duplicate vehicle id {gv.id}")
        seen.add(gv.id)
        _validate_vehicle(gv, area)


def _validate_vehicle(gv: GvState, area: ServiceArea) -> None:
    prev_end = -float("inf")
    for trip in gv.trips:
        if trip.end < trip.start or trip.start < prev_end:
            raise InvalidScenario(f"{gv.id}: trips overlap or run backwards at t={trip.start}")
        prev_end = trip.end
        for loc in (trip.origin, trip.destination):
            if not area.contains(loc):
                raise InvalidScenario(f"{gv.id}: trip endpoint {tuple(loc)} lies outside the service area")
    if gv.trace is not None:
        trace = gv.trace
        if (trace.times[1:] < trace.times[:-1]).any():
            raise InvalidScenario(f"{gv.id}: trace timestamps decrease")
        if (
            trace.xs.min() < area.x_min
            or trace.xs.max() > area.x_max
            or trace.ys.min() < area.y_min
            or trace.ys.max() > area.y_max
        ):
            raise InvalidScenario(f"{gv.id}: trace leaves the service area")
    elif gv.home is None:
        raise InvalidScenario(f"{gv.id}: vehicle has neither a trace nor a home location")


def split_scenario(scenario: Scenario, train_days: int = TRAIN_DAYS) -> Tuple[Scenario, Scenario]:
    """Training and evaluation halves of a multi-day scenario.

    The first ``train_days`` days feed preference training and the rest are
    simulated. A scenario that covers a single day, or whose orders all fall on
    one side of the split, is returned as both halves.
    """
    days = orders_by_day(scenario.orders)
    if len(days) < 2:
        return scenario, scenario
    origin = min(r.t_pickup for r in scenario.orders) // DAY * DAY
    train, evaluate = split_train_eval(scenario.orders, train_days, origin)
    if not train or not evaluate:
        logger.warning(
            f"{scenario.name}: orders span {len(days)} days, too few to hold out days after day {train_days}; "
            "training and evaluating on all of them"
        )
        return scenario, scenario
    boundary = origin + train_days * DAY
    # trips over before the evaluation days would only replay the past
    vehicles = tuple(replace(gv, trips=tuple(t for t in gv.trips if t.end >= boundary)) for gv in scenario.vehicles)
    logger.info(f"{scenario.name}: {len(train)} training orders, {len(evaluate)} evaluation orders")
    return (
        replace(scenario, orders=tuple(train), horizon_end=min(scenario.horizon_end, boundary), name=f"{scenario.name}-train"),
        replace(
            scenario,
            orders=tuple(evaluate),
            vehicles=vehicles,
            horizon_start=max(scenario.horizon_start, boundary),
            name=f"{scenario.name}-eval",
        ),
    )


def area_to_dict(area: ServiceArea) -> Dict[str, Any]:
    return ServiceAreaConfig(
        x_min=area.x_min,
        y_min=area.y_min,
        x_max=area.x_max,
        y_max=area.y_max,
        grid_resolution=area.grid_resolution,
        no_fly_zones=[[list(pt) for pt in zone.exterior.coords[:-1]] for zone in area.no_fly_zones],
    ).model_dump()


def _locations(points: Sequence[Sequence[float]]) -> Tuple[Location, ...]:
    return tuple(Location(float(x), float(y)) for x, y in points)


def save_scenario(scenario: Scenario, directory: str) -> str:
    """Writes the scenario directory and returns the path of ``scenario.json``."""
    os.makedirs(directory, exist_ok=True)
    save_orders(scenario.orders, os.path.join(directory, ORDERS_FILE))
    records = [rec for gv in scenario.vehicles for rec in vehicle_records(gv)]
    save_trajectories(records, os.path.join(directory, TRAJECTORIES_FILE))
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "name": scenario.name,
        "area": area_to_dict(scenario.area),
        "horizon": [scenario.horizon_start, scenario.horizon_end],
        "uav_stations": [list(loc) for loc in scenario.uav_stations],
        "courier_stations": [list(loc) for loc in scenario.courier_stations],
        "uavs_per_station": scenario.uavs_per_station,
        "couriers_per_station": scenario.couriers_per_station,
        "orders": ORDERS_FILE,
        "trajectories": TRAJECTORIES_FILE,
    }
    path = os.path.join(directory, SCENARIO_FILE)
    with open(path, "w") as f:
        json.dump(meta, f, indent=2)
    return path


def load_scenario(path: str) -> Scenario:
    """:param str path: a scenario directory or its ``scenario.json``."""
    if os.path.isdir(path):
        path = os.path.join(path, SCENARIO_FILE)
    directory = os.path.dirname(path)
    with open(path) as f:
        meta = json.load(f)
    if meta.get("format") != FORMAT or meta.get("version") != VERSION:
        raise InvalidScenario(f"{path} is not a version {VERSION} scenario file")
    area = ServiceArea.from_config(ServiceAreaConfig.model_validate(meta["area"]))
    orders = load_orders(os.path.join(directory, meta["orders"]), area)
    vehicles = vehicles_from_records(read_trajectory_records(os.path.join(directory, meta["trajectories"]), area))
    start, end = meta["horizon"]
    scenario = Scenario(
        area=area,
        orders=tuple(orders),
        vehicles=tuple(vehicles),
        uav_stations=_locations(meta["uav_stations"]),
        courier_stations=_locations(meta["courier_stations"]),
        horizon_start=float(start),
        horizon_end=float(end),
        uavs_per_station=int(meta["uavs_per_station"]),
        couriers_per_station=int(meta["couriers_per_station"]),
        name=meta.get("name", "scenario"),
    )
    validate_scenario(scenario)
    return scenario
