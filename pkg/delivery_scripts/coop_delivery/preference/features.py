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

"""The 9-slot feature layout shared by courier, GV and UAV preference models."""

from dataclasses import astuple, dataclass, fields
from typing import Optional

import numpy as np

from coop_delivery.core.agents import AgentState, CourierState, GvState, Parcel, UavState
from coop_delivery.core.feasibility import CandidatePlan, power_rate
from coop_delivery.core.geo import Location, ServiceArea

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class FeatureVector:
    t_o: float  # time of day, [0, 1]
    x: float  # pickup x over the service-area width, [0, 1]
    y: float
    detour_km: float
    speed: float  # m/s
    distance_km: float
    cost: float  # CNY, UAV seconds monetized
    load: float  # [0, 1]
    t_re: float  # remaining time over the delivery limit, [0, 1]

    def to_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureContext:
    area: ServiceArea
    delta_t: float = 3600.0
    uav_cost_rate: float = 0.0
    slope: float = 90.3
    intercept: float = 320.9

    @classmethod
    def from_config(cls, cfg, area: ServiceArea) -> "FeatureContext":
        return cls(
            area=area,
            delta_t=cfg.feasibility.delta_t,
            uav_cost_rate=cfg.dispatch.uav_cost_rate,
            slope=cfg.feasibility.energy.slope,
            intercept=cfg.feasibility.energy.intercept,
        )


def _unit(value: float) -> float:
    return min(1.0, max(0.0, value))


def time_of_day(t: float) -> float:
    return (t % SECONDS_PER_DAY) / SECONDS_PER_DAY


def make_features(
    ctx: FeatureContext,
    t_o: float,
    l_o: Location,
    detour_m: float,
    speed: float,
    distance_m: float,
    cost: float,
    load: float,
    t_re: float,
) -> FeatureVector:
    x, y = ctx.area.normalize(l_o)
    return FeatureVector(
        t_o=time_of_day(t_o),
        x=_unit(x),
        y=_unit(y),
        detour_km=detour_m / 1000.0,
        speed=speed,
        distance_km=distance_m / 1000.0,
        cost=cost,
        load=_unit(load),
        t_re=_unit(t_re / ctx.delta_t),
    )


def remaining_time(agent: AgentState, plan: Optional[CandidatePlan], now: float, ctx: FeatureContext) -> float:
    """Courier: time to the last parcel's deadline. GV: time left on its trip. UAV: flying time left."""
    if isinstance(agent, CourierState):
        route = plan.route if plan is not None else agent.route
        drops = [wp for wp in route.waypoints if wp.mu == -1]
        if not drops:
            return 0.0
        last = route.manifest[drops[-1].parcels[-1]]
        return max(0.0, last.deadline(ctx.delta_t) - now)
    if isinstance(agent, GvState):
        trip = agent.trip
        return max(0.0, trip.end - now) if trip is not None else 0.0
    carried = agent.route.anchor.payload_after
    return agent.e_remaining / power_rate(carried, ctx.slope, ctx.intercept)


def current_load(agent: AgentState) -> float:
    if isinstance(agent, CourierState):
        return agent.route.anchor.payload_after / agent.n_max
    if isinstance(agent, GvState):
        return 1.0 if agent.occupied else 0.0
    return agent.route.anchor.payload_after / agent.payload_cap


def candidate_features(
    agent: AgentState, parcel: Parcel, plan: CandidatePlan, now: float, ctx: FeatureContext
) -> FeatureVector:
    cost = plan.cost * ctx.uav_cost_rate if isinstance(agent, UavState) else plan.cost
    return make_features(
        ctx,
        t_o=parcel.t_o,
        l_o=parcel.l_o,
        detour_m=plan.detour,
        speed=agent.speed,
        distance_m=plan.distance,
        cost=cost,
        load=current_load(agent),
        t_re=remaining_time(agent, plan, now, ctx),
    )


def predict_preference(model, agent: AgentState, parcel: Parcel, plan: CandidatePlan, now: float, ctx: FeatureContext) -> float:
    return float(model.forward(candidate_features(agent, parcel, plan, now, ctx).to_array()))
