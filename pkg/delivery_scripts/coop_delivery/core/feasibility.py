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

"""Route construction, feasibility checks and delivery costs per agent kind.

Planners never raise for an infeasible candidate; they return :class:`Infeasible`
naming the violated constraint. All planners are pure functions of the agent
snapshot, the parcel, the current time and the :class:`PlanningContext`.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, FrozenSet, List, Optional, Sequence, Tuple, Union

from coop_delivery.core.agents import (
    AgentKind,
    AgentState,
    CourierState,
    GvMode,
    GvState,
    GvTrip,
    Parcel,
    RoutePlan,
    UavState,
    Waypoint,
)
from coop_delivery.core.errors import NegativeWeight, NoRoute
from coop_delivery.core.geo import Location, ServiceArea, flight_distance, manhattan_distance, travel_time

EPS = 1e-9


class InfeasibleReason(str, Enum):
    ENERGY = "energy"
    DEADLINE = "deadline"
    NO_ROUTE = "no_route"
    PAYLOAD = "payload"
    DETOUR = "detour"
    PICKUP_WINDOW = "pickup_window"
    BUSY = "busy"


@dataclass(frozen=True)
class Infeasible:
    agent_id: str
    reason: InfeasibleReason
    reasons: FrozenSet[InfeasibleReason] = frozenset()
    detail: str = ""

    def __post_init__(self):
        if not self.reasons:
            object.__setattr__(self, "reasons", frozenset({self.reason}))

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CandidatePlan:
    """A feasible way for one agent to carry one parcel.

    ``cost`` is CNY for couriers and GVs and added seconds for UAVs.
    ``detour`` is the extra distance driven or flown to fit the parcel in.
    """

    agent_id: str
    kind: AgentKind
    parcel_id: str
    route: RoutePlan
    cost: float
    pickup_time: float
    delivery_time: float
    distance: float
    detour: float
    added_time: float
    mode: Optional[GvMode] = None
    micro_detour: float = 0.0
    trip: Optional[GvTrip] = None
    original_trip: Optional[GvTrip] = None


PlanOutcome = Union[CandidatePlan, Infeasible]


@dataclass(frozen=True)
class PlanningContext:
    delta_t: float = 3600.0
    service_time: float = 60.0
    slope: float = 90.3
    intercept: float = 320.9
    free_empty_legs: bool = False
    courier_rate_per_km: float = 3.15
    gv_rate_per_km: float = 2.7
    gv_compensation: float = 2.0
    d_max: float = 2000.0
    dt_pu: float = 600.0
    delta_d: float = 1000.0
    area: Optional[ServiceArea] = field(default=None, compare=False)

    @classmethod
    def from_config(cls, cfg, area: Optional[ServiceArea] = None) -> "PlanningContext":
        """:param DeliveryConfig cfg: validated root configuration."""
        feas = cfg.feasibility
        return cls(
            delta_t=feas.delta_t,
            service_time=cfg.agents.service_time,
            slope=feas.energy.slope,
            intercept=feas.energy.intercept,
            free_empty_legs=feas.free_empty_legs,
            courier_rate_per_km=feas.courier_rate_per_km,
            gv_rate_per_km=feas.gv_rate_per_km,
            gv_compensation=feas.gv_compensation,
            d_max=feas.gv_limits.d_max,
            dt_pu=feas.gv_limits.dt_pu,
            delta_d=feas.gv_limits.delta_d,
            area=area,
        )

    def flight(self, a: Location, b: Location) -> float:
        return flight_distance(a, b, self.area)


def power_rate(weight: float, slope: float = 90.3, intercept: float = 320.9) -> float:
    """Hover/cruise power in watts for a UAV carrying ``weight`` kg."""
    if weight < 0:
        raise NegativeWeight(f"weight must be >= 0 kg, got {weight}", weight=weight)
    return slope * weight + intercept


def _leg_weights(route: RoutePlan) -> List[float]:
    weights = [route.waypoints[0].payload_after]
    for wp in route.waypoints[1:]:
        moved = sum(route.manifest[pid].weight for pid in wp.parcels) if wp.parcels else 0.0
        weights.append(max(0.0, weights[-1] + wp.mu * moved))
    return weights


def _leg_energy(weight: float, distance: float, speed: float, ctx: PlanningContext) -> float:
    if ctx.free_empty_legs and weight <= EPS:
        return 0.0
    return power_rate(weight, ctx.slope, ctx.intercept) * travel_time(distance, speed)


def path_energy(route: RoutePlan, v_u: float, ctx: PlanningContext = PlanningContext()) -> float:
    """Joules spent flying ``route``; each leg is charged at the weight departing its start."""
    if len(route.waypoints) < 2:
        raise ValueError("a route needs at least two waypoints")
    weights = _leg_weights(route)
    total = 0.0
    for k, (a, b) in enumerate(zip(route.waypoints, route.waypoints[1:])):
        total += _leg_energy(weights[k], ctx.flight(a.l, b.l), v_u, ctx)
    return total


def with_energy(
    route: RoutePlan,
    e_start: float,
    v_u: float,
    ctx: PlanningContext = PlanningContext(),
    e_max: Optional[float] = None,
) -> RoutePlan:
    """Writes ``energy_after`` on every waypoint.

    Station returns (action-free waypoints after the anchor) record the arrival
    energy; with ``e_max`` given the battery is topped up there before departing.
    """
    weights = _leg_weights(route)
    energy = e_start
    annotated = [replace(route.waypoints[0], energy_after=e_start, payload_after=weights[0])]
    for k, (a, b) in enumerate(zip(route.waypoints, route.waypoints[1:])):
        energy -= _leg_energy(weights[k], ctx.flight(a.l, b.l), v_u, ctx)
        annotated.append(replace(b, energy_after=energy, payload_after=weights[k + 1]))
        if e_max is not None and not b.is_action:
            energy = e_max
    return replace(route, waypoints=tuple(annotated))


@dataclass
class _Insertion:
    route: RoutePlan
    added_time: float
    added_distance: float
    reason: Optional[InfeasibleReason] = None


def _split_route(route: RoutePlan, now: float, service: float, keep_station_return: bool):
    """Returns (fixed prefix, movable tail, old completion time)."""
    if route.is_idle:
        w0 = route.anchor
        anchor = Waypoint(
            t=max(now, w0.departure(service)),
            l=w0.l,
            payload_after=w0.payload_after,
            energy_after=w0.energy_after,
        )
        return [anchor], [], anchor.t
    prefix = list(route.waypoints[:2])
    tail = list(route.waypoints[2:])
    if keep_station_return and tail and not tail[-1].is_action:
        tail = tail[:-1]
    return prefix, tail, route.completion_time


def _insert_cheapest(
    route: RoutePlan,
    parcel: Parcel,
    now: float,
    speed: float,
    distance: Callable[[Location, Location], float],
    ctx: PlanningContext,
    capacity: float,
    by_weight: bool,
    check: Callable[[RoutePlan], Optional[InfeasibleReason]] = lambda r: None,
    station: Optional[Location] = None,
) -> Tuple[Optional[_Insertion], Optional[_Insertion]]:
    """Tries every (pickup, dropoff) position pair behind the leg in progress.

    Returns the cheapest feasible insertion and the cheapest rejected one.
    """
    service = ctx.service_time
    prefix, tail, old_completion = _split_route(route, now, service, station is not None)
    old_route = prefix + tail
    if station is not None and len(old_route) > 1:
        old_route.append(Waypoint(t=0.0, l=station))
    old_distance = _route_length(old_route, distance)
    manifest = dict(route.manifest)
    manifest[parcel.id] = parcel
    pickup = Waypoint(t=0.0, l=parcel.l_o, parcels=(parcel.id,), mu=1)
    dropoff = Waypoint(t=0.0, l=parcel.l_s, parcels=(parcel.id,), mu=-1)
    best: Optional[_Insertion] = None
    best_rejected: Optional[_Insertion] = None
    for i in range(len(tail) + 1):
        with_pickup = tail[:i] + [pickup] + tail[i:]
        for j in range(i + 1, len(with_pickup) + 1):
            actions = with_pickup[:j] + [dropoff] + with_pickup[j:]
            if station is not None:
                actions.append(Waypoint(t=0.0, l=station))
            waypoints, travelled = _propagate(prefix, actions, speed, distance, service, manifest, by_weight)
            candidate = RoutePlan(waypoints=tuple(waypoints), origin_station=route.origin_station, manifest=manifest)
            added_time = waypoints[-1].t - old_completion
            insertion = _Insertion(candidate, added_time, travelled - old_distance)
            if any(wp.payload_after > capacity + EPS for wp in waypoints):
                insertion.reason = InfeasibleReason.PAYLOAD
            else:
                insertion.reason = _check_deadlines(candidate, ctx.delta_t) or check(candidate)
            if insertion.reason is None:
                if best is None or added_time < best.added_time - EPS:
                    best = insertion
            elif best_rejected is None or added_time < best_rejected.added_time - EPS:
                best_rejected = insertion
    return best, best_rejected


def _propagate(prefix, actions, speed, distance, service, manifest, by_weight) -> Tuple[List[Waypoint], float]:
    waypoints = list(prefix)
    travelled = _route_length(prefix, distance)
    payload = prefix[-1].payload_after
    for wp in actions:
        prev = waypoints[-1]
        leg = distance(prev.l, wp.l)
        travelled += leg
        moved = sum(manifest[pid].weight for pid in wp.parcels) if by_weight else len(wp.parcels)
        payload = max(0.0, payload + wp.mu * moved)
        waypoints.append(replace(wp, t=prev.departure(service) + travel_time(leg, speed), payload_after=payload))
    return waypoints, travelled


def _route_length(waypoints: Sequence[Waypoint], distance) -> float:
    return sum(distance(a.l, b.l) for a, b in zip(waypoints, waypoints[1:]))


def _check_deadlines(route: RoutePlan, delta_t: float) -> Optional[InfeasibleReason]:
    for wp in route.waypoints[1:]:
        if wp.mu == -1:
            for pid in wp.parcels:
                if wp.t > route.manifest[pid].deadline(delta_t) + EPS:
                    return InfeasibleReason.DEADLINE
    return None


def _energy_check(uav: UavState, ctx: PlanningContext) -> Callable[[RoutePlan], Optional[InfeasibleReason]]:
    reserve = uav.alpha * uav.e_max

    def check(route: RoutePlan) -> Optional[InfeasibleReason]:
        e_start = route.anchor.energy_after if route.anchor.energy_after is not None else uav.e_remaining
        try:
            annotated = with_energy(route, e_start, uav.speed, ctx, e_max=uav.e_max)
        except NoRoute:
            return InfeasibleReason.NO_ROUTE
        for wp in annotated.waypoints[1:]:
            if not wp.is_action and wp.energy_after < reserve - EPS:
                return InfeasibleReason.ENERGY
        return None

    return check


def plan_uav_insertion(uav: UavState, p: Parcel, now: float, ctx: PlanningContext = PlanningContext()) -> PlanOutcome:
    """Cheapest insertion into a UAV sortie; cost is the added completion time in seconds."""
    try:
        best, rejected = _insert_cheapest(
            uav.route,
            p,
            now,
            uav.speed,
            ctx.flight,
            ctx,
            capacity=uav.payload_cap,
            by_weight=True,
            check=_energy_check(uav, ctx),
            station=uav.station_location,
        )
    except NoRoute as err:
        return Infeasible(uav.id, InfeasibleReason.NO_ROUTE, detail=err.message)
    if best is None:
        return Infeasible(uav.id, rejected.reason)
    route = best.route
    e_start = route.anchor.energy_after if route.anchor.energy_after is not None else uav.e_remaining
    route = with_energy(route, e_start, uav.speed, ctx, e_max=uav.e_max)
    distance = ctx.flight(p.l_o, p.l_s)
    return CandidatePlan(
        agent_id=uav.id,
        kind=AgentKind.UAV,
        parcel_id=p.id,
        route=route,
        cost=max(0.0, best.added_time),
        pickup_time=_action_time(route, p.id, 1),
        delivery_time=_action_time(route, p.id, -1),
        distance=distance,
        detour=max(0.0, best.added_distance - distance),
        added_time=max(0.0, best.added_time),
    )


def plan_courier_insertion(courier: CourierState, p: Parcel, now: float, ctx: PlanningContext = PlanningContext()) -> PlanOutcome:
    """Cheapest insertion into a courier route; cost is the per-km fee of the delivery distance."""
    best, rejected = _insert_cheapest(
        courier.route,
        p,
        now,
        courier.speed,
        manhattan_distance,
        ctx,
        capacity=courier.n_max,
        by_weight=False,
    )
    if best is None:
        return Infeasible(courier.id, rejected.reason)
    distance = manhattan_distance(p.l_o, p.l_s)
    return CandidatePlan(
        agent_id=courier.id,
        kind=AgentKind.COURIER,
        parcel_id=p.id,
        route=best.route,
        cost=courier_cost(distance, ctx),
        pickup_time=_action_time(best.route, p.id, 1),
        delivery_time=_action_time(best.route, p.id, -1),
        distance=distance,
        detour=max(0.0, best.added_distance - distance),
        added_time=best.added_time,
    )


def courier_cost(distance_m: float, ctx: PlanningContext = PlanningContext()) -> float:
    return ctx.courier_rate_per_km * distance_m / 1000.0


def gv_cost(mode: GvMode, distance_m: float, ctx: PlanningContext = PlanningContext()) -> float:
    """Passenger-carrying modes pay the doubled unit price; unoccupied driving does not."""
    factor = 1.0 if mode is GvMode.UNOCCUPIED else ctx.gv_compensation
    return factor * ctx.gv_rate_per_km * distance_m / 1000.0


def _action_time(route: RoutePlan, parcel_id: str, mu: int) -> float:
    for wp in route.waypoints:
        if wp.mu == mu and parcel_id in wp.parcels:
            return wp.t
    raise ValueError(f"parcel {parcel_id} has no mu={mu} waypoint")


def _gv_route(gv: GvState, p: Parcel, start: Location, now: float, t_pu: float, t_s: float) -> RoutePlan:
    return RoutePlan(
        waypoints=(
            Waypoint(t=now, l=start),
            Waypoint(t=t_pu, l=p.l_o, parcels=(p.id,), mu=1, payload_after=1.0),
            Waypoint(t=t_s, l=p.l_s, parcels=(p.id,), mu=-1, payload_after=0.0),
        ),
        manifest={p.id: p},
    )


def plan_gv_delivery(gv: GvState, p: Parcel, now: float, ctx: PlanningContext = PlanningContext()) -> PlanOutcome:
    """Evaluates OD-pair, Halfway and Unoccupied delivery and keeps the cheapest feasible one."""
    if gv.busy:
        return Infeasible(gv.id, InfeasibleReason.BUSY)
    here = gv.location_at(now)
    options: List[CandidatePlan] = []
    reasons: List[InfeasibleReason] = []
    for outcome in (
        _gv_with_trip(gv, p, now, here, GvMode.OD_PAIR, ctx),
        _gv_with_trip(gv, p, now, here, GvMode.HALFWAY, ctx),
        _gv_unoccupied(gv, p, now, here, ctx),
    ):
        if outcome:
            options.append(outcome)
        else:
            reasons.append(outcome.reason)
    if not options:
        return Infeasible(gv.id, reasons[0], frozenset(reasons))
    # stable min keeps the case order on equal cost
    return min(options, key=lambda c: c.cost)


def _gv_with_trip(gv: GvState, p: Parcel, now: float, here: Location, mode: GvMode, ctx: PlanningContext) -> PlanOutcome:
    trip = gv.trip
    if trip is None or trip.start < now:
        return Infeasible(gv.id, InfeasibleReason.BUSY, detail="no upcoming trip")
    v, svc = gv.speed, ctx.service_time
    # collinear detours cancel to tiny negatives in floating point
    pickup_detour = max(
        0.0,
        manhattan_distance(here, p.l_o) + manhattan_distance(p.l_o, trip.origin) - manhattan_distance(here, trip.origin),
    )
    if mode is GvMode.OD_PAIR:
        drop_leg = manhattan_distance(trip.destination, p.l_s)
        detour, micro = pickup_detour + drop_leg, 0.0
    else:
        detour = pickup_detour
        micro = max(
            0.0,
            manhattan_distance(trip.origin, p.l_s)
            + manhattan_distance(p.l_s, trip.destination)
            - manhattan_distance(trip.origin, trip.destination),
        )
    if detour > ctx.d_max + EPS:
        return Infeasible(gv.id, InfeasibleReason.DETOUR)
    if micro > ctx.delta_d + EPS:
        return Infeasible(gv.id, InfeasibleReason.DETOUR)
    t_pu = now + manhattan_distance(here, p.l_o) / v
    if t_pu > p.t_o + ctx.dt_pu + EPS:
        return Infeasible(gv.id, InfeasibleReason.PICKUP_WINDOW)
    start = max(trip.start, t_pu + svc + manhattan_distance(p.l_o, trip.origin) / v)
    if mode is GvMode.OD_PAIR:
        new_trip = trip.delayed(start)
        t_s = new_trip.end + drop_leg / v
        completion = t_s + svc
    else:
        new_trip = trip.delayed(start, extra=micro / v + svc)
        t_s = start + manhattan_distance(trip.origin, p.l_s) / v
        # recorded trips can outpace the nominal speed, so the drop may land after the trip end
        completion = max(new_trip.end, t_s + svc)
    if t_s > p.deadline(ctx.delta_t) + EPS:
        return Infeasible(gv.id, InfeasibleReason.DEADLINE)
    if completion > gv.following_trip_start + EPS:
        return Infeasible(gv.id, InfeasibleReason.DEADLINE, detail="would delay the following trip")
    return CandidatePlan(
        agent_id=gv.id,
        kind=AgentKind.GV,
        parcel_id=p.id,
        route=_gv_route(gv, p, here, now, t_pu, t_s),
        cost=gv_cost(mode, detour + micro, ctx),
        pickup_time=t_pu,
        delivery_time=t_s,
        distance=manhattan_distance(p.l_o, p.l_s),
        detour=detour,
        added_time=new_trip.end - trip.end,
        mode=mode,
        micro_detour=micro,
        trip=new_trip,
        original_trip=trip,
    )


def _gv_unoccupied(gv: GvState, p: Parcel, now: float, here: Location, ctx: PlanningContext) -> PlanOutcome:
    v, svc = gv.speed, ctx.service_time
    reach = manhattan_distance(here, p.l_o)
    carry = manhattan_distance(p.l_o, p.l_s)
    t_pu = now + reach / v
    t_s = t_pu + svc + carry / v
    if t_s > p.deadline(ctx.delta_t) + EPS:
        return Infeasible(gv.id, InfeasibleReason.DEADLINE)
    trip = gv.trip
    if trip is not None and t_s + svc + manhattan_distance(p.l_s, trip.origin) / v > trip.start + EPS:
        return Infeasible(gv.id, InfeasibleReason.BUSY, detail="next trip starts too soon")
    return CandidatePlan(
        agent_id=gv.id,
        kind=AgentKind.GV,
        parcel_id=p.id,
        route=_gv_route(gv, p, here, now, t_pu, t_s),
        cost=gv_cost(GvMode.UNOCCUPIED, reach + carry, ctx),
        pickup_time=t_pu,
        delivery_time=t_s,
        distance=carry,
        detour=reach + carry,
        added_time=0.0,
        mode=GvMode.UNOCCUPIED,
    )


def plan_for(agent: AgentState, p: Parcel, now: float, ctx: PlanningContext = PlanningContext()) -> PlanOutcome:
    if isinstance(agent, UavState):
        return plan_uav_insertion(agent, p, now, ctx)
    if isinstance(agent, CourierState):
        return plan_courier_insertion(agent, p, now, ctx)
    return plan_gv_delivery(agent, p, now, ctx)


class FeasibilityChecker:
    """Re-verifies a committed plan from scratch, independently of the planners.

    :param PlanningContext ctx: limits and cost constants.
    """

    def __init__(self, ctx: PlanningContext = PlanningContext()) -> None:
        self.ctx = ctx

    def violations(self, agent: AgentState, plan: CandidatePlan) -> List[str]:
        found = self._precedence(plan.route) + self._deadlines(plan.route)
        if isinstance(agent, UavState):
            found += self._timing(plan.route, agent.speed, self.ctx.flight)
            found += self._uav(agent, plan)
        elif isinstance(agent, CourierState):
            found += self._timing(plan.route, agent.speed, manhattan_distance)
            loads = [wp.payload_after for wp in plan.route.waypoints]
            if max(loads) > agent.n_max + EPS:
                found.append("payload")
            if loads[-1] != 0:
                found.append("payload_not_emptied")
        else:
            found += self._gv(agent, plan)
        if plan.cost < 0:
            found.append("negative_cost")
        return found

    def _precedence(self, route: RoutePlan) -> List[str]:
        dropped = set()
        for wp in reversed(route.waypoints):
            if wp.mu == -1:
                if dropped & set(wp.parcels):
                    return ["precedence"]
                dropped.update(wp.parcels)
            elif wp.mu == 1:
                # every pickup needs exactly one later dropoff
                if not set(wp.parcels) <= dropped:
                    return ["precedence"]
        return []

    def _deadlines(self, route: RoutePlan) -> List[str]:
        for wp in route.waypoints:
            if wp.mu == -1:
                for pid in wp.parcels:
                    parcel = route.manifest[pid]
                    if wp.t - parcel.t_o > self.ctx.delta_t + EPS:
                        return ["deadline"]
        return []

    def _timing(self, route: RoutePlan, speed: float, distance) -> List[str]:
        for a, b in zip(route.waypoints, route.waypoints[1:]):
            if b.t + 1e-6 < a.departure(self.ctx.service_time) + distance(a.l, b.l) / speed:
                return ["timing"]
        return []

    def _uav(self, uav: UavState, plan: CandidatePlan) -> List[str]:
        found = []
        route = plan.route
        if route.waypoints[-1].is_action or route.waypoints[-1].l != uav.station_location:
            found.append("station_return")
        carried = route.anchor.payload_after
        energy = route.anchor.energy_after if route.anchor.energy_after is not None else uav.e_remaining
        for a, b in zip(route.waypoints, route.waypoints[1:]):
            if carried > uav.payload_cap + EPS:
                found.append("payload")
            leg = self.ctx.flight(a.l, b.l)
            if not (self.ctx.free_empty_legs and carried <= EPS):
                energy -= (self.ctx.slope * carried + self.ctx.intercept) * leg / uav.speed
            carried += b.mu * sum(route.manifest[pid].weight for pid in b.parcels)
            if not b.is_action:
                if energy < uav.alpha * uav.e_max - EPS:
                    found.append("energy")
                energy = uav.e_max
        return found

    def _gv(self, gv: GvState, plan: CandidatePlan) -> List[str]:
        ctx = self.ctx
        found = []
        pickup, dropoff = plan.route.waypoints[1], plan.route.waypoints[2]
        parcel = plan.route.manifest[plan.parcel_id]
        if plan.mode is not GvMode.UNOCCUPIED:
            if plan.detour > ctx.d_max + EPS:
                found.append("detour")
            if pickup.t - parcel.t_o > ctx.dt_pu + EPS:
                found.append("pickup_window")
            if plan.micro_detour > ctx.delta_d + EPS:
                found.append("micro_detour")
            if plan.mode is GvMode.OD_PAIR and plan.micro_detour != 0:
                found.append("micro_detour")
            trip = plan.original_trip
            if plan.trip is None or trip is None or plan.trip.start < trip.start - EPS:
                found.append("trip")
            elif plan.trip.start + EPS < pickup.t + ctx.service_time + manhattan_distance(pickup.l, trip.origin) / gv.speed:
                found.append("trip")
            if plan.trip is not None and trip is not None:
                # the trip itself runs at its recorded pace, the legs off it at nominal speed
                if plan.mode is GvMode.OD_PAIR:
                    earliest = plan.trip.end + manhattan_distance(trip.destination, dropoff.l) / gv.speed
                else:
                    earliest = plan.trip.start + manhattan_distance(trip.origin, dropoff.l) / gv.speed
                if dropoff.t + EPS < earliest:
                    found.append("timing")
        elif dropoff.t + EPS < pickup.t + ctx.service_time + manhattan_distance(pickup.l, dropoff.l) / gv.speed:
            found.append("timing")
        expected = gv_cost(plan.mode, plan.detour + plan.micro_detour, ctx)
        if not math.isclose(plan.cost, expected, rel_tol=1e-9, abs_tol=1e-12):
            found.append("cost")
        return found
