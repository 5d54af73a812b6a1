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

"""Parcels, routes and the three agent kinds, plus the dispatcher's registry."""

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np

from coop_delivery.core.geo import Location


class AgentKind(str, Enum):
    UAV = "uav"
    COURIER = "courier"
    GV = "gv"

    @property
    def rank(self) -> int:
        """Tie-break order used by every dispatcher: UAV before courier before GV."""
        return _KIND_RANK[self]


_KIND_RANK = {AgentKind.UAV: 0, AgentKind.COURIER: 1, AgentKind.GV: 2}


class ParcelStatus(str, Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    DELIVERED = "delivered"
    FAILED = "failed"


_TRANSITIONS = {
    ParcelStatus.PENDING: {ParcelStatus.ASSIGNED, ParcelStatus.FAILED},
    ParcelStatus.ASSIGNED: {ParcelStatus.DELIVERED},
    ParcelStatus.DELIVERED: set(),
    ParcelStatus.FAILED: set(),
}


class GvMode(str, Enum):
    OD_PAIR = "od_pair"
    HALFWAY = "halfway"
    UNOCCUPIED = "unoccupied"


@dataclass(frozen=True)
class Parcel:
    id: str
    t_o: float
    l_o: Location
    l_s: Location
    weight: float
    status: ParcelStatus = ParcelStatus.PENDING
    agent_id: Optional[str] = None
    t_s: Optional[float] = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"parcel {self.id}: weight must be > 0 kg, got {self.weight}")

    def deadline(self, delta_t: float) -> float:
        return self.t_o + delta_t

    @property
    def delivery_time(self) -> Optional[float]:
        return None if self.t_s is None else self.t_s - self.t_o

    def _move(self, status: ParcelStatus, **changes) -> "Parcel":
        if status not in _TRANSITIONS[self.status]:
            raise ValueError(f"parcel {self.id}: illegal transition {self.status.value} -> {status.value}")
        return replace(self, status=status, **changes)

    def assign(self, agent_id: str) -> "Parcel":
        return self._move(ParcelStatus.ASSIGNED, agent_id=agent_id)

    def deliver(self, t_s: float) -> "Parcel":
        if t_s < self.t_o:
            raise ValueError(f"parcel {self.id}: delivered at {t_s} before ordering at {self.t_o}")
        return self._move(ParcelStatus.DELIVERED, t_s=t_s)

    def fail(self) -> "Parcel":
        return self._move(ParcelStatus.FAILED)


@dataclass(frozen=True)
class Waypoint:
    """Arrival at ``l`` at time ``t``.

    ``mu`` is +1 for pickups, -1 for dropoffs and 0 for anchors and station
    returns, which carry no parcels and take no service time.
    """

    t: float
    l: Location
    parcels: Tuple[str, ...] = ()
    mu: int = 0
    payload_after: float = 0.0
    energy_after: Optional[float] = None

    @property
    def is_action(self) -> bool:
        return self.mu != 0

    def departure(self, service_time: float) -> float:
        return self.t + service_time if self.is_action else self.t


@dataclass(frozen=True)
class RoutePlan:
    """Waypoint sequence of one agent.

    ``waypoints[0]`` is the last reached waypoint (the anchor). When present,
    ``waypoints[1]`` is the leg in progress and is never reordered.
    """

    waypoints: Tuple[Waypoint, ...]
    origin_station: Optional[str] = None
    manifest: Mapping[str, Parcel] = field(default_factory=dict)

    @property
    def anchor(self) -> Waypoint:
        return self.waypoints[0]

    @property
    def pending(self) -> Tuple[Waypoint, ...]:
        return self.waypoints[1:]

    @property
    def is_idle(self) -> bool:
        return len(self.waypoints) == 1

    @property
    def completion_time(self) -> float:
        return self.waypoints[-1].t

    def parcel_ids(self) -> List[str]:
        seen = []
        for wp in self.waypoints:
            for pid in wp.parcels:
                if pid not in seen:
                    seen.append(pid)
        return seen

    def dropoff_time(self, parcel_id: str) -> Optional[float]:
        for wp in self.waypoints:
            if wp.mu == -1 and parcel_id in wp.parcels:
                return wp.t
        return None

    def advance(self) -> "RoutePlan":
        """Drops the anchor once ``waypoints[1]`` has been reached."""
        if self.is_idle:
            raise ValueError("cannot advance an idle route")
        done = set(self.waypoints[0].parcels) if self.waypoints[0].mu == -1 else set()
        manifest = {pid: p for pid, p in self.manifest.items() if pid not in done}
        return replace(self, waypoints=self.waypoints[1:], manifest=manifest)


def idle_route(location: Location, t: float, energy: Optional[float] = None, station: Optional[str] = None) -> RoutePlan:
    return RoutePlan(waypoints=(Waypoint(t=t, l=Location(*location), energy_after=energy),), origin_station=station)


def payload_profile(deltas: Iterable[float], start: float = 0.0) -> List[float]:
    """Running payload after each waypoint: n(i) = n(i-1) + mu(i) * |P(i)|."""
    return list(itertools.accumulate(deltas, initial=start))[1:]


def route_payloads(route: RoutePlan, by_weight: bool = False) -> List[float]:
    deltas = []
    for wp in route.pending:
        amount = sum(route.manifest[pid].weight for pid in wp.parcels) if by_weight else len(wp.parcels)
        deltas.append(wp.mu * amount)
    return [route.anchor.payload_after] + payload_profile(deltas, start=route.anchor.payload_after)


@dataclass(frozen=True)
class UavState:
    id: str
    station: str
    station_location: Location
    location: Location
    speed: float
    e_max: float
    e_remaining: float
    alpha: float
    payload_cap: float
    route: RoutePlan

    kind = AgentKind.UAV

    def __post_init__(self):
        if not 0 <= self.e_remaining <= self.e_max + 1e-6:
            raise ValueError(f"{self.id}: remaining energy {self.e_remaining} outside [0, {self.e_max}]")
        if not 0 < self.alpha < 1:
            raise ValueError(f"{self.id}: alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class CourierState:
    id: str
    station: str
    location: Location
    speed: float
    n_max: int
    route: RoutePlan

    kind = AgentKind.COURIER


@dataclass(frozen=True)
class GvTrip:
    """One original (passenger) task."""

    origin: Location
    destination: Location
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start

    def delayed(self, start: float, extra: float = 0.0) -> "GvTrip":
        return replace(self, start=start, end=start + self.duration + extra)


@dataclass(frozen=True, eq=False)
class GvTrace:
    """Position samples of one vehicle, linearly interpolated between records."""

    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray

    def location_at(self, t: float) -> Location:
        return Location(float(np.interp(t, self.times, self.xs)), float(np.interp(t, self.times, self.ys)))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GvTrace)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
        )


@dataclass(frozen=True)
class GvDelivery:
    parcel_id: str
    mode: GvMode
    route: RoutePlan
    original_trip: Optional[GvTrip] = None
    trip: Optional[GvTrip] = None


@dataclass(frozen=True)
class GvState:
    """A crowdsourced vehicle following its own schedule of trips.

    ``trips[trip_index]`` is the trip in progress (``occupied``) or the next one.
    While ``parked_at`` is set the vehicle waits there instead of following its
    trace, e.g. after dropping a parcel.
    """

    id: str
    speed: float
    trips: Tuple[GvTrip, ...] = ()
    trip_index: int = 0
    occupied: bool = False
    active_delivery: Optional[GvDelivery] = None
    trace: Optional[GvTrace] = None
    parked_at: Optional[Location] = None
    home: Optional[Location] = None

    kind = AgentKind.GV

    @property
    def trip(self) -> Optional[GvTrip]:
        return self.trips[self.trip_index] if self.trip_index < len(self.trips) else None

    @property
    def following_trip_start(self) -> float:
        nxt = self.trip_index + 1
        return self.trips[nxt].start if nxt < len(self.trips) else math.inf

    @property
    def busy(self) -> bool:
        return self.occupied or self.active_delivery is not None

    def location_at(self, t: float) -> Location:
        if self.parked_at is not None:
            return self.parked_at
        if self.trace is not None:
            return self.trace.location_at(t)
        if self.home is not None:
            return self.home
        raise ValueError(f"{self.id}: no position source")

    @property
    def route(self) -> RoutePlan:
        if self.active_delivery is not None:
            return self.active_delivery.route
        return RoutePlan(waypoints=())


AgentState = Union[UavState, CourierState, GvState]


@dataclass(frozen=True)
class StatusRecord:
    agent_id: str
    kind: AgentKind
    timestamp: float
    location: Location
    energy: Optional[float] = None
    payload: Optional[float] = None
    occupied: Optional[bool] = None
    trip: Optional[GvTrip] = None
    progress: int = 0  # waypoints still ahead


def status_report(agent: AgentState, now: float) -> StatusRecord:
    if isinstance(agent, GvState):
        return StatusRecord(
            agent_id=agent.id,
            kind=AgentKind.GV,
            timestamp=now,
            location=agent.location_at(now),
            payload=1.0 if agent.active_delivery is not None else 0.0,
            occupied=agent.occupied,
            trip=agent.trip,
            progress=len(agent.route.pending) if agent.active_delivery is not None else 0,
        )
    anchor = agent.route.anchor
    return StatusRecord(
        agent_id=agent.id,
        kind=agent.kind,
        timestamp=now,
        location=agent.location,
        energy=agent.e_remaining if isinstance(agent, UavState) else None,
        payload=anchor.payload_after,
        progress=len(agent.route.pending),
    )


class AgentRegistry:
    """Current agent snapshots, keyed by id, as seen by the dispatcher."""

    def __init__(self, agents: Iterable[AgentState] = ()) -> None:
        self._agents: Dict[str, AgentState] = {}
        self._by_kind: Dict[AgentKind, List[str]] = {kind: [] for kind in AgentKind}
        self.records: Dict[str, StatusRecord] = {}
        self.version = 0
        for agent in agents:
            self.add(agent)

    def add(self, agent: AgentState) -> None:
        if agent.id in self._agents:
            raise ValueError(f"duplicate agent id {agent.id}")
        self._agents[agent.id] = agent
        ids = self._by_kind[agent.kind]
        ids.append(agent.id)
        ids.sort()
        self.version += 1

    def replace(self, agent: AgentState) -> None:
        if agent.id not in self._agents:
            raise KeyError(agent.id)
        self._agents[agent.id] = agent
        self.version += 1

    def report(self, agent: AgentState, now: float) -> StatusRecord:
        self.replace(agent)
        record = status_report(agent, now)
        self.records[agent.id] = record
        return record

    def get(self, agent_id: str) -> AgentState:
        return self._agents[agent_id]

    def __getitem__(self, agent_id: str) -> AgentState:
        return self._agents[agent_id]

    def __contains__(self, agent_id: str) -> bool:
        return agent_id in self._agents

    def __len__(self) -> int:
        return len(self._agents)

    def __iter__(self) -> Iterator[AgentState]:
        for kind in AgentKind:
            for agent_id in self._by_kind[kind]:
                yield self._agents[agent_id]

    def of_kind(self, kind: AgentKind) -> List[AgentState]:
        return [self._agents[i] for i in self._by_kind[kind]]

    def copy(self) -> "AgentRegistry":
        clone = AgentRegistry()
        clone._agents = dict(self._agents)
        clone._by_kind = {k: list(v) for k, v in self._by_kind.items()}
        clone.records = dict(self.records)
        clone.version = self.version
        return clone
