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

"""Discrete-event simulation of one delivery day under a dispatch policy."""

from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Union

from tqdm import tqdm

from coop_delivery.config.schema import DeliveryConfig, Policy
from coop_delivery.core.agents import (
    AgentKind,
    AgentRegistry,
    AgentState,
    CourierState,
    GvMode,
    GvState,
    Parcel,
    UavState,
    idle_route,
)
from coop_delivery.core.errors import PlanViolation
from coop_delivery.core.feasibility import EPS, FeasibilityChecker
from coop_delivery.core.geo import euclidean_distance, manhattan_distance
from coop_delivery.core.logger import get_logger, sim_clock
from coop_delivery.data.scenario import Scenario, build_fleet, validate_scenario
from coop_delivery.dispatch.candidates import AssignmentDecision, CandidateObserver, DispatchContext
from coop_delivery.dispatch.policies import DispatchPolicy, make_policy
from coop_delivery.preference.store import ModelBundle
from coop_delivery.sim.events import EventKind, EventQueue
from coop_delivery.sim.metrics import Metrics, MetricsAccumulator, make_record

logger = get_logger(__name__)

Models = Union[ModelBundle, Mapping[AgentKind, Any]]


@dataclass
class SimulationResult:
    metrics: Metrics
    log: List[Dict[str, Any]]
    registry: AgentRegistry
    parcels: Dict[str, Parcel]


class Simulation:
    """Single-threaded event loop over order arrivals, agent motion and dispatch rounds.

    Agents move exactly along their committed plans. Every commit is re-verified
    by a FeasibilityChecker, and every waypoint re-checks deadline, payload and
    energy as it fires; a violation raises PlanViolation.

    :param Scenario scenario: validated input day.
    :param policy: a Policy name or a ready DispatchPolicy.
    :param DeliveryConfig config: run configuration.
    :param int seed: recorded in the log; the engine itself draws no randomness.
    :param models: preference models, required by the two-stage policy.
    :param observer: called with every candidate round, used to harvest training data.
    """

    def __init__(
        self,
        scenario: Scenario,
        policy: Union[Policy, str, DispatchPolicy],
        config: DeliveryConfig = DeliveryConfig(),
        seed: int = 0,
        models: Optional[Models] = None,
        observer: Optional[CandidateObserver] = None,
        progress: bool = False,
    ) -> None:
        validate_scenario(scenario)
        self.scenario = scenario
        self.config = config
        self.seed = seed
        self.progress = progress
        self.ctx = DispatchContext.from_config(config, scenario.area)
        self.checker = FeasibilityChecker(self.ctx.planning)
        if isinstance(models, ModelBundle):
            models = models.as_models()
        self.policy = policy if isinstance(policy, DispatchPolicy) else make_policy(Policy(policy), self.ctx, models, observer)
        self.registry = build_fleet(scenario, config)
        self.delta_t = config.feasibility.delta_t
        self.service = config.agents.service_time
        self.retry_interval = config.dispatch.retry_interval
        self.end_time = scenario.horizon_end + 2 * self.delta_t

        self.queue = EventQueue()
        self.orders = {p.id: p for p in scenario.parcels()}
        self.parcels: Dict[str, Parcel] = {}
        self.waiting: Dict[str, Parcel] = {}
        self.assignments: Dict[str, AssignmentDecision] = {}
        self.epochs: Dict[str, int] = defaultdict(int)
        self.original_trips = {gv.id: gv.trips for gv in self.registry.of_kind(AgentKind.GV)}
        self.delay_bounds: Dict[str, float] = {}
        self.log: List[Dict[str, Any]] = []
        self.metrics = MetricsAccumulator()
        self.v_max = max((agent.speed for agent in self.registry), default=0.0)
        self.retry_scheduled = False
        self.now = scenario.horizon_start

    def record(self, kind: str, entity: str = "", **fields: Any) -> None:
        rec = make_record(self.now, kind, entity, **fields)
        self.metrics.add(rec)
        self.log.append(rec)

    def run(self) -> SimulationResult:
        for parcel in self.orders.values():
            self.queue.push(parcel.t_o, EventKind.ORDER_ARRIVAL, parcel.id)
        for gv in self.registry.of_kind(AgentKind.GV):
            self.reschedule(gv)
        self.queue.push(self.end_time, EventKind.SIM_END)
        handlers = {
            EventKind.GV_TRIP_END: self.on_trip_end,
            EventKind.AGENT_WAYPOINT_ARRIVAL: self.on_arrival,
            EventKind.GV_TRIP_START: self.on_trip_start,
            EventKind.ORDER_ARRIVAL: self.on_order,
            EventKind.DISPATCH_RETRY: self.on_retry,
        }
        with tqdm(total=len(self.orders), desc=f"simulate {self.policy.name}", disable=not self.progress) as bar:
            while True:
                event = self.queue.pop()
                if event is None:
                    break
                if event.kind in (EventKind.AGENT_WAYPOINT_ARRIVAL, EventKind.GV_TRIP_START, EventKind.GV_TRIP_END):
                    if event.epoch != self.epochs[event.entity]:
                        continue  # superseded by a later commit
                self.now = max(self.now, event.time)
                with sim_clock(self.now):
                    if event.kind is EventKind.SIM_END:
                        self.on_end()
                        break
                    handlers[event.kind](event.entity)
                if event.kind is EventKind.ORDER_ARRIVAL:
                    bar.update(1)
        result = self.metrics.result()
        logger.info(
            f"[{self.policy.name}] ordered={result.ordered} delivered={result.delivered} "
            f"failed={result.failed} total_cost={result.total_cost:.2f}"
        )
        return SimulationResult(result, self.log, self.registry, self.parcels)

    # scheduling

    def reschedule(self, agent: AgentState) -> None:
        """Replaces every queued event of ``agent`` with the ones its current state implies."""
        self.epochs[agent.id] += 1
        epoch = self.epochs[agent.id]
        route = agent.route
        if len(route.waypoints) > 1:
            self.queue.push(route.waypoints[1].t, EventKind.AGENT_WAYPOINT_ARRIVAL, agent.id, epoch)
        if isinstance(agent, GvState) and agent.trip is not None:
            if agent.occupied:
                self.queue.push(agent.trip.end, EventKind.GV_TRIP_END, agent.id, epoch)
            else:
                self.queue.push(agent.trip.start, EventKind.GV_TRIP_START, agent.id, epoch)

    def schedule_retry(self) -> None:
        if not self.retry_scheduled:
            self.retry_scheduled = True
            self.queue.push(self.now + self.retry_interval, EventKind.DISPATCH_RETRY)

    # orders and dispatch

    def hopeless(self, parcel: Parcel) -> bool:
        """True once no agent could pick up now and still make the deadline."""
        if self.v_max <= 0:
            return True
        fastest = self.now + self.service + euclidean_distance(parcel.l_o, parcel.l_s) / self.v_max
        return fastest > parcel.deadline(self.delta_t) + EPS

    def fail(self, parcel: Parcel) -> None:
        del self.waiting[parcel.id]
        self.parcels[parcel.id] = parcel.fail()
        self.record("fail", parcel.id, t_o=parcel.t_o)
        logger.debug(f"{parcel.id} failed, ordered at {parcel.t_o:.0f}")

    def on_order(self, parcel_id: str) -> None:
        parcel = self.orders[parcel_id]
        self.parcels[parcel_id] = parcel
        self.waiting[parcel_id] = parcel
        self.record("order", parcel_id, t_o=parcel.t_o, weight=parcel.weight)
        self.dispatch([parcel])
        if parcel_id in self.waiting:
            if self.hopeless(parcel):
                self.fail(parcel)
            else:
                self.schedule_retry()

    def on_retry(self, _: str) -> None:
        self.retry_scheduled = False
        for parcel in list(self.waiting.values()):
            if self.hopeless(parcel):
                self.fail(parcel)
        if self.waiting:
            self.dispatch(list(self.waiting.values()))
        if self.waiting:
            self.schedule_retry()

    def dispatch(self, parcels: List[Parcel]) -> None:
        for decision in self.policy.dispatch(parcels, self.registry, self.now):
            pid = decision.parcel_id
            if pid in self.assignments or pid not in self.waiting:
                raise PlanViolation(f"parcel {pid} assigned twice", parcel=pid)
            parcel = self.waiting.pop(pid)
            self.assignments[pid] = decision
            self.parcels[pid] = parcel.assign(decision.agent_id)
            plan = decision.plan
            self.record(
                "assign",
                pid,
                agent=decision.agent_id,
                agent_kind=decision.kind.value,
                cost=decision.cost,
                raw_cost=decision.raw_cost,
                mode=plan.mode.value if plan.mode is not None else None,
            )
            logger.debug(f"{pid} -> {decision.agent_id} ({decision.kind.value}, cost {decision.cost:.2f})")
            agent = self.registry[decision.agent_id]
            violations = self.checker.violations(agent, plan)
            if violations:
                raise PlanViolation(
                    f"{agent.id} committed an infeasible plan for {pid}: {violations}",
                    agent=agent.id,
                    parcel=pid,
                    violations=violations,
                )
            if isinstance(agent, GvState) and plan.trip is not None:
                self.delay_bounds[agent.id] = self.delay_bound(agent, decision)
            self.reschedule(agent)

    def delay_bound(self, gv: GvState, decision: AssignmentDecision) -> float:
        """Largest trip delay the accepted delivery may cause.

        The detours plus both service stops, plus any lateness the vehicle
        already had towards its trip origin when the parcel was assigned.
        """
        plan = decision.plan
        anchor = plan.route.anchor
        behind = anchor.t + manhattan_distance(anchor.l, plan.original_trip.origin) / gv.speed - plan.original_trip.start
        return (plan.detour + plan.micro_detour) / gv.speed + 2 * self.service + max(0.0, behind)

    # agent motion

    def on_arrival(self, agent_id: str) -> None:
        agent = self.registry[agent_id]
        if isinstance(agent, GvState):
            updated = self.gv_arrival(agent)
        else:
            updated = self.dedicated_arrival(agent)
        self.registry.report(updated, self.now)
        self.reschedule(updated)

    def handle_actions(self, agent: AgentState, route) -> None:
        wp = route.anchor
        for pid in wp.parcels:
            if self.assignments.get(pid) is None or self.assignments[pid].agent_id != agent.id:
                raise PlanViolation(f"{agent.id} handles parcel {pid} it was not assigned", agent=agent.id, parcel=pid)
            if wp.mu == 1:
                self.record("pickup", pid, agent=agent.id)
            elif wp.mu == -1:
                self.deliver(pid, agent)

    def deliver(self, pid: str, agent: AgentState) -> None:
        parcel = self.parcels[pid]
        if self.now > parcel.deadline(self.delta_t) + EPS:
            raise PlanViolation(f"{agent.id} delivers {pid} after its deadline", agent=agent.id, parcel=pid, t=self.now)
        self.parcels[pid] = parcel.deliver(self.now)
        decision = self.assignments[pid]
        self.record(
            "deliver",
            pid,
            agent=agent.id,
            agent_kind=decision.kind.value,
            t_o=parcel.t_o,
            cost=decision.cost,
            raw_cost=decision.raw_cost,
            mode=decision.plan.mode.value if decision.plan.mode is not None else None,
        )

    def dedicated_arrival(self, agent: Union[UavState, CourierState]) -> AgentState:
        route = agent.route.advance()
        wp = route.anchor
        self.handle_actions(agent, route)
        if route.is_idle:
            route = replace(route, manifest={pid: route.manifest[pid] for pid in wp.parcels})
        if isinstance(agent, CourierState):
            if wp.payload_after > agent.n_max + EPS:
                raise PlanViolation(f"{agent.id} carries {wp.payload_after} parcels", agent=agent.id)
            return replace(agent, route=route, location=wp.l)
        energy = wp.energy_after
        if energy is None or energy < -EPS:
            raise PlanViolation(f"{agent.id} ran out of energy", agent=agent.id, energy=energy)
        if wp.payload_after > agent.payload_cap + EPS:
            raise PlanViolation(f"{agent.id} carries {wp.payload_after} kg", agent=agent.id)
        if not wp.is_action:
            # station return: check the reserve, then recharge instantly
            if energy < agent.alpha * agent.e_max - EPS:
                raise PlanViolation(f"{agent.id} returned below its energy reserve", agent=agent.id, energy=energy)
            energy = agent.e_max
            if route.is_idle:
                route = idle_route(wp.l, wp.t, energy, agent.station)
            else:
                route = replace(route, waypoints=(replace(wp, energy_after=energy),) + route.waypoints[1:])
        return replace(agent, route=route, location=wp.l, e_remaining=min(max(energy, 0.0), agent.e_max))

    def gv_arrival(self, gv: GvState) -> GvState:
        delivery = gv.active_delivery
        route = delivery.route.advance()
        wp = route.anchor
        self.handle_actions(gv, route)
        if wp.mu == -1:
            return replace(gv, active_delivery=None, parked_at=None if gv.occupied else wp.l)
        return replace(gv, active_delivery=replace(delivery, route=route), parked_at=None if gv.occupied else wp.l)

    def on_trip_start(self, gv_id: str) -> None:
        gv = self.registry[gv_id]
        delivery = gv.active_delivery
        if delivery is not None:
            if delivery.mode is GvMode.UNOCCUPIED:
                raise PlanViolation(f"{gv_id} starts its trip with an unfinished unoccupied delivery", agent=gv_id)
            if any(wp.mu == 1 for wp in delivery.route.pending):
                raise PlanViolation(f"{gv_id} starts its trip before picking up {delivery.parcel_id}", agent=gv_id)
        updated = replace(gv, occupied=True, parked_at=None)
        self.registry.report(updated, self.now)
        self.reschedule(updated)

    def on_trip_end(self, gv_id: str) -> None:
        gv = self.registry[gv_id]
        original = self.original_trips[gv_id][gv.trip_index]
        delay = gv.trip.end - original.end
        if delay > EPS:
            bound = self.delay_bounds.get(gv_id, 0.0)
            if delay > bound + 1e-6:
                raise PlanViolation(f"{gv_id} trip delayed {delay:.1f}s, more than its deliveries allow", agent=gv_id)
            self.record("gv_trip_end", gv_id, delay=delay)
        self.delay_bounds.pop(gv_id, None)
        on_schedule = delay <= EPS and gv.trace is not None and gv.active_delivery is None
        updated = replace(
            gv,
            occupied=False,
            trip_index=gv.trip_index + 1,
            parked_at=None if on_schedule else gv.trip.destination,
        )
        self.registry.report(updated, self.now)
        self.reschedule(updated)

    def on_end(self) -> None:
        for parcel in list(self.waiting.values()):
            self.fail(parcel)
        self.record("end", seed=self.seed)


def run_simulation(
    scenario: Scenario,
    policy: Union[Policy, str, DispatchPolicy],
    config: DeliveryConfig = DeliveryConfig(),
    seed: int = 0,
    models: Optional[Models] = None,
    observer: Optional[CandidateObserver] = None,
    progress: bool = False,
) -> SimulationResult:
    return Simulation(scenario, policy, config, seed, models, observer, progress).run()
