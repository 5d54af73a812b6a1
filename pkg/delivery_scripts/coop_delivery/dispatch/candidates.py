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

"""Feasible (agent, parcel) candidates and the decisions built from them."""

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from coop_delivery.core.agents import (
    AgentKind,
    AgentRegistry,
    AgentState,
    CourierState,
    GvDelivery,
    GvState,
    Parcel,
    UavState,
)
from coop_delivery.config.schema import Thresholds
from coop_delivery.core.feasibility import CandidatePlan, PlanningContext, plan_for
from coop_delivery.preference.features import FeatureContext

ALL_KINDS = frozenset(AgentKind)


@dataclass(frozen=True)
class DispatchContext:
    planning: PlanningContext
    features: Optional[FeatureContext] = None
    thresholds: Thresholds = Thresholds()
    uav_cost_rate: float = 0.0  # CNY per UAV second
    candidate_pool: Optional[int] = 12

    @classmethod
    def from_config(cls, cfg, area) -> "DispatchContext":
        """:param DeliveryConfig cfg: validated root configuration."""
        return cls(
            planning=PlanningContext.from_config(cfg, area),
            features=FeatureContext.from_config(cfg, area),
            thresholds=cfg.dispatch.thresholds,
            uav_cost_rate=cfg.dispatch.uav_cost_rate,
            candidate_pool=cfg.dispatch.candidate_pool,
        )


@dataclass(frozen=True)
class AssignmentDecision:
    parcel_id: str
    agent_id: str
    kind: AgentKind
    cost: float  # monetized, comparable across kinds
    raw_cost: float  # CNY, or seconds for UAVs
    plan: CandidatePlan


@dataclass
class CandidateRound:
    """What a dispatcher saw for one parcel, reported to observers."""

    parcel: Parcel
    now: float
    candidates: List[Tuple[AgentState, CandidatePlan]] = field(default_factory=list)
    chosen: Optional[CandidatePlan] = None


CandidateObserver = Callable[[CandidateRound], None]


def monetized_cost(plan: CandidatePlan, uav_cost_rate: float) -> float:
    return plan.cost * uav_cost_rate if plan.kind is AgentKind.UAV else plan.cost


def _anchor(agent: AgentState, now: float):
    """Lower bound on when and where the agent can start heading to a new pickup."""
    if isinstance(agent, GvState):
        return agent.location_at(now), now
    anchor = agent.route.anchor
    return anchor.l, max(now, anchor.t) if agent.route.is_idle else anchor.t


def reach_lower_bounds(agents: Sequence[AgentState], target, now: float) -> np.ndarray:
    """Earliest possible arrival at ``target``: Euclidean for UAVs, Manhattan on the ground."""
    if not agents:
        return np.empty(0)
    starts = [_anchor(a, now) for a in agents]
    xy = np.array([s[0] for s in starts], dtype=float)
    t0 = np.array([s[1] for s in starts], dtype=float)
    speed = np.array([a.speed for a in agents], dtype=float)
    delta = np.abs(xy - np.asarray(target, dtype=float))
    dist = np.hypot(delta[:, 0], delta[:, 1]) if isinstance(agents[0], UavState) else delta.sum(axis=1)
    return t0 + dist / speed


def generate_candidates(
    parcel: Parcel,
    registry: AgentRegistry,
    now: float,
    ctx: DispatchContext,
    kinds: Iterable[AgentKind] = ALL_KINDS,
) -> List[Tuple[AgentState, CandidatePlan]]:
    """Feasible plans for ``parcel``, trying only the ``candidate_pool`` nearest agents per kind."""
    kinds = set(kinds)
    deadline = parcel.deadline(ctx.planning.delta_t)
    found = []
    for kind in AgentKind:
        if kind not in kinds:
            continue
        agents = [a for a in registry.of_kind(kind) if not (isinstance(a, GvState) and a.busy)]
        if not agents:
            continue
        bounds = reach_lower_bounds(agents, parcel.l_o, now)
        viable = np.flatnonzero(bounds <= deadline)
        # stable sort keeps id order among equal bounds
        viable = viable[np.argsort(bounds[viable], kind="stable")]
        if ctx.candidate_pool is not None:
            viable = viable[: ctx.candidate_pool]
        for idx in sorted(viable):
            agent = agents[idx]
            plan = plan_for(agent, parcel, now, ctx.planning)
            if plan:
                found.append((agent, plan))
    return found


def decision_for(plan: CandidatePlan, ctx: DispatchContext) -> AssignmentDecision:
    return AssignmentDecision(
        parcel_id=plan.parcel_id,
        agent_id=plan.agent_id,
        kind=plan.kind,
        cost=monetized_cost(plan, ctx.uav_cost_rate),
        raw_cost=plan.cost,
        plan=plan,
    )


def commit(registry: AgentRegistry, plan: CandidatePlan) -> AgentState:
    """Writes the accepted plan into the agent's snapshot."""
    agent = registry[plan.agent_id]
    if isinstance(agent, GvState):
        trips = list(agent.trips)
        if plan.trip is not None:
            trips[agent.trip_index] = plan.trip
        delivery = GvDelivery(plan.parcel_id, plan.mode, plan.route, plan.original_trip, plan.trip)
        updated = replace(agent, trips=tuple(trips), active_delivery=delivery, parked_at=plan.route.anchor.l)
    elif isinstance(agent, (UavState, CourierState)):
        updated = replace(agent, route=plan.route)
    else:
        raise TypeError(f"unknown agent type {type(agent)}")
    registry.replace(updated)
    return updated


def candidate_key(plan: CandidatePlan, ctx: DispatchContext) -> Tuple[float, int, str]:
    return monetized_cost(plan, ctx.uav_cost_rate), plan.kind.rank, plan.agent_id
