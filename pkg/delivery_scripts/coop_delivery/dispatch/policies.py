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

"""Dispatch rounds: the two-stage preference + GAPAR assignment and the baselines."""

from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from coop_delivery.config.schema import Policy
from coop_delivery.core.agents import AgentKind, AgentRegistry, Parcel
from coop_delivery.core.feasibility import plan_for
from coop_delivery.dispatch.candidates import (
    ALL_KINDS,
    AssignmentDecision,
    CandidateObserver,
    CandidateRound,
    DispatchContext,
    candidate_key,
    commit,
    decision_for,
    generate_candidates,
    monetized_cost,
)
from coop_delivery.preference.features import predict_preference


def _by_order_time(parcels: Iterable[Parcel]) -> List[Parcel]:
    return sorted(parcels, key=lambda p: (p.t_o, p.id))


def preference_stage(
    parcels: Sequence[Parcel],
    registry: AgentRegistry,
    now: float,
    ctx: DispatchContext,
    models: Dict[AgentKind, object],
    observer: Optional[CandidateObserver] = None,
) -> Tuple[List[AssignmentDecision], List[Parcel]]:
    """Assigns each parcel to the cheapest candidate whose preference clears its kind's threshold.

    Parcels are handled one at a time in order of arrival, so each commit is
    visible to the next parcel. Parcels without a surviving candidate are returned.
    """
    decisions, remaining = [], []
    for parcel in _by_order_time(parcels):
        candidates = generate_candidates(parcel, registry, now, ctx)
        survivors = [
            plan
            for agent, plan in candidates
            if predict_preference(models[plan.kind], agent, parcel, plan, now, ctx.features)
            > ctx.thresholds.for_kind(plan.kind)
        ]
        chosen = min(survivors, key=lambda plan: candidate_key(plan, ctx)) if survivors else None
        if observer is not None:
            observer(CandidateRound(parcel, now, candidates, chosen))
        if chosen is None:
            remaining.append(parcel)
            continue
        commit(registry, chosen)
        decisions.append(decision_for(chosen, ctx))
    return decisions, remaining


def greedy_gapar(
    parcels: Sequence[Parcel], registry: AgentRegistry, now: float, ctx: DispatchContext
) -> List[AssignmentDecision]:
    """Single cost-ordered scan over all feasible pairs, re-planning each pair at commit time."""
    pairs = []
    by_id = {p.id: p for p in parcels}
    for parcel in _by_order_time(parcels):
        for _, plan in generate_candidates(parcel, registry, now, ctx):
            pairs.append(plan)
    pairs.sort(key=lambda plan: (monetized_cost(plan, ctx.uav_cost_rate), plan.parcel_id, plan.kind.rank, plan.agent_id))
    assigned = set()
    decisions = []
    for plan in pairs:
        if plan.parcel_id in assigned:
            continue
        # the snapshot may have changed since the pair was planned
        current = plan_for(registry[plan.agent_id], by_id[plan.parcel_id], now, ctx.planning)
        if not current:
            continue
        commit(registry, current)
        assigned.add(plan.parcel_id)
        decisions.append(decision_for(current, ctx))
    return decisions


def dispatch_cost_greedy(
    parcels: Sequence[Parcel],
    registry: AgentRegistry,
    now: float,
    ctx: DispatchContext,
    kinds: Iterable[AgentKind] = ALL_KINDS,
    observer: Optional[CandidateObserver] = None,
) -> List[AssignmentDecision]:
    kinds = frozenset(kinds)
    decisions = []
    for parcel in _by_order_time(parcels):
        if not kinds:
            break
        candidates = generate_candidates(parcel, registry, now, ctx, kinds)
        chosen = min((plan for _, plan in candidates), key=lambda plan: candidate_key(plan, ctx), default=None)
        if observer is not None:
            observer(CandidateRound(parcel, now, candidates, chosen))
        if chosen is not None:
            commit(registry, chosen)
            decisions.append(decision_for(chosen, ctx))
    return decisions


def dispatch_on_demand(
    parcels: Sequence[Parcel], registry: AgentRegistry, now: float, ctx: DispatchContext
) -> List[AssignmentDecision]:
    """Picks the agent that can reach the pickup first."""
    decisions = []
    for parcel in _by_order_time(parcels):
        candidates = generate_candidates(parcel, registry, now, ctx)
        chosen = min(
            (plan for _, plan in candidates),
            key=lambda plan: (plan.pickup_time, plan.kind.rank, plan.agent_id),
            default=None,
        )
        if chosen is not None:
            commit(registry, chosen)
            decisions.append(decision_for(chosen, ctx))
    return decisions


class DispatchPolicy:
    name: str = ""

    def __init__(self, ctx: DispatchContext, observer: Optional[CandidateObserver] = None) -> None:
        self.ctx = ctx
        self.observer = observer

    def dispatch(self, parcels: Sequence[Parcel], registry: AgentRegistry, now: float) -> List[AssignmentDecision]:
        raise NotImplementedError


class TwoStagePolicy(DispatchPolicy):
    """Preference stage first, greedy GAPAR on whatever it leaves behind."""

    name = Policy.TWO_STAGE.value

    def __init__(self, ctx: DispatchContext, models: Dict[AgentKind, object], observer=None) -> None:
        super().__init__(ctx, observer)
        missing = set(AgentKind) - set(models)
        if missing:
            raise ValueError(f"two-stage dispatch needs a model per kind, missing {sorted(k.value for k in missing)}")
        self.models = models

    def dispatch(self, parcels, registry, now):
        decisions, remaining = preference_stage(parcels, registry, now, self.ctx, self.models, self.observer)
        return decisions + greedy_gapar(remaining, registry, now, self.ctx)


class CostGreedyPolicy(DispatchPolicy):
    def __init__(self, ctx: DispatchContext, kinds: Iterable[AgentKind] = ALL_KINDS, observer=None, name: str = Policy.WITHOUT_TL.value) -> None:
        super().__init__(ctx, observer)
        self.kinds = frozenset(kinds)
        self.name = name

    def dispatch(self, parcels, registry, now):
        return dispatch_cost_greedy(parcels, registry, now, self.ctx, self.kinds, self.observer)


class OnDemandPolicy(DispatchPolicy):
    name = Policy.ON_DEMAND.value

    def dispatch(self, parcels, registry, now):
        return dispatch_on_demand(parcels, registry, now, self.ctx)


def make_policy(policy: Policy, ctx: DispatchContext, models: Optional[Dict[AgentKind, object]] = None, observer=None) -> DispatchPolicy:
    policy = Policy(policy)
    if policy is Policy.TWO_STAGE:
        if models is None:
            raise ValueError("two_stage dispatch needs trained preference models")
        return TwoStagePolicy(ctx, models, observer)
    if policy is Policy.WITHOUT_TL:
        return CostGreedyPolicy(ctx, ALL_KINDS, observer)
    if policy is Policy.UAV_TAXI:
        return CostGreedyPolicy(ctx, {AgentKind.UAV, AgentKind.GV}, observer, name=Policy.UAV_TAXI.value)
    return OnDemandPolicy(ctx, observer)
