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

"""Exhaustive assignment search used to audit the greedy GAPAR heuristic on small instances."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from coop_delivery.core.agents import (
    AgentKind,
    AgentRegistry,
    CourierState,
    GvState,
    GvTrip,
    Parcel,
    UavState,
    idle_route,
)
from coop_delivery.core.errors import InstanceTooLarge
from coop_delivery.core.feasibility import PlanningContext, plan_for
from coop_delivery.core.geo import Location, manhattan_distance
from coop_delivery.dispatch.candidates import AssignmentDecision, DispatchContext, commit, decision_for
from coop_delivery.dispatch.policies import greedy_gapar

MAX_PARCELS = 8
MAX_AGENTS = 4


@dataclass
class OracleResult:
    decisions: List[AssignmentDecision] = field(default_factory=list)
    count: int = 0
    cost: float = 0.0
    assignment: Tuple[Optional[str], ...] = ()


def brute_force_oracle(
    parcels: Sequence[Parcel],
    registry: AgentRegistry,
    now: float,
    ctx: DispatchContext,
    max_parcels: int = MAX_PARCELS,
    max_agents: int = MAX_AGENTS,
) -> OracleResult:
    """Best assignment by (most parcels, least monetized cost, first in enumeration order).

    Parcels are inserted in arrival order; each agent sees its earlier picks
    when the next one is planned. ``registry`` is left untouched.
    """
    if len(parcels) > max_parcels or len(registry) > max_agents:
        raise InstanceTooLarge(
            f"{len(parcels)} parcels / {len(registry)} agents exceed {max_parcels} / {max_agents}",
            parcels=len(parcels),
            agents=len(registry),
        )
    ordered = sorted(parcels, key=lambda p: (p.t_o, p.id))
    agent_ids = [a.id for a in registry]
    best = OracleResult()

    def search(k: int, snapshot: AgentRegistry, chosen: List[AssignmentDecision], vector: List[Optional[str]], cost: float):
        nonlocal best
        count = len(chosen)
        if count + (len(ordered) - k) < best.count:
            return
        if k == len(ordered):
            if count > best.count or (count == best.count and cost < best.cost - 1e-9) or not best.assignment:
                best = OracleResult(list(chosen), count, cost, tuple(vector))
            return
        parcel = ordered[k]
        for agent_id in agent_ids:
            plan = plan_for(snapshot[agent_id], parcel, now, ctx.planning)
            if not plan:
                continue
            branch = snapshot.copy()
            commit(branch, plan)
            decision = decision_for(plan, ctx)
            search(k + 1, branch, chosen + [decision], vector + [agent_id], cost + decision.cost)
        search(k + 1, snapshot, chosen, vector + [None], cost)

    search(0, registry.copy(), [], [], 0.0)
    return best


@dataclass(frozen=True)
class OracleGap:
    instance: int
    greedy_count: int
    oracle_count: int
    greedy_cost: float
    oracle_cost: float

    @property
    def ratio(self) -> float:
        return self.greedy_count / self.oracle_count if self.oracle_count else 1.0


def random_instance(
    rng: np.random.Generator,
    n_parcels: int,
    n_agents: int,
    kinds: Sequence[AgentKind] = tuple(AgentKind),
    size: float = 4000.0,
    now: float = 0.0,
) -> Tuple[List[Parcel], AgentRegistry]:
    """Small random dispatch round: agents of the given kinds around a ``size`` square."""

    def point() -> Location:
        return Location(*map(float, rng.uniform(0.0, size, 2)))

    registry = AgentRegistry()
    for k in range(n_agents):
        kind = kinds[int(rng.integers(len(kinds)))]
        here = point()
        if kind is AgentKind.UAV:
            e_max = 2400 * 320.9
            registry.add(
                UavState(f"uav-{k:02d}", f"s{k}", here, here, 16.0, e_max, e_max, 0.1, 2.0,
                         idle_route(here, now, e_max, f"s{k}"))
            )
        elif kind is AgentKind.COURIER:
            registry.add(CourierState(f"courier-{k:02d}", f"s{k}", here, 5.0, 5, idle_route(here, now)))
        else:
            origin = point()
            start = now + float(rng.uniform(300.0, 1500.0))
            destination = point()
            trip = GvTrip(origin, destination, start, start + manhattan_distance(origin, destination) / 8.0)
            registry.add(GvState(f"gv-{k:02d}", 8.0, trips=(trip,), home=here))
    parcels = []
    for k in range(n_parcels):
        l_o = point()
        offset = rng.uniform(-1500.0, 1500.0, 2)
        l_s = Location(*map(float, np.clip(np.asarray(l_o) + offset, 0.0, size)))
        parcels.append(Parcel(f"p{k:02d}", now, l_o, l_s, float(rng.uniform(0.2, 1.0))))
    return parcels, registry


def compare_with_oracle(
    n_instances: int = 200,
    seed: int = 0,
    ctx: Optional[DispatchContext] = None,
    max_parcels: int = MAX_PARCELS,
    max_agents: int = MAX_AGENTS,
    kinds: Sequence[AgentKind] = tuple(AgentKind),
    progress: bool = False,
) -> List[OracleGap]:
    """Runs greedy GAPAR and the exhaustive oracle on seeded random instances."""
    ctx = ctx or DispatchContext(planning=PlanningContext(), candidate_pool=None)
    rng = np.random.default_rng(seed)
    gaps = []
    for i in tqdm(range(n_instances), desc="oracle check", disable=not progress):
        n_parcels = int(rng.integers(1, max_parcels + 1))
        n_agents = int(rng.integers(1, max_agents + 1))
        parcels, registry = random_instance(rng, n_parcels, n_agents, kinds)
        oracle = brute_force_oracle(parcels, registry, 0.0, ctx, max_parcels, max_agents)
        greedy = greedy_gapar(parcels, registry.copy(), 0.0, ctx)
        gaps.append(OracleGap(i, len(greedy), oracle.count, sum(d.cost for d in greedy), oracle.cost))
    return gaps


def summarize_gaps(gaps: Sequence[OracleGap]) -> Dict[str, float]:
    ratios = np.array([g.ratio for g in gaps]) if gaps else np.ones(1)
    matched = [g for g in gaps if g.greedy_count == g.oracle_count]
    return {
        "instances": len(gaps),
        "mean_ratio": float(ratios.mean()),
        "min_ratio": float(ratios.min()),
        "max_count_gap": max((g.oracle_count - g.greedy_count for g in gaps), default=0),
        "count_matches": len(matched),
        "mean_cost_gap": float(np.mean([g.greedy_cost - g.oracle_cost for g in matched])) if matched else 0.0,
    }
