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

"""Labeled samples for the courier, GV and UAV preference models.

Courier samples come from a decision history of (candidate, accepted) pairs.
GV and UAV samples come from replaying a scenario under the cost-greedy
dispatcher: a candidate is positive iff it was as cheap as the one picked, so
interchangeable agents (idle UAVs at one station) share the positive label.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np
import pandas as pd

from coop_delivery.config.schema import DeliveryConfig, Policy
from coop_delivery.core.agents import AgentKind, AgentState, Parcel
from coop_delivery.core.errors import MalformedRecord
from coop_delivery.core.feasibility import EPS, CandidatePlan
from coop_delivery.core.geo import Location
from coop_delivery.core.logger import logger
from coop_delivery.dispatch.candidates import CandidateRound, DispatchContext, monetized_cost
from coop_delivery.dispatch.policies import CostGreedyPolicy
from coop_delivery.preference.features import (
    FeatureContext,
    FeatureVector,
    N_FEATURES,
    candidate_features,
    current_load,
    make_features,
    remaining_time,
)
from coop_delivery.sim.engine import run_simulation

# raw fields of one courier decision; t_o and t_re in seconds, x/y in meters
HISTORY_FIELDS = ("t_o", "x", "y", "detour_km", "speed", "distance_km", "cost", "load", "t_re", "accepted")


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"labels are binary, got {self.label}")


def as_arrays(samples: Iterable[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    samples = list(samples)
    x = np.array([s.features.to_array() for s in samples], dtype=float).reshape(len(samples), N_FEATURES)
    y = np.array([s.label for s in samples], dtype=float)
    return x, y


def _field(record: Mapping[str, Any], name: str, k: int) -> float:
    value = record.get(name)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise MalformedRecord(f"history record #{k} has no usable {name!r}: {value!r}", record=k) from None
    if not math.isfinite(value):
        raise MalformedRecord(f"history record #{k} has non-finite {name!r}", record=k)
    return value


def _records(history: Union[pd.DataFrame, Iterable[Mapping[str, Any]]]) -> List[Mapping[str, Any]]:
    if isinstance(history, pd.DataFrame):
        return history.to_dict(orient="records")
    return list(history)


def extract_courier_dataset(
    history: Union[pd.DataFrame, Iterable[Mapping[str, Any]]], ctx: FeatureContext
) -> List[LabeledSample]:
    """One sample per courier decision, label 1 iff the courier accepted."""
    samples = []
    for k, record in enumerate(_records(history)):
        values = {name: _field(record, name, k) for name in HISTORY_FIELDS}
        features = make_features(
            ctx,
            t_o=values["t_o"],
            l_o=Location(values["x"], values["y"]),
            detour_m=values["detour_km"] * 1000.0,
            speed=values["speed"],
            distance_m=values["distance_km"] * 1000.0,
            cost=values["cost"],
            load=values["load"],
            t_re=values["t_re"],
        )
        samples.append(LabeledSample(features, int(bool(values["accepted"]))))
    return samples


def history_record(
    agent: AgentState, parcel: Parcel, plan: CandidatePlan, now: float, ctx: FeatureContext, accepted: bool
) -> Dict[str, Any]:
    return {
        "t_o": parcel.t_o,
        "x": parcel.l_o[0],
        "y": parcel.l_o[1],
        "detour_km": plan.detour / 1000.0,
        "speed": agent.speed,
        "distance_km": plan.distance / 1000.0,
        "cost": plan.cost,
        "load": current_load(agent),
        "t_re": remaining_time(agent, plan, now, ctx),
        "accepted": int(accepted),
        "agent": agent.id,
        "parcel": parcel.id,
    }


def synthesize_courier_history(scenario, config: DeliveryConfig = DeliveryConfig(), seed: int = 0) -> pd.DataFrame:
    """Stand-in for a real courier decision log.

    Replays ``scenario`` with couriers only under cost-greedy dispatch and
    records every candidate; the chosen one counts as accepted. Each label is
    then flipped with probability ``preference.label_noise``.
    """
    ctx = DispatchContext.from_config(config, scenario.area)
    rows: List[Dict[str, Any]] = []

    def observe(round_: CandidateRound) -> None:
        for agent, plan in round_.candidates:
            rows.append(history_record(agent, round_.parcel, plan, round_.now, ctx.features, plan is round_.chosen))

    policy = CostGreedyPolicy(ctx, {AgentKind.COURIER}, observe, name="courier_history")
    run_simulation(scenario, policy, config, seed)
    history = pd.DataFrame(rows, columns=list(HISTORY_FIELDS) + ["agent", "parcel"])
    flips = np.random.default_rng(seed).random(len(history)) < config.preference.label_noise
    history["accepted"] = np.where(flips, 1 - history["accepted"], history["accepted"]).astype(int)
    logger.info(f"Synthesized {len(history)} courier decisions ({int(flips.sum())} flipped)")
    return history


def simulate_agent_dataset(
    kind: AgentKind, scenario, config: DeliveryConfig = DeliveryConfig(), seed: int = 0
) -> List[LabeledSample]:
    """Samples for ``kind`` from a cost-greedy replay over all agent kinds."""
    kind = AgentKind(kind)
    if kind is AgentKind.COURIER:
        raise ValueError("courier samples come from the courier history, not from simulation")
    ctx = DispatchContext.from_config(config, scenario.area)
    samples: List[LabeledSample] = []

    def observe(round_: CandidateRound) -> None:
        chosen = round_.chosen
        best = monetized_cost(chosen, ctx.uav_cost_rate) if chosen is not None else None
        for agent, plan in round_.candidates:
            if plan.kind is kind:
                features = candidate_features(agent, round_.parcel, plan, round_.now, ctx.features)
                label = best is not None and monetized_cost(plan, ctx.uav_cost_rate) <= best + EPS
                samples.append(LabeledSample(features, int(label)))

    policy = CostGreedyPolicy(ctx, observer=observe, name=Policy.WITHOUT_TL.value)
    run_simulation(scenario, policy, config, seed)
    positives = sum(s.label for s in samples)
    logger.info(f"Simulated {len(samples)} {kind.value} samples, {positives} positive")
    return samples
