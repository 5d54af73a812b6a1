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

"""Experiment protocol: train the preference models, then sweep policies over a parameter axis."""

import json
import os
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import dask
import numpy as np
import pandas as pd
from pytablewriter import MarkdownTableWriter
from tqdm import tqdm

from coop_delivery.config.schema import SWEEP_AXES, DeliveryConfig, ExperimentSpec, Policy, ScenarioConfig
from coop_delivery.core.agents import AgentKind
from coop_delivery.core.logger import logger
from coop_delivery.data.scenario import Scenario, load_scenario, split_scenario
from coop_delivery.data.synth import synth_scenario
from coop_delivery.data.trajectories import sample_vehicles, scaled_count
from coop_delivery.preference.datasets import (
    as_arrays,
    extract_courier_dataset,
    simulate_agent_dataset,
    synthesize_courier_history,
)
from coop_delivery.preference.features import N_FEATURES, FeatureContext
from coop_delivery.preference.mlp import Mlp, train
from coop_delivery.preference.store import ModelBundle
from coop_delivery.preference.transfer import TransferMode, attach_specific, transfer_finetune
from coop_delivery.sim.engine import run_simulation

RUN_KEYS = ["policy", "axis", "value", "seed", "fingerprint"]
SUMMARY_METRICS = [
    "delivered",
    "failed",
    "mean_delivery_min",
    "total_cost",
    "courier_cost_share",
    "gv_cost_share",
    "uav_seconds",
    "taxi_price",
]


def pipeline_train(
    scenario: Scenario,
    config: DeliveryConfig = DeliveryConfig(),
    seed: int = 0,
    history: Optional[pd.DataFrame] = None,
    output_dir: Optional[str] = None,
) -> ModelBundle:
    """Courier model from the decision history, then the GV and UAV models transferred from it.

    :param Scenario scenario: replayed for every dataset; of a multi-day scenario only the training days.
    :param history: courier decisions; synthesized from the scenario when None.
    :param str output_dir: when given, the bundle is persisted there.
    """
    scenario, _ = split_scenario(scenario)
    pref = config.preference
    features = FeatureContext.from_config(config, scenario.area)
    if history is None:
        history = synthesize_courier_history(scenario, config, seed)
    x, y = as_arrays(extract_courier_dataset(history, features))
    logger.info(f"Training courier preference model on {len(y)} samples")
    f_courier = train(
        Mlp.initialize([N_FEATURES] + list(pref.hidden) + [1], seed=seed),
        x,
        y,
        epochs=pref.epochs,
        batch_size=pref.batch_size,
        lr=pref.lr,
        seed=seed,
    ).model

    gv_x, gv_y = as_arrays(simulate_agent_dataset(AgentKind.GV, scenario, config, seed))
    if len(gv_y):
        f_gv = transfer_finetune(f_courier, gv_x, gv_y, TransferMode.GV_FINE_TUNE, pref, seed)
    else:
        logger.warning("No GV candidates in the training replay; the GV model is the courier model")
        f_gv = f_courier.copy()

    uav_x, uav_y = as_arrays(simulate_agent_dataset(AgentKind.UAV, scenario, config, seed))
    if len(uav_y):
        f_uav = transfer_finetune(f_courier, uav_x, uav_y, TransferMode.UAV_SPECIFIC, pref, seed)
    else:
        logger.warning("No UAV candidates in the training replay; the UAV specific layers stay untrained")
        f_uav = attach_specific(f_courier, pref.specific, seed)

    bundle = ModelBundle(f_courier, f_gv, f_uav, fingerprint=config.fingerprint(seed))
    if output_dir is not None:
        bundle.save(output_dir)
        logger.info(f"Saved preference models to {output_dir}")
    return bundle


def cell_config(config: DeliveryConfig, axis: Optional[str], value: Optional[float]) -> DeliveryConfig:
    if axis is None:
        return config
    field = SWEEP_AXES[axis]
    if field in ("uavs_per_station", "couriers_per_station"):
        value = int(value)
    scenario = ScenarioConfig.model_validate({**config.scenario.model_dump(), field: value})
    return config.model_copy(update={"scenario": scenario})


def scenario_for_cell(
    spec: ExperimentSpec, config: DeliveryConfig, seed: int, base: Optional[Scenario] = None
) -> Scenario:
    """Synthesizes the cell's scenario, or scales a loaded one to the cell's parameters."""
    if spec.source == "synth":
        return synth_scenario(config.scenario, seed)
    base = base or load_scenario(spec.scenario_path)
    sc = config.scenario
    rng = np.random.default_rng(seed)
    orders = base.orders
    if sc.demand_ratio < 1:
        keep = np.sort(rng.choice(len(orders), size=scaled_count(sc.demand_ratio, len(orders)), replace=False))
        orders = tuple(orders[i] for i in keep)
    vehicles = base.vehicles
    if sc.taxi_ratio < 1:
        vehicles = tuple(sample_vehicles(vehicles, sc.taxi_ratio, seed))
    return replace(
        base,
        orders=orders,
        vehicles=vehicles,
        uavs_per_station=sc.uavs_per_station,
        couriers_per_station=sc.couriers_per_station,
    )


def run_cell(
    spec: ExperimentSpec,
    config: DeliveryConfig,
    policy: Policy,
    value: Optional[float],
    seed: int,
    models: Optional[ModelBundle] = None,
    base: Optional[Scenario] = None,
) -> Dict[str, Any]:
    """One (policy, value, seed) simulation, flattened to an output row."""
    cfg = cell_config(config, spec.axis, value)
    scenario = scenario_for_cell(spec, cfg, seed, base)
    _, scenario = split_scenario(scenario)
    result = run_simulation(scenario, policy, cfg, seed, models=models if policy is Policy.TWO_STAGE else None)
    fingerprint = cfg.fingerprint(
        seed, extra={"spec": spec.model_dump(mode="json"), "policy": policy.value, "value": value}
    )
    return {
        "policy": policy.value,
        "axis": spec.axis or "",
        "value": value if value is not None else float("nan"),
        "seed": seed,
        "fingerprint": fingerprint,
        **result.metrics.as_row(),
    }


def runs_frame(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    runs = pd.DataFrame(list(rows))
    for column in runs.columns:
        if column not in ("policy", "axis", "fingerprint"):
            runs[column] = pd.to_numeric(runs[column])
    return runs


def experiment_cells(spec: ExperimentSpec) -> List[Tuple[Policy, Optional[float], int]]:
    values = spec.values or [None]
    return [(Policy(p), v, s) for p in spec.policies for v in values for s in spec.seeds]


def summarize(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean and population standard deviation of every metric per (policy, axis, value) cell."""
    numeric = [c for c in runs.columns if c not in RUN_KEYS and pd.api.types.is_numeric_dtype(runs[c])]
    grouped = runs.groupby(["policy", "axis", "value"], sort=False, dropna=False)[numeric]
    mean = grouped.mean().add_suffix("_mean")
    std = grouped.std(ddof=0).add_suffix("_std")
    summary = pd.concat([mean, std], axis=1)
    summary.insert(0, "runs", grouped.size())
    return summary.reset_index()


def plot_long(summary: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for _, cell in summary.iterrows():
        for metric in SUMMARY_METRICS:
            rows.append(
                {
                    "policy": cell["policy"],
                    "axis": cell["axis"],
                    "value": cell["value"],
                    "metric": metric,
                    "mean": cell[f"{metric}_mean"],
                    "std": cell[f"{metric}_std"],
                }
            )
    return pd.DataFrame(rows, columns=["policy", "axis", "value", "metric", "mean", "std"])


def markdown_summary(summary: pd.DataFrame) -> str:
    writer = MarkdownTableWriter()
    writer.headers = ["Policy", "Value", "Runs"] + [m.replace("_", " ") for m in SUMMARY_METRICS]
    writer.value_matrix = [
        [cell["policy"], cell["value"], cell["runs"]] + [cell[f"{m}_mean"] for m in SUMMARY_METRICS]
        for _, cell in summary.iterrows()
    ]
    return writer.dumps()


def run_experiment(
    spec: ExperimentSpec,
    config: DeliveryConfig = DeliveryConfig(),
    models: Optional[ModelBundle] = None,
    progress: bool = True,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Runs every (policy, value, seed) cell and writes the result tables into ``spec.output_dir``.

    Writes runs.csv (flushed after each completed run when sequential),
    summary.csv, plot_long.csv, results.json and summary.md.
    """
    if Policy.TWO_STAGE in spec.policies and models is None:
        raise ValueError("two_stage runs need trained preference models")
    os.makedirs(spec.output_dir, exist_ok=True)
    runs_path = os.path.join(spec.output_dir, "runs.csv")
    base = load_scenario(spec.scenario_path) if spec.source == "files" else None
    cells = experiment_cells(spec)
    logger.info(f"Running {len(cells)} simulations with {spec.workers} worker(s)")

    rows: List[Dict[str, Any]] = []
    if spec.workers > 1:
        tasks = [dask.delayed(run_cell)(spec, config, p, v, s, models, base) for p, v, s in cells]
        rows = list(dask.compute(*tasks, scheduler="processes", num_workers=spec.workers))
        runs_frame(rows).to_csv(runs_path, index=False)
    else:
        for p, v, s in tqdm(cells, desc="sweep", disable=not progress):
            rows.append(run_cell(spec, config, p, v, s, models, base))
            runs_frame(rows).to_csv(runs_path, index=False)

    runs = runs_frame(rows)
    summary = summarize(runs)
    summary.to_csv(os.path.join(spec.output_dir, "summary.csv"), index=False)
    plot_long(summary).to_csv(os.path.join(spec.output_dir, "plot_long.csv"), index=False)
    with open(os.path.join(spec.output_dir, "results.json"), "w") as f:
        json.dump(
            {
                "spec": spec.model_dump(mode="json"),
                "config_fingerprint": config.fingerprint(),
                "runs": json.loads(runs.to_json(orient="records")),
                "summary": json.loads(summary.to_json(orient="records")),
            },
            f,
            indent=2,
        )
    table = markdown_summary(summary)
    with open(os.path.join(spec.output_dir, "summary.md"), "w") as f:
        f.write(table)
    logger.info("\n" + table)
    return runs, summary
