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

import json
import os
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import omegaconf
import pandas as pd
from omegaconf import DictConfig, OmegaConf

from coop_delivery.config.schema import ExperimentSpec, Policy, delivery_config_from_omegaconf, instantiate_model_from_omegaconf
from coop_delivery.core.experiment import pipeline_train, run_experiment
from coop_delivery.core.feasibility import PlanningContext
from coop_delivery.core.logger import logger
from coop_delivery.data.scenario import SCENARIO_FILE, Scenario, load_scenario, save_scenario, split_scenario
from coop_delivery.data.synth import synth_scenario
from coop_delivery.dispatch.candidates import DispatchContext
from coop_delivery.dispatch.oracle import compare_with_oracle, summarize_gaps
from coop_delivery.preference.store import ModelBundle
from coop_delivery.sim.engine import run_simulation
from coop_delivery.sim.metrics import write_event_log
from coop_delivery.utils.job_utils import JobPaths


class DeliveryStage:
    """
    Base class for delivery stages. All stages should build on top of this class.
    Call `run` function to run current stage.
    """

    def __init__(self, cfg: DictConfig):
        self.cfg = cfg
        self.stage_name = None
        self.stage_cfg = None
        self.setup_stage_vars(cfg)
        self.job_name = self.stage_cfg.run.get("name")
        self.config = delivery_config_from_omegaconf(cfg)
        self.seed = cfg.get("seed", 0)

    def setup_stage_vars(self, cfg: OmegaConf):
        """Setup the stage vars, i.e. stage name and stage cfg"""
        raise NotImplementedError

    def run(self) -> str:
        """
        Run current stage and return the path of its main output

        :return: path of the stage's main output
        :rtype: str
        """
        self.setup_folder()
        job_path = self.get_job_path()
        self.save_stage_hydra_config(self.stage_cfg, job_path)
        output = self.execute(job_path)
        logger.info(f"Stage {self.stage_name} finished: {output}")
        return output

    def execute(self, job_path: JobPaths) -> str:
        raise NotImplementedError

    def setup_folder(self) -> None:
        job_path = self.get_job_path()
        job_path.folder.mkdir(parents=True, exist_ok=True)
        job_path.results_folder.mkdir(parents=True, exist_ok=True)

    def save_stage_hydra_config(self, stage_cfg: OmegaConf, job_path: JobPaths) -> Path:
        """
        Interpolate and save hydra config file for current stage

        :param OmegaConf stage_cfg: current stage's hydra configuration
        :param JobPaths job_path: JobPaths object
        :return: path of the saved configuration
        :rtype: Path
        """
        _hydra_interpolation(stage_cfg)
        cfg_save_path = job_path.config_file
        omegaconf.OmegaConf.save(stage_cfg, cfg_save_path)
        return cfg_save_path

    def get_job_path(self) -> JobPaths:
        """Fetch a JobPaths object for current stage"""
        return JobPaths(Path(self.stage_cfg.run.get("results_dir")), self.job_name)

    def scenario(self) -> Scenario:
        """The scenario in ``scenario_dir``; synthesized and saved there first when absent."""
        scenario_dir = self.cfg.get("scenario_dir")
        if os.path.exists(os.path.join(scenario_dir, SCENARIO_FILE)):
            return load_scenario(scenario_dir)
        logger.info(f"No scenario in {scenario_dir}, synthesizing one")
        scenario = synth_scenario(self.config.scenario, self.seed)
        save_scenario(scenario, scenario_dir)
        return scenario

    def models(self, scenario: Optional[Scenario] = None) -> ModelBundle:
        """The bundle in ``model_dir``; trained on the stage's scenario first when absent."""
        model_dir = self.cfg.get("model_dir")
        if os.path.exists(os.path.join(model_dir, "bundle.json")):
            return ModelBundle.load(model_dir)
        logger.info(f"No preference models in {model_dir}, training them")
        return pipeline_train(scenario or self.scenario(), self.config, self.seed, output_dir=model_dir)


class Synth(DeliveryStage):
    """Stage class of synthesizing a scenario"""

    def setup_stage_vars(self, cfg):
        self.stage_name = "synth"
        self.stage_cfg = cfg.get("synth")

    def execute(self, job_path: JobPaths) -> str:
        scenario = synth_scenario(self.config.scenario, self.seed, name=self.stage_cfg.get("scenario_name", "synthetic"))
        return save_scenario(scenario, self.cfg.get("scenario_dir"))


class Train(DeliveryStage):
    """Stage class of training the courier, GV and UAV preference models"""

    def setup_stage_vars(self, cfg):
        self.stage_name = "train"
        self.stage_cfg = cfg.get("train")

    def execute(self, job_path: JobPaths) -> str:
        history_path = self.stage_cfg.get("history")
        history = pd.read_csv(history_path) if history_path else None
        model_dir = self.cfg.get("model_dir")
        pipeline_train(self.scenario(), self.config, self.seed, history=history, output_dir=model_dir)
        return model_dir


class Simulate(DeliveryStage):
    """Stage class of simulating one day under one dispatch policy"""

    def setup_stage_vars(self, cfg):
        self.stage_name = "simulate"
        self.stage_cfg = cfg.get("simulate")

    def execute(self, job_path: JobPaths) -> str:
        policy = Policy(self.stage_cfg.get("policy"))
        scenario = self.scenario()
        models = self.models(scenario) if policy is Policy.TWO_STAGE else None
        _, evaluation = split_scenario(scenario)
        result = run_simulation(evaluation, policy, self.config, self.seed, models=models, progress=True)
        write_event_log(result.log, str(job_path.event_log))
        payload = {
            "policy": policy.value,
            "seed": self.seed,
            "fingerprint": self.config.fingerprint(self.seed, extra={"policy": policy.value}),
            "metrics": result.metrics.to_dict(),
        }
        with open(job_path.metrics_file, "w") as f:
            json.dump(payload, f, indent=2)
        return str(job_path.metrics_file)


class Sweep(DeliveryStage):
    """Stage class of sweeping policies over one evaluated parameter"""

    def setup_stage_vars(self, cfg):
        self.stage_name = "sweep"
        self.stage_cfg = cfg.get("sweep")

    def execute(self, job_path: JobPaths) -> str:
        spec = instantiate_model_from_omegaconf(self.cfg.get("experiment"), ExperimentSpec)
        models = None
        if Policy.TWO_STAGE in spec.policies:
            scenario = load_scenario(spec.scenario_path) if spec.source == "files" else None
            models = self.models(scenario)
        run_experiment(spec, self.config, models)
        return spec.output_dir


class OracleCheck(DeliveryStage):
    """Stage class of comparing greedy GAPAR with the exhaustive oracle on small instances"""

    def setup_stage_vars(self, cfg):
        self.stage_name = "oracle_check"
        self.stage_cfg = cfg.get("oracle_check")

    def execute(self, job_path: JobPaths) -> str:
        ctx = DispatchContext(
            planning=PlanningContext.from_config(self.config),
            uav_cost_rate=self.config.dispatch.uav_cost_rate,
            candidate_pool=None,
        )
        gaps = compare_with_oracle(
            n_instances=self.stage_cfg.get("instances"),
            seed=self.seed,
            ctx=ctx,
            max_parcels=self.stage_cfg.get("max_parcels"),
            max_agents=self.stage_cfg.get("max_agents"),
            progress=True,
        )
        summary = summarize_gaps(gaps)
        pd.DataFrame([{**asdict(g), "ratio": g.ratio} for g in gaps]).to_csv(
            job_path.results_folder / "oracle_gaps.csv", index=False
        )
        output = job_path.results_folder / "oracle.json"
        with open(output, "w") as f:
            json.dump(summary, f, indent=2)
        logger.info(f"Greedy vs oracle: {summary}")
        return str(output)


def _hydra_interpolation(cfg: OmegaConf) -> None:
    """
    Interpolate hydra config values in cfg object, bypassing lazy interpolation

    :param OmegaConf cfg: OmegaConf object with the config to be interpolated
    :return: None
    """

    def interpolate(cfg: OmegaConf):
        if isinstance(cfg, omegaconf.dictconfig.DictConfig):
            for k, v in cfg.items():
                cfg[k] = interpolate(v)
        elif isinstance(cfg, omegaconf.listconfig.ListConfig):
            for i, v in enumerate(cfg):
                cfg[i] = interpolate(v)
        return cfg

    interpolate(cfg)
