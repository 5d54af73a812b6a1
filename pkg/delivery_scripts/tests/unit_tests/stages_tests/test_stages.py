import json
import os

import pytest
from hydra import compose, initialize_config_dir
from pydantic import ValidationError

from coop_delivery.config.schema import DeliveryConfig, ScenarioConfig, delivery_config_from_omegaconf
from coop_delivery.core.errors import InvalidScenario
from coop_delivery.core.stages import OracleCheck, Simulate, Synth
from coop_delivery.data.scenario import SCENARIO_FILE, load_scenario
from main import STR2STAGECLASS, error_payload, run_stages

CONF_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", "..", "conf"))


def compose_config(overrides):
    with initialize_config_dir(config_dir=CONF_DIR, version_base="1.2"):
        return compose(config_name="config", overrides=overrides)


class TestComposition:
    def test_defaults(self, tmp_path):
        cfg = compose_config([f"base_results_dir={tmp_path}"])
        assert list(cfg.stages) == ["synth", "simulate"]
        assert cfg.scenario_dir == f"{tmp_path}/scenario"
        assert cfg.simulate.run.results_dir == f"{tmp_path}/simulate"
        assert cfg.experiment.output_dir == f"{tmp_path}/sweep/results"
        assert delivery_config_from_omegaconf(cfg) == DeliveryConfig()

    def test_small_scenario_group(self, tmp_path):
        cfg = compose_config([f"base_results_dir={tmp_path}", "scenario=small"])
        scenario = delivery_config_from_omegaconf(cfg).scenario
        assert scenario.base_order_count == 400
        assert scenario.horizon_end == ScenarioConfig().horizon_end

    def test_every_stage_registered(self):
        assert set(STR2STAGECLASS) == {"synth", "train", "simulate", "sweep", "oracle_check"}


class TestStages:
    @pytest.fixture
    def cfg(self, tmp_path):
        return compose_config(
            [
                f"base_results_dir={tmp_path}",
                "scenario=small",
                "scenario.base_order_count=80",
                "scenario.taxi_fleet_size=60",
                "simulate.policy=without_tl",
                "oracle_check.instances=5",
                "oracle_check.max_parcels=4",
                "oracle_check.max_agents=3",
            ]
        )

    def test_synth_then_simulate(self, cfg, tmp_path):
        Synth(cfg).run()
        scenario_dir = os.path.join(tmp_path, "scenario")
        assert os.path.exists(os.path.join(scenario_dir, SCENARIO_FILE))
        scenario = load_scenario(scenario_dir)
        assert len(scenario.orders) == 80

        output = Simulate(cfg).run()
        with open(output) as f:
            payload = json.load(f)
        assert payload["policy"] == "without_tl"
        metrics = payload["metrics"]
        assert metrics["ordered"] == 80
        assert metrics["delivered"] + metrics["failed"] == 80
        results = os.path.join(tmp_path, "simulate", "results")
        assert os.path.exists(os.path.join(results, "events.jsonl"))
        assert os.path.exists(os.path.join(tmp_path, "simulate", "simulate_hydra.yaml"))

    def test_simulate_synthesizes_missing_scenario(self, cfg, tmp_path):
        Simulate(cfg).run()
        assert os.path.exists(os.path.join(tmp_path, "scenario", SCENARIO_FILE))

    def test_oracle_check(self, cfg):
        output = OracleCheck(cfg).run()
        with open(output) as f:
            summary = json.load(f)
        assert summary["instances"] == 5
        assert os.path.exists(os.path.join(os.path.dirname(output), "oracle_gaps.csv"))


class TestErrorPayload:
    def test_domain_error(self):
        payload = error_payload(InvalidScenario("no stations", field="uav_stations"))
        assert payload == {"error": "invalid_scenario", "message": "no stations", "field": "uav_stations"}

    def test_validation_error(self):
        with pytest.raises(ValidationError) as info:
            ScenarioConfig(demand_ratio=2.0)
        assert error_payload(info.value)["error"] == "invalid_config"

    def test_plain_value_error(self):
        assert error_payload(ValueError("bad"))["error"] == "invalid_argument"

    @pytest.mark.parametrize(
        "err,code",
        [
            (FileNotFoundError("missing.csv"), "io_error"),
            (KeyError("scenario"), "invalid_config"),
            (RuntimeError("boom"), "internal_error"),
        ],
    )
    def test_other_failures(self, err, code):
        assert error_payload(err)["error"] == code


class Exploding:
    def __init__(self, cfg):
        pass

    def run(self):
        raise RuntimeError("stage blew up")


class TestRunStages:
    def run_and_read(self, cfg, capsys):
        with pytest.raises(SystemExit) as info:
            run_stages(cfg)
        assert info.value.code == 1
        return json.loads(capsys.readouterr().err.strip().splitlines()[-1])

    def test_unknown_stage(self, tmp_path, capsys):
        cfg = compose_config([f"base_results_dir={tmp_path}", "stages=[bogus]"])
        payload = self.run_and_read(cfg, capsys)
        assert payload["stage"] == "bogus" and payload["error"] == "invalid_argument"

    def test_missing_history_file(self, tmp_path, capsys):
        cfg = compose_config([f"base_results_dir={tmp_path}", "stages=[train]", f"train.history={tmp_path}/absent.csv"])
        payload = self.run_and_read(cfg, capsys)
        assert payload == {"stage": "train", "error": "io_error", "message": payload["message"]}
        assert "absent.csv" in payload["message"]

    def test_unexpected_exception(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setitem(STR2STAGECLASS, "synth", Exploding)
        cfg = compose_config([f"base_results_dir={tmp_path}", "stages=[synth]"])
        payload = self.run_and_read(cfg, capsys)
        assert payload["error"] == "internal_error"
        assert "stage blew up" in payload["message"]
