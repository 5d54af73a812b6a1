import pytest
from omegaconf import OmegaConf
from pydantic import ValidationError

from coop_delivery.config.schema import (
    AgentConfig,
    DeliveryConfig,
    ExperimentSpec,
    Policy,
    ScenarioConfig,
    ServiceAreaConfig,
    Thresholds,
    delivery_config_from_omegaconf,
    instantiate_model_from_omegaconf,
)
from coop_delivery.core.agents import AgentKind


class TestValidation:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
    def test_alpha(self, alpha):
        with pytest.raises(ValidationError):
            AgentConfig(alpha=alpha)

    @pytest.mark.parametrize("field", ["courier", "gv", "uav"])
    def test_thresholds_open_interval(self, field):
        with pytest.raises(ValidationError):
            Thresholds(**{field: 1.0})

    def test_thresholds_by_kind(self):
        t = Thresholds(courier=0.6, gv=0.7, uav=0.8)
        assert [t.for_kind(k) for k in (AgentKind.COURIER, AgentKind.GV, AgentKind.UAV)] == [0.6, 0.7, 0.8]

    def test_extra_keys_rejected(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(taxi_share=0.1)

    def test_zone_outside_area(self):
        with pytest.raises(ValidationError):
            ServiceAreaConfig(x_max=100.0, y_max=100.0, no_fly_zones=[[[0, 0], [200, 0], [0, 50]]])

    def test_energy_capacity(self):
        cfg = DeliveryConfig()
        assert cfg.agents.energy_capacity(cfg.feasibility.energy) == pytest.approx(2400 * 320.9)
        assert AgentConfig(uav_e_max=5e5).energy_capacity(cfg.feasibility.energy) == 5e5


class TestExperimentSpec:
    def test_sweep_values_checked(self):
        spec = ExperimentSpec(axis="demand", values=[0.7, 0.8, 0.9, 1.0])
        assert spec.policies == [Policy.TWO_STAGE, Policy.WITHOUT_TL]
        with pytest.raises(ValidationError):
            ExperimentSpec(axis="demand", values=[0.5])

    def test_override(self):
        assert ExperimentSpec(axis="demand", values=[0.5], allow_override=True).values == [0.5]

    def test_values_need_axis(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(values=[0.7])

    def test_files_need_path(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(source="files")


class TestFingerprint:
    def test_stable(self):
        assert DeliveryConfig().fingerprint(0) == DeliveryConfig().fingerprint(0)

    def test_sensitive(self):
        base = DeliveryConfig()
        assert base.fingerprint(0) != base.fingerprint(1)
        assert base.fingerprint(0) != DeliveryConfig(agents=AgentConfig(n_max=4)).fingerprint(0)


class TestFromOmegaconf:
    def test_groups(self):
        cfg = OmegaConf.create({"agents": {"n_max": 3}, "dispatch": {"thresholds": {"gv": 0.4}}, "seed": 1})
        config = delivery_config_from_omegaconf(cfg)
        assert config.agents.n_max == 3 and config.dispatch.thresholds.gv == 0.4
        assert config.scenario == ScenarioConfig()

    def test_target(self):
        cfg = OmegaConf.create({"_target_": "coop_delivery.config.schema.AgentConfig", "n_max": 2})
        assert instantiate_model_from_omegaconf(cfg).n_max == 2

    def test_not_a_model(self):
        with pytest.raises(ValueError):
            instantiate_model_from_omegaconf(OmegaConf.create({"_target_": "collections.OrderedDict"}))
