import pytest

from coop_delivery.config.schema import DeliveryConfig, ScenarioConfig, ServiceAreaConfig
from coop_delivery.data.synth import synth_scenario

SMALL_SCENARIO = ScenarioConfig(
    base_order_count=60,
    taxi_fleet_size=40,
    taxi_ratio=0.2,
    uav_stations=2,
    courier_stations=3,
    uavs_per_station=2,
    couriers_per_station=2,
    area=ServiceAreaConfig(x_max=6000.0, y_max=6000.0),
    max_delivery_radius=2000.0,
    horizon_start=10 * 3600.0,
    horizon_end=13 * 3600.0,
)


@pytest.fixture(scope="session")
def small_config():
    return DeliveryConfig(scenario=SMALL_SCENARIO)


@pytest.fixture(scope="session")
def small_scenario(small_config):
    return synth_scenario(small_config.scenario, seed=3)
