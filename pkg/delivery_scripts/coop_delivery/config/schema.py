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

"""Validated configuration models composed from the Hydra config groups."""

import hashlib
import json
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from hydra.utils import get_class
from omegaconf import DictConfig, OmegaConf
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Admissible values of the evaluated parameters; the middle-ish entries are the defaults.
ADMISSIBLE_VALUES: Dict[str, Tuple[float, ...]] = {
    "demand_ratio": (0.7, 0.8, 0.9, 1.0),
    "taxi_ratio": (0.05, 0.1, 0.15, 0.2),
    "uavs_per_station": (15, 20, 25, 30),
    "couriers_per_station": (10, 15, 20, 25),
}
SWEEP_AXES = {
    "demand": "demand_ratio",
    "taxi_ratio": "taxi_ratio",
    "uavs_per_station": "uavs_per_station",
    "couriers_per_station": "couriers_per_station",
}


class Policy(str, Enum):
    TWO_STAGE = "two_stage"
    WITHOUT_TL = "without_tl"
    ON_DEMAND = "on_demand"
    UAV_TAXI = "uav_taxi"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ServiceAreaConfig(_Frozen):
    x_min: float = 0.0
    y_min: float = 0.0
    x_max: float = 20000.0
    y_max: float = 20000.0
    grid_resolution: float = 50.0  # meters per occupancy cell for flight routing
    # Convex polygons as lists of [x, y] vertices.
    no_fly_zones: List[List[List[float]]] = Field(default_factory=list)

    @field_validator("grid_resolution")
    def grid_resolution_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"grid_resolution must be > 0, got {v}")
        return v

    @model_validator(mode="after")
    def zones_within_bounds(self) -> "ServiceAreaConfig":
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("service area bounds are empty")
        for zone in self.no_fly_zones:
            if len(zone) < 3:
                raise ValueError(f"no-fly zone needs at least 3 vertices: {zone}")
            for x, y in zone:
                if not (self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max):
                    raise ValueError(f"no-fly zone vertex ({x}, {y}) lies outside bounds")
        return self


class EnergyModelParams(_Frozen):
    slope: float = 90.3  # W/kg
    intercept: float = 320.9  # W

    @model_validator(mode="after")
    def both_positive(self) -> "EnergyModelParams":
        if self.slope <= 0 or self.intercept <= 0:
            raise ValueError("energy model slope and intercept must be positive")
        return self


class GvLimits(_Frozen):
    d_max: float = 2000.0  # meters, pickup detour bound
    dt_pu: float = 600.0  # seconds after ordering by which pickup must happen
    delta_d: float = 1000.0  # meters, halfway drop detour bound


class AgentConfig(_Frozen):
    uav_speed: float = 16.0
    uav_endurance_s: float = 2400.0
    uav_e_max: Optional[float] = None  # joules; derived from endurance when null
    alpha: float = 0.1
    uav_payload_cap: float = 2.0  # kg
    courier_speed: float = 5.0
    n_max: int = 5
    gv_speed: float = 8.0
    service_time: float = 60.0

    @field_validator("alpha")
    def alpha_open_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {v}")
        return v

    @field_validator("uav_speed", "courier_speed", "gv_speed", "uav_payload_cap")
    def strictly_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError(f"value must be > 0, got {v}")
        return v

    @field_validator("n_max")
    def n_max_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"n_max must be >= 1, got {v}")
        return v

    @field_validator("service_time")
    def service_non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError(f"service_time must be >= 0, got {v}")
        return v

    def energy_capacity(self, energy: EnergyModelParams) -> float:
        if self.uav_e_max is not None:
            return self.uav_e_max
        return self.uav_endurance_s * energy.intercept


class FeasibilityConfig(_Frozen):
    delta_t: float = 3600.0
    gv_limits: GvLimits = GvLimits()
    energy: EnergyModelParams = EnergyModelParams()
    free_empty_legs: bool = False
    courier_rate_per_km: float = 3.15
    gv_rate_per_km: float = 2.7
    gv_compensation: float = 2.0


class Thresholds(_Frozen):
    courier: float = 0.5
    gv: float = 0.5
    uav: float = 0.5

    @field_validator("courier", "gv", "uav")
    def open_unit_interval(cls, v: float) -> float:
        if not 0 < v < 1:
            raise ValueError(f"preference thresholds must lie in (0, 1), got {v}")
        return v

    def for_kind(self, kind) -> float:
        """:param AgentKind kind: uav, courier or gv."""
        return getattr(self, kind.value)


class DispatchConfig(_Frozen):
    thresholds: Thresholds = Thresholds()
    uav_cost_rate: float = 0.0  # CNY per UAV second
    retry_interval: float = 60.0
    candidate_pool: Optional[int] = 12  # nearest agents per kind; null = all

    @field_validator("candidate_pool")
    def pool_positive(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError(f"candidate_pool must be >= 1 or null, got {v}")
        return v


class PreferenceConfig(_Frozen):
    hidden: List[int] = Field(default_factory=lambda: [64, 64, 32])
    specific: List[int] = Field(default_factory=lambda: [32])
    lr: float = 1e-3
    finetune_lr_scale: float = 0.1
    epochs: int = 30
    finetune_epochs: int = 20
    batch_size: int = 64
    label_noise: float = 0.05
    seed: int = 0

    @field_validator("batch_size")
    def batch_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"batch_size must be >= 1, got {v}")
        return v


class ScenarioConfig(_Frozen):
    demand_ratio: float = 1.0
    taxi_ratio: float = 0.1
    uavs_per_station: int = 25
    couriers_per_station: int = 20
    uav_stations: int = 15
    courier_stations: int = 50
    base_order_count: int = 22000
    taxi_fleet_size: int = 13000
    area: ServiceAreaConfig = ServiceAreaConfig()
    horizon_start: float = 8 * 3600.0
    horizon_end: float = 20 * 3600.0
    weight_min: float = 0.2
    weight_max: float = 1.0
    max_delivery_radius: float = 3000.0
    lunch_peak: float = 11 * 3600.0
    dinner_peak: float = 18 * 3600.0
    peak_std: float = 1800.0
    peak_share: float = 0.7
    trip_min: float = 1000.0
    trip_max: float = 8000.0
    idle_gap_mean: float = 900.0
    trip_speed: float = 8.0  # m/s, nominal speed of synthetic original trips

    @field_validator("demand_ratio", "taxi_ratio")
    def ratio_in_unit_interval(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError(f"ratios must lie in (0, 1], got {v}")
        return v

    @field_validator(
        "uav_stations",
        "courier_stations",
        "base_order_count",
        "taxi_fleet_size",
    )
    def count_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"counts must be positive, got {v}")
        return v

    @field_validator("uavs_per_station", "couriers_per_station")
    def count_non_negative(cls, v: int) -> int:
        if v < 0:
            raise ValueError(f"agents per station must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def consistent_ranges(self) -> "ScenarioConfig":
        if self.horizon_end <= self.horizon_start:
            raise ValueError("horizon_end must be after horizon_start")
        if not 0 < self.weight_min <= self.weight_max:
            raise ValueError("weights must satisfy 0 < weight_min <= weight_max")
        if not 0 < self.trip_min <= self.trip_max:
            raise ValueError("trip lengths must satisfy 0 < trip_min <= trip_max")
        if not 0 <= self.peak_share <= 1:
            raise ValueError("peak_share must lie in [0, 1]")
        return self


class ExperimentSpec(_Frozen):
    source: Literal["synth", "files"] = "synth"
    scenario_path: Optional[str] = None
    policies: List[Policy] = Field(
        default_factory=lambda: [Policy.TWO_STAGE, Policy.WITHOUT_TL]
    )
    axis: Optional[Literal["demand", "taxi_ratio", "uavs_per_station", "couriers_per_station"]] = None
    values: List[float] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = "results/experiment"
    allow_override: bool = False
    workers: int = 1

    @model_validator(mode="after")
    def sweep_values_admissible(self) -> "ExperimentSpec":
        if self.source == "files" and not self.scenario_path:
            raise ValueError("source=files requires scenario_path")
        if self.axis is None:
            if self.values:
                raise ValueError("sweep values given without a sweep axis")
            return self
        if not self.values:
            raise ValueError(f"sweep axis {self.axis} has no values")
        if not self.allow_override:
            admissible = ADMISSIBLE_VALUES[SWEEP_AXES[self.axis]]
            bad = [v for v in self.values if v not in admissible]
            if bad:
                raise ValueError(
                    f"values {bad} are not admissible for {self.axis}: {admissible}; "
                    "set allow_override=true to force them"
                )
        if not self.seeds:
            raise ValueError("at least one seed is required")
        return self


class DeliveryConfig(_Frozen):
    """Everything a simulation run depends on."""

    scenario: ScenarioConfig = ScenarioConfig()
    agents: AgentConfig = AgentConfig()
    feasibility: FeasibilityConfig = FeasibilityConfig()
    dispatch: DispatchConfig = DispatchConfig()
    preference: PreferenceConfig = PreferenceConfig()

    def fingerprint(self, seed: Optional[int] = None, extra: Any = None) -> str:
        return config_fingerprint(self.model_dump(mode="json"), seed=seed, extra=extra)


def config_fingerprint(payload: Any, seed: Optional[int] = None, extra: Any = None) -> str:
    canonical = json.dumps(
        {"config": payload, "seed": seed, "extra": extra},
        sort_keys=True,
        separators=(",", ":"),
        default=str,
    )
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def instantiate_model_from_omegaconf(
    cfg: DictConfig, cls: Optional[type] = None, strict: bool = False
) -> BaseModel:
    kwargs = OmegaConf.to_object(cfg) if isinstance(cfg, DictConfig) else dict(cfg)
    _target_ = kwargs.pop("_target_", None)
    if _target_ is not None:
        cls = get_class(_target_)
    if cls is None or not issubclass(cls, BaseModel):
        raise ValueError(
            f"Expected _target_={_target_ or cls} to be a subclass of pydantic.BaseModel"
        )
    return cls.model_validate(kwargs, strict=strict)


def delivery_config_from_omegaconf(cfg: DictConfig) -> DeliveryConfig:
    """Builds the root config from the Hydra groups present in ``cfg``."""
    groups = {}
    for name in ("scenario", "agents", "feasibility", "dispatch", "preference"):
        if cfg.get(name) is not None:
            groups[name] = OmegaConf.to_object(cfg.get(name))
    return DeliveryConfig.model_validate(groups)
