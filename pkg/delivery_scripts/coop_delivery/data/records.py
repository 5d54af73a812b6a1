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

"""Rows of the order and trajectory datasets."""

from dataclasses import dataclass
from typing import Optional

from coop_delivery.core.agents import Parcel
from coop_delivery.core.geo import Location

ORDER_COLUMNS = ("t_pickup", "x_pickup", "y_pickup", "t_dropoff", "x_dropoff", "y_dropoff")
ORDER_OPTIONAL_COLUMNS = ("weight", "order_id")
TRAJECTORY_COLUMNS = ("vehicle_id", "t", "x", "y", "occupied", "speed", "heading")

DEFAULT_WEIGHT = 1.0  # kg, when the dataset carries none


@dataclass(frozen=True)
class OrderRecord:
    """The dataset's 4-tuple plus the parcel weight.

    ``t_dropoff`` is the observed delivery time; it is kept for replay analysis
    and never fed to dispatch.
    """

    t_pickup: float
    l_pickup: Location
    t_dropoff: float
    l_dropoff: Location
    weight: float = DEFAULT_WEIGHT
    order_id: Optional[str] = None

    def to_parcel(self, parcel_id: Optional[str] = None) -> Parcel:
        return Parcel(
            id=parcel_id or self.order_id,
            t_o=self.t_pickup,
            l_o=Location(*self.l_pickup),
            l_s=Location(*self.l_dropoff),
            weight=self.weight,
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    vehicle_id: str
    t: float
    l: Location
    occupied: bool
    speed: float = 0.0  # m/s
    heading: float = 0.0  # degrees
