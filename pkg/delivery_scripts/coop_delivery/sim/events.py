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

"""Event queue of the delivery simulation."""

import heapq
from dataclasses import dataclass, field
from enum import IntEnum
from typing import List, Optional


class EventKind(IntEnum):
    """Values are the tie-break rank of simultaneous events."""

    GV_TRIP_END = 0
    AGENT_WAYPOINT_ARRIVAL = 1
    GV_TRIP_START = 2
    ORDER_ARRIVAL = 3
    DISPATCH_RETRY = 4
    SIM_END = 5


@dataclass(order=True, frozen=True)
class Event:
    time: float
    kind: EventKind
    entity: str
    seq: int
    epoch: int = field(default=0, compare=False)


class EventQueue:
    def __init__(self) -> None:
        self._heap: List[Event] = []
        self._seq = 0

    def push(self, time: float, kind: EventKind, entity: str = "", epoch: int = 0) -> Event:
        event = Event(time, kind, entity, self._seq, epoch)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Optional[Event]:
        return heapq.heappop(self._heap) if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)
