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

"""Delivery metrics and the line-delimited event log they are computed from."""

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from coop_delivery.core.errors import CorruptLog

HISTOGRAM_EDGES = tuple(range(0, 65, 5))  # minutes

# required fields per record kind, after t / kind / entity
RECORD_FIELDS = {
    "order": ("t_o", "weight"),
    "assign": ("agent", "agent_kind", "cost", "raw_cost", "mode"),
    "pickup": ("agent",),
    "deliver": ("agent", "agent_kind", "t_o", "cost", "raw_cost", "mode"),
    "fail": ("t_o",),
    "gv_trip_end": ("delay",),
    "end": (),
}
LOG_COLUMNS = ("t", "kind", "entity") + tuple(dict.fromkeys(f for fields in RECORD_FIELDS.values() for f in fields))


def make_record(t: float, kind: str, entity: str = "", **fields: Any) -> Dict[str, Any]:
    """Event-log record; field order is stable so logs can be diffed."""
    return {"t": t, "kind": kind, "entity": entity, **fields}


@dataclass(frozen=True)
class Metrics:
    ordered: int = 0
    delivered: int = 0
    failed: int = 0
    pending: int = 0
    mean_delivery_min: Optional[float] = None
    p50_delivery_min: Optional[float] = None
    p90_delivery_min: Optional[float] = None
    p95_delivery_min: Optional[float] = None
    max_delivery_min: Optional[float] = None
    courier_cost: float = 0.0
    gv_cost: float = 0.0
    total_cost: float = 0.0
    courier_cost_share: float = 0.0  # percent
    gv_cost_share: float = 0.0
    uav_seconds: float = 0.0
    taxi_price: Optional[float] = None  # CNY per GV-delivered parcel
    delivered_by_uav: int = 0
    delivered_by_courier: int = 0
    delivered_by_gv: int = 0
    gv_mode_counts: Dict[str, int] = field(default_factory=dict)
    gv_delayed_trips: int = 0
    gv_delay_mean_s: Optional[float] = None
    gv_delay_max_s: Optional[float] = None
    delivery_histogram: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def as_row(self) -> Dict[str, Any]:
        """Scalar columns only, for tabular output."""
        return {k: v for k, v in self.to_dict().items() if not isinstance(v, (dict, list))}


class MetricsAccumulator:
    """Folds event-log records into :class:`Metrics`; the engine and the replay share it."""

    def __init__(self) -> None:
        self.ordered = set()
        self.delivered = 0
        self.failed = 0
        self.closed = set()
        self.minutes: List[float] = []
        self.courier_cost = 0.0
        self.gv_cost = 0.0
        self.uav_seconds = 0.0
        self.by_kind = Counter()
        self.modes = Counter()
        self.delays: List[float] = []
        self.last_t = -np.inf

    def add(self, record: Dict[str, Any]) -> None:
        kind = record.get("kind")
        if kind not in RECORD_FIELDS:
            raise CorruptLog(f"unknown record kind {kind!r}", record=record)
        missing = [k for k in ("t", "entity") + RECORD_FIELDS[kind] if k not in record]
        if missing:
            raise CorruptLog(f"{kind} record lacks {missing}", record=record)
        if record["t"] < self.last_t:
            raise CorruptLog(f"time goes backwards at {record['t']}", record=record)
        self.last_t = record["t"]
        parcel = record["entity"]
        if kind == "order":
            if parcel in self.ordered:
                raise CorruptLog(f"parcel {parcel} ordered twice")
            self.ordered.add(parcel)
        elif kind in ("deliver", "fail"):
            if parcel not in self.ordered or parcel in self.closed:
                raise CorruptLog(f"{kind} of unknown or closed parcel {parcel}")
            self.closed.add(parcel)
            if kind == "fail":
                self.failed += 1
            else:
                self._deliver(record)
        elif kind == "gv_trip_end" and record["delay"] > 0:
            self.delays.append(record["delay"])

    def _deliver(self, record: Dict[str, Any]) -> None:
        self.delivered += 1
        self.minutes.append((record["t"] - record["t_o"]) / 60.0)
        agent_kind = record["agent_kind"]
        self.by_kind[agent_kind] += 1
        if agent_kind == "courier":
            self.courier_cost += record["cost"]
        elif agent_kind == "gv":
            self.gv_cost += record["cost"]
            self.modes[record["mode"]] += 1
        else:
            self.uav_seconds += record["raw_cost"]

    def result(self) -> Metrics:
        minutes = np.asarray(self.minutes, dtype=float)
        total = self.courier_cost + self.gv_cost
        gv_count = self.by_kind["gv"]

        def pct(q):
            return float(np.percentile(minutes, q)) if minutes.size else None

        return Metrics(
            ordered=len(self.ordered),
            delivered=self.delivered,
            failed=self.failed,
            pending=len(self.ordered) - self.delivered - self.failed,
            mean_delivery_min=float(minutes.mean()) if minutes.size else None,
            p50_delivery_min=pct(50),
            p90_delivery_min=pct(90),
            p95_delivery_min=pct(95),
            max_delivery_min=float(minutes.max()) if minutes.size else None,
            courier_cost=self.courier_cost,
            gv_cost=self.gv_cost,
            total_cost=total,
            courier_cost_share=100.0 * self.courier_cost / total if total > 0 else 0.0,
            gv_cost_share=100.0 * self.gv_cost / total if total > 0 else 0.0,
            uav_seconds=self.uav_seconds,
            taxi_price=self.gv_cost / gv_count if gv_count else None,
            delivered_by_uav=self.by_kind["uav"],
            delivered_by_courier=self.by_kind["courier"],
            delivered_by_gv=gv_count,
            gv_mode_counts=dict(sorted(self.modes.items())),
            gv_delayed_trips=len(self.delays),
            gv_delay_mean_s=float(np.mean(self.delays)) if self.delays else None,
            gv_delay_max_s=float(np.max(self.delays)) if self.delays else None,
            delivery_histogram=np.histogram(minutes, bins=HISTOGRAM_EDGES)[0].tolist(),
        )


def _checked_records(log: Iterable[Any]) -> List[Dict[str, Any]]:
    records = list(log)
    for n, record in enumerate(records):
        if not isinstance(record, dict):
            raise CorruptLog(f"record is not an object: {record!r}", index=n)
        kind = record.get("kind")
        if kind not in RECORD_FIELDS:
            raise CorruptLog(f"unknown record kind {kind!r}", index=n)
        missing = [k for k in ("t", "entity") + RECORD_FIELDS[kind] if k not in record]
        if missing:
            raise CorruptLog(f"{kind} record lacks {missing}", index=n)
    return records


def _check_sequence(frame: pd.DataFrame) -> None:
    t = frame["t"].to_numpy(dtype=float)
    backwards = np.flatnonzero(np.diff(t) < 0)
    if backwards.size:
        n = int(backwards[0]) + 1
        raise CorruptLog(f"time goes backwards at {t[n]}", index=n)
    orders = frame.loc[frame["kind"] == "order", "entity"]
    twice = orders[orders.duplicated()]
    if len(twice):
        raise CorruptLog(f"parcel {twice.iloc[0]} ordered twice", index=int(twice.index[0]))
    closing = frame.loc[frame["kind"].isin(("deliver", "fail")), ["kind", "entity"]]
    opened_at = closing["entity"].map(pd.Series(orders.index, index=orders.to_numpy())).to_numpy(dtype=float)
    # NaN compares false, so never-ordered parcels are caught by isnan
    bad = np.isnan(opened_at) | (opened_at > closing.index.to_numpy()) | closing["entity"].duplicated().to_numpy()
    if bad.any():
        first = int(np.argmax(bad))
        row = closing.iloc[first]
        raise CorruptLog(f"{row['kind']} of unknown or closed parcel {row['entity']}", index=int(closing.index[first]))


def _log_order_sum(values: pd.Series) -> float:
    # log order, matching the engine totals bit for bit
    return float(sum(values.astype(float).tolist(), 0.0))


def collect_metrics(log: Iterable[Dict[str, Any]]) -> Metrics:
    """Recompute :class:`Metrics` from an event log alone.

    Independent of :class:`MetricsAccumulator`, so replaying a written log
    cross-checks the totals the engine kept while running.
    """
    frame = pd.DataFrame.from_records(_checked_records(log), columns=list(LOG_COLUMNS))
    _check_sequence(frame)
    kind = frame["kind"]
    ordered = int((kind == "order").sum())
    failed = int((kind == "fail").sum())
    delivered = frame[kind == "deliver"]
    agent_kind = delivered["agent_kind"]
    minutes = (delivered["t"].to_numpy(dtype=float) - delivered["t_o"].to_numpy(dtype=float)) / 60.0
    courier_cost = _log_order_sum(delivered.loc[agent_kind == "courier", "cost"])
    gv_cost = _log_order_sum(delivered.loc[agent_kind == "gv", "cost"])
    uav_seconds = _log_order_sum(delivered.loc[~agent_kind.isin(("courier", "gv")), "raw_cost"])
    total = courier_cost + gv_cost
    gv_count = int((agent_kind == "gv").sum())
    modes = delivered.loc[agent_kind == "gv", "mode"].value_counts(dropna=False)
    delays = frame.loc[kind == "gv_trip_end", "delay"].astype(float)
    delays = delays[delays > 0].to_numpy()

    def pct(q):
        return float(np.percentile(minutes, q)) if minutes.size else None

    return Metrics(
        ordered=ordered,
        delivered=len(delivered),
        failed=failed,
        pending=ordered - len(delivered) - failed,
        mean_delivery_min=float(minutes.mean()) if minutes.size else None,
        p50_delivery_min=pct(50),
        p90_delivery_min=pct(90),
        p95_delivery_min=pct(95),
        max_delivery_min=float(minutes.max()) if minutes.size else None,
        courier_cost=courier_cost,
        gv_cost=gv_cost,
        total_cost=total,
        courier_cost_share=100.0 * courier_cost / total if total > 0 else 0.0,
        gv_cost_share=100.0 * gv_cost / total if total > 0 else 0.0,
        uav_seconds=uav_seconds,
        taxi_price=gv_cost / gv_count if gv_count else None,
        delivered_by_uav=int((agent_kind == "uav").sum()),
        delivered_by_courier=int((agent_kind == "courier").sum()),
        delivered_by_gv=gv_count,
        gv_mode_counts={mode: int(n) for mode, n in sorted(modes.items())},
        gv_delayed_trips=int(delays.size),
        gv_delay_mean_s=float(np.mean(delays)) if delays.size else None,
        gv_delay_max_s=float(np.max(delays)) if delays.size else None,
        delivery_histogram=np.histogram(minutes, bins=HISTOGRAM_EDGES)[0].tolist(),
    )


def write_event_log(log: Iterable[Dict[str, Any]], path: str) -> None:
    with open(path, "w") as f:
        for record in log:
            f.write(json.dumps(record) + "\n")


def read_event_log(path: str) -> List[Dict[str, Any]]:
    records = []
    with open(path) as f:
        for n, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as err:
                raise CorruptLog(f"line {n}: {err}", line=n) from err
    return records
