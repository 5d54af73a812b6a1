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

"""Loading and writing the order dataset (``orders.csv``)."""

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from coop_delivery.core.errors import OutOfBounds, ParseError
from coop_delivery.core.geo import Location, ServiceArea, project_lonlat
from coop_delivery.core.logger import logger
from coop_delivery.data.records import DEFAULT_WEIGHT, ORDER_COLUMNS, OrderRecord

DAY = 86400.0
TRAIN_DAYS = 23


def read_table(path: str, required: Sequence[str]) -> pd.DataFrame:
    """Reads a CSV with every cell as a string; an empty file is an empty table."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=list(required))
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise ParseError(f"{path}: header lacks columns {missing}", line=1)
    return df


def line_of(row_index: int) -> int:
    """File line of a data row, counting the header as line 1."""
    return row_index + 2


def parse_float(value: str, column: str, row_index: int) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ParseError(f"{column}={value!r} is not a number", line=line_of(row_index)) from None
    if not math.isfinite(out):
        raise ParseError(f"{column}={value!r} is not finite", line=line_of(row_index))
    return out


def parse_time_column(values: pd.Series, column: str) -> np.ndarray:
    """Seconds, from integer/float epoch seconds or ISO-8601 stamps (detected per column)."""
    if values.empty:
        return np.empty(0)
    numeric = pd.to_numeric(values, errors="coerce")
    if numeric.notna().all():
        return np.array([parse_float(v, column, i) for i, v in enumerate(values)])
    stamps = pd.to_datetime(values, utc=True, errors="coerce", format="ISO8601")
    bad = np.flatnonzero(stamps.isna().to_numpy())
    if bad.size:
        i = int(bad[0])
        raise ParseError(f"{column}={values.iloc[i]!r} is neither epoch seconds nor ISO-8601", line=line_of(i))
    return (stamps - pd.Timestamp(0, tz="UTC")).dt.total_seconds().to_numpy()


def projected_table(
    df: pd.DataFrame,
    pairs: Sequence[Tuple[str, str]],
    area: Optional[ServiceArea],
    lonlat_anchor: Optional[Tuple[float, float]],
) -> pd.DataFrame:
    """Replaces lon/lat column pairs by meters; a no-op without an anchor."""
    if lonlat_anchor is None or df.empty:
        return df
    if area is None:
        raise ValueError("projecting lon/lat needs the service area its centroid is anchored on")
    df = df.copy()
    for x_col, y_col in pairs:
        lon = np.array([parse_float(v, x_col, i) for i, v in enumerate(df[x_col])])
        lat = np.array([parse_float(v, y_col, i) for i, v in enumerate(df[y_col])])
        xs, ys = project_lonlat(lon, lat, area, lonlat_anchor)
        df[x_col] = [repr(float(v)) for v in xs]
        df[y_col] = [repr(float(v)) for v in ys]
    return df


def check_in_area(area: Optional[ServiceArea], loc: Location, what: str, row_index: int) -> None:
    if area is not None and not area.contains(loc):
        raise OutOfBounds(f"{what} {tuple(loc)} lies outside the service area", line=line_of(row_index))


def load_orders(
    path: str, area: Optional[ServiceArea] = None, lonlat_anchor: Optional[Tuple[float, float]] = None
) -> List[OrderRecord]:
    """Parses ``orders.csv`` into records sorted by pickup time.

    :param str path: CSV with columns t_pickup,x_pickup,y_pickup,t_dropoff,x_dropoff,y_dropoff
        and optional weight,order_id.
    :param ServiceArea area: when given, locations outside it raise OutOfBounds.
    :param tuple lonlat_anchor: (lon, lat) of the area centroid when coordinates are lon/lat.
    """
    df = projected_table(
        read_table(path, ORDER_COLUMNS), [("x_pickup", "y_pickup"), ("x_dropoff", "y_dropoff")], area, lonlat_anchor
    )
    t_pickup = parse_time_column(df["t_pickup"], "t_pickup")
    t_dropoff = parse_time_column(df["t_dropoff"], "t_dropoff")
    records = []
    for i, row in enumerate(df.itertuples(index=False)):
        row = row._asdict()
        if t_dropoff[i] < t_pickup[i]:
            raise ParseError(f"dropoff time {t_dropoff[i]} precedes pickup time {t_pickup[i]}", line=line_of(i))
        pickup = Location(parse_float(row["x_pickup"], "x_pickup", i), parse_float(row["y_pickup"], "y_pickup", i))
        dropoff = Location(parse_float(row["x_dropoff"], "x_dropoff", i), parse_float(row["y_dropoff"], "y_dropoff", i))
        check_in_area(area, pickup, "pickup", i)
        check_in_area(area, dropoff, "dropoff", i)
        weight = parse_float(row["weight"], "weight", i) if row.get("weight", "") != "" else DEFAULT_WEIGHT
        if weight <= 0:
            raise ParseError(f"weight must be > 0, got {weight}", line=line_of(i))
        records.append(
            OrderRecord(
                t_pickup=float(t_pickup[i]),
                l_pickup=pickup,
                t_dropoff=float(t_dropoff[i]),
                l_dropoff=dropoff,
                weight=weight,
                order_id=row.get("order_id") or None,
            )
        )
    order = sorted(range(len(records)), key=lambda k: records[k].t_pickup)
    records = [records[k] for k in order]
    if any(r.order_id is None for r in records):
        records = [r if r.order_id else _with_id(r, f"p{k + 1:06d}") for k, r in enumerate(records)]
    logger.debug(f"Loaded {len(records)} orders from {path}")
    return records


def _with_id(record: OrderRecord, order_id: str) -> OrderRecord:
    return OrderRecord(record.t_pickup, record.l_pickup, record.t_dropoff, record.l_dropoff, record.weight, order_id)


def save_orders(records: Sequence[OrderRecord], path: str) -> None:
    rows = [
        {
            "t_pickup": r.t_pickup,
            "x_pickup": r.l_pickup[0],
            "y_pickup": r.l_pickup[1],
            "t_dropoff": r.t_dropoff,
            "x_dropoff": r.l_dropoff[0],
            "y_dropoff": r.l_dropoff[1],
            "weight": r.weight,
            "order_id": r.order_id or "",
        }
        for r in records
    ]
    columns = list(ORDER_COLUMNS) + ["weight", "order_id"]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)


def day_index(t: float, origin: float = 0.0) -> int:
    return int((t - origin) // DAY)


def split_train_eval(
    records: Sequence[OrderRecord], train_days: int = TRAIN_DAYS, origin: Optional[float] = None
) -> Tuple[List[OrderRecord], List[OrderRecord]]:
    """Splits a month of orders by day: the first ``train_days`` days train, the rest evaluate.

    Days are counted from midnight of the earliest order unless ``origin`` is given.
    """
    if not records:
        return [], []
    if origin is None:
        origin = min(r.t_pickup for r in records) // DAY * DAY
    train, evaluate = [], []
    for r in records:
        (train if day_index(r.t_pickup, origin) < train_days else evaluate).append(r)
    return train, evaluate


def orders_by_day(records: Sequence[OrderRecord], origin: Optional[float] = None) -> Dict[int, List[OrderRecord]]:
    """Groups orders per day with times re-expressed as seconds of that day."""
    if not records:
        return {}
    if origin is None:
        origin = min(r.t_pickup for r in records) // DAY * DAY
    days: Dict[int, List[OrderRecord]] = {}
    for r in records:
        day = day_index(r.t_pickup, origin)
        shift = origin + day * DAY
        days.setdefault(day, []).append(
            OrderRecord(r.t_pickup - shift, r.l_pickup, r.t_dropoff - shift, r.l_dropoff, r.weight, r.order_id)
        )
    return days
