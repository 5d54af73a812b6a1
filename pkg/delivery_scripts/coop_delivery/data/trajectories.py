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

"""GPS trajectories of crowdsourced vehicles: parsing, trip segmentation and sampling."""

import math
from itertools import groupby
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from coop_delivery.core.agents import GvState, GvTrace, GvTrip
from coop_delivery.core.errors import ParseError
from coop_delivery.core.geo import Location, ServiceArea
from coop_delivery.core.logger import logger
from coop_delivery.data.orders import check_in_area, line_of, parse_float, parse_time_column, projected_table, read_table
from coop_delivery.data.records import TRAJECTORY_COLUMNS, TrajectoryRecord

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


def scaled_count(ratio: float, n: int) -> int:
    """round(ratio * n), halves rounded up."""
    return int(math.floor(ratio * n + 0.5))


def _parse_flag(value: str, row_index: int) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ParseError(f"occupied={value!r} is not a passenger status", line=line_of(row_index))


def read_trajectory_records(
    path: str, area: Optional[ServiceArea] = None, lonlat_anchor: Optional[Tuple[float, float]] = None
) -> List[TrajectoryRecord]:
    """Parses ``trajectories.csv``; timestamps must not decrease within a vehicle.

    With ``lonlat_anchor`` the x/y columns hold lon/lat and are projected to meters
    around the centroid of ``area``.
    """
    df = projected_table(read_table(path, TRAJECTORY_COLUMNS), [("x", "y")], area, lonlat_anchor)
    times = parse_time_column(df["t"], "t")
    last_seen: Dict[str, float] = {}
    records = []
    for i, row in enumerate(df.itertuples(index=False)):
        vehicle = row.vehicle_id.strip()
        if not vehicle:
            raise ParseError("empty vehicle_id", line=line_of(i))
        t = float(times[i])
        if t < last_seen.get(vehicle, -math.inf):
            raise ParseError(f"timestamp {t} of vehicle {vehicle} goes backwards", line=line_of(i))
        last_seen[vehicle] = t
        loc = Location(parse_float(row.x, "x", i), parse_float(row.y, "y", i))
        check_in_area(area, loc, "position", i)
        records.append(
            TrajectoryRecord(
                vehicle_id=vehicle,
                t=t,
                l=loc,
                occupied=_parse_flag(row.occupied, i),
                speed=parse_float(row.speed, "speed", i) if row.speed != "" else 0.0,
                heading=parse_float(row.heading, "heading", i) if row.heading != "" else 0.0,
            )
        )
    return records


def segment_trips(records: Sequence[TrajectoryRecord]) -> List[GvTrip]:
    """Trips of one vehicle from its passenger-status transitions.

    A trip starts at the first occupied record and ends at the next unoccupied
    one, or at the last record when the trace ends occupied. Zero-length trips
    are dropped.
    """
    trips = []
    start: Optional[TrajectoryRecord] = None
    for rec in records:
        if rec.occupied and start is None:
            start = rec
        elif not rec.occupied and start is not None:
            if rec.t > start.t:
                trips.append(GvTrip(origin=start.l, destination=rec.l, start=start.t, end=rec.t))
            start = None
    if start is not None and records[-1].t > start.t:
        trips.append(GvTrip(origin=start.l, destination=records[-1].l, start=start.t, end=records[-1].t))
    return trips


def vehicle_from_records(vehicle_id: str, records: Sequence[TrajectoryRecord], speed: float) -> GvState:
    trace = GvTrace(
        times=np.array([r.t for r in records], dtype=float),
        xs=np.array([r.l[0] for r in records], dtype=float),
        ys=np.array([r.l[1] for r in records], dtype=float),
    )
    return GvState(
        id=f"gv-{vehicle_id}",
        speed=speed,
        trips=tuple(segment_trips(records)),
        trace=trace,
        home=Location(*records[0].l),
    )


def vehicles_from_records(records: Sequence[TrajectoryRecord], speed: float = 8.0) -> List[GvState]:
    """One vehicle per id, sorted by id; file order between vehicles does not matter."""
    by_vehicle = sorted(records, key=lambda r: r.vehicle_id)  # stable: keeps time order per vehicle
    return [vehicle_from_records(vid, list(recs), speed) for vid, recs in groupby(by_vehicle, key=lambda r: r.vehicle_id)]


def sample_vehicles(vehicles: Sequence[GvState], ratio: float, seed: int) -> List[GvState]:
    """Seeded uniform subsample of round(ratio * V) vehicles, returned in id order."""
    if not 0 < ratio <= 1:
        raise ValueError(f"participation ratio must lie in (0, 1], got {ratio}")
    ordered = sorted(vehicles, key=lambda v: v.id)
    k = scaled_count(ratio, len(ordered))
    picked = np.random.default_rng(seed).choice(len(ordered), size=k, replace=False)
    return [ordered[i] for i in sorted(picked)]


def load_trajectories(
    path: str,
    ratio: float = 1.0,
    seed: int = 0,
    speed: float = 8.0,
    area: Optional[ServiceArea] = None,
    lonlat_anchor: Optional[Tuple[float, float]] = None,
) -> List[GvState]:
    vehicles = vehicles_from_records(read_trajectory_records(path, area, lonlat_anchor), speed)
    selected = sample_vehicles(vehicles, ratio, seed)
    logger.debug(f"Selected {len(selected)} of {len(vehicles)} vehicles from {path}")
    return selected


def vehicle_records(gv: GvState) -> List[TrajectoryRecord]:
    """Trace samples of ``gv`` with passenger status re-derived from its trips."""
    if gv.trace is None:
        raise ValueError(f"{gv.id} has no trace to serialize")
    vehicle_id = gv.id[3:] if gv.id.startswith("gv-") else gv.id
    times, xs, ys = gv.trace.times, gv.trace.xs, gv.trace.ys
    dt = np.diff(times)
    dx, dy = np.diff(xs), np.diff(ys)
    with np.errstate(divide="ignore", invalid="ignore"):
        speeds = np.where(dt > 0, np.hypot(dx, dy) / dt, 0.0)
    headings = np.degrees(np.arctan2(dx, dy)) % 360.0  # clockwise from north
    speeds = np.append(speeds, 0.0)
    headings = np.append(headings, headings[-1] if headings.size else 0.0)
    return [
        TrajectoryRecord(
            vehicle_id=vehicle_id,
            t=float(t),
            l=Location(float(x), float(y)),
            occupied=any(trip.start <= t < trip.end for trip in gv.trips),
            speed=float(v),
            heading=float(h),
        )
        for t, x, y, v, h in zip(times, xs, ys, speeds, headings)
    ]


def save_trajectories(records: Sequence[TrajectoryRecord], path: str) -> None:
    rows = [
        {
            "vehicle_id": r.vehicle_id,
            "t": r.t,
            "x": r.l[0],
            "y": r.l[1],
            "occupied": int(r.occupied),
            "speed": r.speed,
            "heading": r.heading,
        }
        for r in records
    ]
    pd.DataFrame(rows, columns=list(TRAJECTORY_COLUMNS)).to_csv(path, index=False)
