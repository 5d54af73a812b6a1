import numpy as np
import pytest

from coop_delivery.core.agents import (
    AgentKind,
    AgentRegistry,
    CourierState,
    GvState,
    GvTrace,
    GvTrip,
    Parcel,
    ParcelStatus,
    RoutePlan,
    UavState,
    Waypoint,
    idle_route,
    payload_profile,
    route_payloads,
    status_report,
)
from coop_delivery.core.geo import Location


def make_parcel(pid="p1", t_o=0.0, weight=0.5):
    return Parcel(id=pid, t_o=t_o, l_o=Location(0, 0), l_s=Location(100, 0), weight=weight)


class TestPayloadProfile:
    def test_recurrence(self):
        assert payload_profile([+2, +1, -3]) == [2, 3, 0]

    def test_route_counts(self):
        a, b = make_parcel("a"), make_parcel("b")
        route = RoutePlan(
            waypoints=(
                Waypoint(t=0, l=Location(0, 0)),
                Waypoint(t=10, l=Location(0, 0), parcels=("a", "b"), mu=1),
                Waypoint(t=20, l=Location(100, 0), parcels=("a",), mu=-1),
                Waypoint(t=30, l=Location(100, 0), parcels=("b",), mu=-1),
            ),
            manifest={"a": a, "b": b},
        )
        assert route_payloads(route) == [0, 2, 1, 0]
        assert route_payloads(route, by_weight=True) == pytest.approx([0, 1.0, 0.5, 0.0])


class TestParcel:
    def test_weight_positive(self):
        with pytest.raises(ValueError):
            make_parcel(weight=0)

    def test_happy_path(self):
        p = make_parcel(t_o=100).assign("courier-00-00").deliver(700)
        assert p.status is ParcelStatus.DELIVERED
        assert p.delivery_time == 600

    def test_pending_to_failed(self):
        assert make_parcel().fail().status is ParcelStatus.FAILED

    @pytest.mark.parametrize(
        "steps",
        [
            lambda p: p.deliver(10),
            lambda p: p.assign("x").fail(),
            lambda p: p.fail().assign("x"),
            lambda p: p.assign("x").deliver(10).deliver(20),
        ],
    )
    def test_illegal_transitions(self, steps):
        with pytest.raises(ValueError):
            steps(make_parcel())


class TestRoutePlan:
    def test_advance_drops_delivered_parcels(self):
        p = make_parcel()
        route = RoutePlan(
            waypoints=(
                Waypoint(t=0, l=Location(0, 0), parcels=("p1",), mu=1, payload_after=1),
                Waypoint(t=20, l=Location(100, 0), parcels=("p1",), mu=-1),
                Waypoint(t=40, l=Location(0, 0)),
            ),
            manifest={"p1": p},
        )
        step = route.advance()
        assert step.anchor.mu == -1 and "p1" in step.manifest
        done = step.advance()
        assert done.is_idle and done.manifest == {}
        with pytest.raises(ValueError):
            done.advance()

    def test_dropoff_time(self):
        route = RoutePlan(
            waypoints=(Waypoint(t=0, l=Location(0, 0)), Waypoint(t=5, l=Location(1, 0), parcels=("q",), mu=-1))
        )
        assert route.dropoff_time("q") == 5
        assert route.dropoff_time("missing") is None


class TestStatusReport:
    def test_courier_payload(self):
        route = RoutePlan(
            waypoints=(Waypoint(t=50, l=Location(10, 0), parcels=("x",), mu=-1, payload_after=2),),
        )
        courier = CourierState("courier-00-00", "c00", Location(10, 0), 5.0, 5, route)
        record = status_report(courier, 50)
        assert record.kind is AgentKind.COURIER
        assert record.payload == 2

    def test_gv_new_trip(self):
        trip = GvTrip(Location(0, 0), Location(1000, 0), 100, 300)
        gv = GvState("gv-7", 8.0, trips=(trip,), occupied=True, home=Location(0, 0))
        record = status_report(gv, 100)
        assert record.occupied is True
        assert record.trip == trip

    def test_uav_energy(self):
        uav = UavState(
            "uav-00-00",
            "u00",
            Location(0, 0),
            Location(0, 0),
            16.0,
            1000.0,
            400.0,
            0.1,
            2.0,
            idle_route(Location(0, 0), 0, energy=400.0),
        )
        assert status_report(uav, 10).energy == pytest.approx(0.4 * uav.e_max)

    def test_uav_energy_bounds(self):
        with pytest.raises(ValueError):
            UavState("u", "s", Location(0, 0), Location(0, 0), 16.0, 100.0, 101.0, 0.1, 2.0, idle_route(Location(0, 0), 0))


class TestGv:
    def test_trace_interpolation(self):
        trace = GvTrace(np.array([0.0, 10.0]), np.array([0.0, 80.0]), np.array([0.0, 0.0]))
        gv = GvState("gv-1", 8.0, trace=trace)
        assert gv.location_at(5.0) == Location(40.0, 0.0)
        assert gv.location_at(99.0) == Location(80.0, 0.0)

    def test_parked_overrides_trace(self):
        trace = GvTrace(np.array([0.0, 10.0]), np.array([0.0, 80.0]), np.array([0.0, 0.0]))
        gv = GvState("gv-1", 8.0, trace=trace, parked_at=Location(3, 4))
        assert gv.location_at(5.0) == Location(3, 4)

    def test_trip_window(self):
        trips = (GvTrip(Location(0, 0), Location(1, 1), 10, 20), GvTrip(Location(1, 1), Location(2, 2), 40, 60))
        gv = GvState("gv-1", 8.0, trips=trips, home=Location(0, 0))
        assert gv.trip == trips[0]
        assert gv.following_trip_start == 40
        last = GvState("gv-1", 8.0, trips=trips, trip_index=1, home=Location(0, 0))
        assert last.following_trip_start == float("inf")

    def test_delayed_trip_keeps_duration(self):
        trip = GvTrip(Location(0, 0), Location(1, 1), 100, 160)
        assert trip.delayed(130, extra=5) == GvTrip(Location(0, 0), Location(1, 1), 130, 195)


class TestAgentRegistry:
    def test_iteration_order_follows_kind_then_id(self):
        registry = AgentRegistry(
            [
                GvState("gv-2", 8.0, home=Location(0, 0)),
                CourierState("courier-01-00", "c01", Location(0, 0), 5.0, 5, idle_route(Location(0, 0), 0)),
                GvState("gv-1", 8.0, home=Location(0, 0)),
                CourierState("courier-00-00", "c00", Location(0, 0), 5.0, 5, idle_route(Location(0, 0), 0)),
            ]
        )
        assert [a.id for a in registry] == ["courier-00-00", "courier-01-00", "gv-1", "gv-2"]

    def test_duplicate_id(self):
        registry = AgentRegistry([GvState("gv-1", 8.0, home=Location(0, 0))])
        with pytest.raises(ValueError):
            registry.add(GvState("gv-1", 8.0, home=Location(0, 0)))

    def test_report_replaces_snapshot(self):
        registry = AgentRegistry([GvState("gv-1", 8.0, home=Location(0, 0))])
        moved = GvState("gv-1", 8.0, home=Location(0, 0), parked_at=Location(5, 5))
        registry.report(moved, 30)
        assert registry["gv-1"].parked_at == Location(5, 5)
        assert registry.records["gv-1"].timestamp == 30

    def test_copy_is_independent(self):
        registry = AgentRegistry([GvState("gv-1", 8.0, home=Location(0, 0))])
        clone = registry.copy()
        clone.replace(GvState("gv-1", 8.0, home=Location(9, 9)))
        assert registry["gv-1"].home == Location(0, 0)
