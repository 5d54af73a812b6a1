import pytest

from coop_delivery.config.schema import ExperimentSpec, Policy
from coop_delivery.core.agents import GvState, GvTrip
from coop_delivery.core.errors import OutOfBounds, ParseError
from coop_delivery.core.experiment import run_cell
from coop_delivery.core.geo import Location, ServiceArea
from coop_delivery.data.orders import DAY, load_orders, orders_by_day, save_orders, split_train_eval
from coop_delivery.data.records import OrderRecord
from coop_delivery.data.scenario import Scenario, save_scenario, split_scenario

HEADER = "t_pickup,x_pickup,y_pickup,t_dropoff,x_dropoff,y_dropoff"
AREA = ServiceArea(0.0, 0.0, 10000.0, 10000.0)


def write(tmp_path, *lines, name="orders.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestLoadOrders:
    def test_three_rows_in_time_order(self, tmp_path):
        path = write(
            tmp_path,
            HEADER,
            "36000,100,200,36900,900,200",
            "30000,0,0,30600,500,500",
            "33000,10,10,33300,20,20",
        )
        records = load_orders(path)
        assert [r.t_pickup for r in records] == [30000.0, 33000.0, 36000.0]
        assert [r.order_id for r in records] == ["p000001", "p000002", "p000003"]
        assert records[0].weight == 1.0
        assert records[2].l_dropoff == Location(900.0, 200.0)

    def test_dropoff_before_pickup(self, tmp_path):
        path = write(tmp_path, HEADER, "30000,0,0,30600,500,500", "36000,100,200,35000,900,200")
        with pytest.raises(ParseError) as err:
            load_orders(path)
        assert err.value.line == 3

    def test_empty_file(self, tmp_path):
        assert load_orders(write(tmp_path, "")) == []
        assert load_orders(write(tmp_path, HEADER, name="header_only.csv")) == []

    def test_missing_column(self, tmp_path):
        with pytest.raises(ParseError) as err:
            load_orders(write(tmp_path, "t_pickup,x_pickup", "1,2"))
        assert err.value.line == 1

    def test_not_a_number(self, tmp_path):
        with pytest.raises(ParseError) as err:
            load_orders(write(tmp_path, HEADER, "30000,zero,0,30600,500,500"))
        assert err.value.line == 2

    def test_iso_timestamps(self, tmp_path):
        path = write(tmp_path, HEADER, "1970-01-01T10:00:00Z,0,0,1970-01-01T10:20:00Z,500,500")
        (record,) = load_orders(path)
        assert (record.t_pickup, record.t_dropoff) == (36000.0, 37200.0)

    def test_weight_and_id_columns(self, tmp_path):
        path = write(tmp_path, HEADER + ",weight,order_id", "30000,0,0,30600,500,500,0.4,abc")
        (record,) = load_orders(path)
        assert (record.weight, record.order_id) == (0.4, "abc")
        with pytest.raises(ParseError):
            load_orders(write(tmp_path, HEADER + ",weight", "30000,0,0,30600,500,500,-1", name="bad.csv"))

    def test_outside_area(self, tmp_path):
        path = write(tmp_path, HEADER, "30000,0,0,30600,50000,500")
        with pytest.raises(OutOfBounds):
            load_orders(path, AREA)

    def test_lonlat_columns(self, tmp_path):
        path = write(tmp_path, HEADER, "30000,121.47,31.23,30600,121.48,31.23")
        (record,) = load_orders(path, AREA, lonlat_anchor=(121.47, 31.23))
        assert record.l_pickup == pytest.approx((5000.0, 5000.0))
        assert record.l_dropoff[0] - 5000.0 == pytest.approx(950.8, rel=1e-3)

    def test_save_round_trip(self, tmp_path):
        records = [OrderRecord(30000.5, Location(1.25, 2.5), 30600.0, Location(3.0, 4.0), 0.7, "x1")]
        path = str(tmp_path / "orders.csv")
        save_orders(records, path)
        assert load_orders(path) == records


class TestDays:
    def month(self):
        return [OrderRecord(d * DAY + 36000.0, Location(0, 0), d * DAY + 36600.0, Location(1, 1), 1.0, f"p{d}") for d in range(30)]

    def test_split(self):
        train, evaluate = split_train_eval(self.month())
        assert len(train) == 23 and len(evaluate) == 7
        assert evaluate[0].order_id == "p23"

    def test_split_empty(self):
        assert split_train_eval([]) == ([], [])

    def test_by_day(self):
        days = orders_by_day(self.month())
        assert sorted(days) == list(range(30))
        assert all(day[0].t_pickup == 36000.0 for day in days.values())


def month_scenario(days=30, with_vehicle=True):
    orders = tuple(
        OrderRecord(d * DAY + 36000.0, Location(100, 100), d * DAY + 36600.0, Location(600, 100), 1.0, f"p{d:02d}")
        for d in range(days)
    )
    trips = (
        GvTrip(Location(0, 0), Location(500, 0), 2 * DAY + 3600.0, 2 * DAY + 3700.0),
        GvTrip(Location(0, 0), Location(500, 0), 25 * DAY + 3600.0, 25 * DAY + 3700.0),
    )
    return Scenario(
        area=AREA,
        orders=orders,
        vehicles=(GvState("gv-000", 8.0, trips=trips, home=Location(0, 0)),) if with_vehicle else (),
        uav_stations=(),
        courier_stations=(Location(0, 0),),
        horizon_start=0.0,
        horizon_end=days * DAY,
        uavs_per_station=0,
        couriers_per_station=1,
        name="month",
    )


class TestSplitScenario:
    def test_month(self):
        train, evaluate = split_scenario(month_scenario())
        assert [o.order_id for o in train.orders] == [f"p{d:02d}" for d in range(23)]
        assert [o.order_id for o in evaluate.orders] == [f"p{d:02d}" for d in range(23, 30)]
        assert train.horizon_end == 23 * DAY and evaluate.horizon_start == 23 * DAY
        assert len(train.vehicles[0].trips) == 2
        assert [t.start for t in evaluate.vehicles[0].trips] == [25 * DAY + 3600.0]

    @pytest.mark.parametrize("days", [1, 10])
    def test_too_short_to_hold_out(self, days):
        scenario = month_scenario(days)
        train, evaluate = split_scenario(scenario)
        assert train is scenario and evaluate is scenario

    def test_cells_evaluate_held_out_days(self, tmp_path, small_config):
        path = save_scenario(month_scenario(with_vehicle=False), str(tmp_path / "month"))
        spec = ExperimentSpec(source="files", scenario_path=path, policies=["without_tl"], seeds=[0])
        row = run_cell(spec, small_config, Policy.WITHOUT_TL, None, 0)
        assert row["ordered"] == 7, f"{row}"
        assert row["delivered"] + row["failed"] == 7
