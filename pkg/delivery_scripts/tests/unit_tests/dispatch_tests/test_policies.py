import pytest

from coop_delivery.config.schema import Policy
from coop_delivery.core.agents import (
    AgentKind,
    AgentRegistry,
    CourierState,
    GvState,
    Parcel,
    UavState,
    idle_route,
)
from coop_delivery.core.feasibility import PlanningContext
from coop_delivery.core.geo import Location, ServiceArea
from coop_delivery.dispatch.candidates import DispatchContext, generate_candidates
from coop_delivery.dispatch.policies import (
    CostGreedyPolicy,
    OnDemandPolicy,
    TwoStagePolicy,
    dispatch_cost_greedy,
    dispatch_on_demand,
    greedy_gapar,
    make_policy,
    preference_stage,
)
from coop_delivery.preference.features import FeatureContext

E_MAX = 2400 * 320.9
CTX = DispatchContext(
    planning=PlanningContext(),
    features=FeatureContext(area=ServiceArea(0.0, 0.0, 40000.0, 40000.0)),
    candidate_pool=None,
)


class Constant:
    """Stands in for a trained model with a fixed preference."""

    def __init__(self, value):
        self.value = value

    def forward(self, x):
        return self.value


def courier(cid="courier-00-00", at=(1000, 0)):
    return CourierState(cid, "c00", Location(*at), 5.0, 5, idle_route(Location(*at), 0.0))


def uav(uid="uav-00-00", at=(0, 0)):
    here = Location(*at)
    return UavState(uid, "u00", here, here, 16.0, E_MAX, E_MAX, 0.1, 2.0, idle_route(here, 0.0, E_MAX, "u00"))


def gv(gid="gv-1", home=(0, 0)):
    return GvState(gid, 8.0, home=Location(*home))


def parcel(pid="p1", l_o=(1000, 0), l_s=(1000, 2000), t_o=0.0):
    return Parcel(pid, t_o, Location(*l_o), Location(*l_s), 1.0)


def models(courier_pref, gv_pref, uav_pref=0.1):
    return {AgentKind.COURIER: Constant(courier_pref), AgentKind.GV: Constant(gv_pref), AgentKind.UAV: Constant(uav_pref)}


class TestPreferenceStage:
    def test_cheapest_survivor_wins(self):
        registry = AgentRegistry([courier(), gv()])
        decisions, remaining = preference_stage([parcel()], registry, 0.0, CTX, models(0.9, 0.7))
        assert remaining == []
        (decision,) = decisions
        assert decision.agent_id == "courier-00-00"
        assert decision.cost == pytest.approx(6.30, rel=1e-9)
        assert registry["courier-00-00"].route.parcel_ids() == ["p1"]

    def test_gv_survives_alone(self):
        registry = AgentRegistry([courier(), gv()])
        decisions, _ = preference_stage([parcel()], registry, 0.0, CTX, models(0.3, 0.7))
        assert decisions[0].kind is AgentKind.GV
        assert decisions[0].cost == pytest.approx(8.10, rel=1e-9)

    def test_below_thresholds(self):
        registry = AgentRegistry([courier(), gv()])
        decisions, remaining = preference_stage([parcel()], registry, 0.0, CTX, models(0.2, 0.2))
        assert decisions == [] and [p.id for p in remaining] == ["p1"]

    def test_no_candidates(self):
        decisions, remaining = preference_stage([parcel()], AgentRegistry(), 0.0, CTX, models(0.9, 0.9))
        assert decisions == [] and len(remaining) == 1

    def test_observer_sees_every_candidate(self):
        rounds = []
        registry = AgentRegistry([courier(), gv()])
        preference_stage([parcel()], registry, 0.0, CTX, models(0.9, 0.7), observer=rounds.append)
        (round_,) = rounds
        assert sorted(agent.id for agent, _ in round_.candidates) == ["courier-00-00", "gv-1"]
        assert round_.chosen.agent_id == "courier-00-00"


class TestGreedyGapar:
    def test_forced_assignment_is_order_independent(self):
        parcels = [parcel("a", l_o=(0, 100), l_s=(0, 900)), parcel("b", l_o=(30000, 100), l_s=(30000, 900))]
        for ordering in (parcels, parcels[::-1]):
            registry = AgentRegistry([courier("courier-00-00", (0, 0)), courier("courier-01-00", (30000, 0))])
            decisions = greedy_gapar(ordering, registry, 0.0, CTX)
            assert {(d.parcel_id, d.agent_id) for d in decisions} == {("a", "courier-00-00"), ("b", "courier-01-00")}

    def test_empty(self):
        assert greedy_gapar([], AgentRegistry([courier()]), 0.0, CTX) == []

    def test_each_parcel_once(self):
        registry = AgentRegistry([courier(), gv(), gv("gv-2", (1000, 1000))])
        parcels = [parcel("a"), parcel("b", l_o=(1200, 0), l_s=(1200, 1500))]
        decisions = greedy_gapar(parcels, registry, 0.0, CTX)
        assert sorted(d.parcel_id for d in decisions) == ["a", "b"]


class TestTwoStage:
    def test_leftovers_go_to_gapar(self):
        policy = TwoStagePolicy(CTX, models(0.2, 0.2, 0.2))
        decisions = policy.dispatch([parcel()], AgentRegistry([courier(), gv()]), 0.0)
        assert [d.agent_id for d in decisions] == ["courier-00-00"]

    def test_needs_every_model(self):
        with pytest.raises(ValueError):
            TwoStagePolicy(CTX, {AgentKind.COURIER: Constant(0.5)})

    def test_make_policy(self):
        assert isinstance(make_policy(Policy.WITHOUT_TL, CTX), CostGreedyPolicy)
        assert make_policy(Policy.UAV_TAXI, CTX).kinds == {AgentKind.UAV, AgentKind.GV}
        assert isinstance(make_policy(Policy.ON_DEMAND, CTX), OnDemandPolicy)
        with pytest.raises(ValueError):
            make_policy(Policy.TWO_STAGE, CTX)


class TestCostGreedy:
    def test_all_kinds(self):
        decisions = dispatch_cost_greedy([parcel()], AgentRegistry([courier(), gv()]), 0.0, CTX)
        assert decisions[0].agent_id == "courier-00-00"

    def test_without_couriers(self):
        decisions = dispatch_cost_greedy(
            [parcel()], AgentRegistry([courier(), gv()]), 0.0, CTX, kinds={AgentKind.UAV, AgentKind.GV}
        )
        assert decisions[0].agent_id == "gv-1"

    def test_no_kinds(self):
        assert dispatch_cost_greedy([parcel()], AgentRegistry([courier(), gv()]), 0.0, CTX, kinds=()) == []


class TestOnDemand:
    def test_earliest_pickup(self):
        p = parcel(l_o=(1000, 0), l_s=(1000, 1500))
        registry = AgentRegistry([courier(at=(1450, 0)), gv(home=(760, 0))])
        (decision,) = dispatch_on_demand([p], registry, 0.0, CTX)
        assert decision.agent_id == "gv-1"
        assert decision.plan.pickup_time == pytest.approx(30.0)

    def test_tie_goes_to_uav(self):
        p = parcel(l_o=(160, 0), l_s=(160, 800))
        registry = AgentRegistry([courier(at=(210, 0)), uav(at=(0, 0))])
        (decision,) = dispatch_on_demand([p], registry, 0.0, CTX)
        assert decision.kind is AgentKind.UAV

    def test_no_feasible_agent(self):
        far = parcel(l_o=(39000, 39000), l_s=(39000, 38000))
        assert dispatch_on_demand([far], AgentRegistry([courier()]), 0.0, CTX) == []


class TestCandidates:
    def test_pool_keeps_nearest(self):
        couriers = [courier(f"courier-{k:02d}-00", (1000 + 500 * k, 0)) for k in range(5)]
        ctx = DispatchContext(planning=CTX.planning, features=CTX.features, candidate_pool=2)
        found = generate_candidates(parcel(), AgentRegistry(couriers), 0.0, ctx)
        assert [agent.id for agent, _ in found] == ["courier-00-00", "courier-01-00"]

    def test_busy_gv_skipped(self):
        busy = GvState("gv-1", 8.0, occupied=True, home=Location(0, 0))
        assert generate_candidates(parcel(), AgentRegistry([busy]), 0.0, CTX) == []
