import numpy as np
import pytest

from coop_delivery.core.agents import AgentKind, AgentRegistry, CourierState, GvState, Parcel, UavState, idle_route
from coop_delivery.core.errors import InstanceTooLarge
from coop_delivery.core.feasibility import PlanningContext, plan_for
from coop_delivery.core.geo import Location
from coop_delivery.dispatch.candidates import DispatchContext
from coop_delivery.dispatch.oracle import brute_force_oracle, compare_with_oracle, random_instance, summarize_gaps
from coop_delivery.dispatch.policies import greedy_gapar

CTX = DispatchContext(planning=PlanningContext(), candidate_pool=None)


def gv(gid, home):
    return GvState(gid, 8.0, home=Location(*home))


class TestBruteForceOracle:
    def test_picks_cheaper_agent(self):
        p = Parcel("p1", 0.0, Location(1000, 0), Location(1000, 1000), 1.0)
        registry = AgentRegistry([gv("gv-1", (0, 0)), gv("gv-2", (3000, 3000))])
        result = brute_force_oracle([p], registry, 0.0, CTX)
        costs = sorted(plan_for(a, p, 0.0, CTX.planning).cost for a in registry)
        assert result.count == 1
        assert result.cost == pytest.approx(costs[0])
        assert result.assignment == ("gv-1",)

    def test_infeasible_parcel(self):
        p = Parcel("p1", 0.0, Location(90000, 0), Location(90000, 1000), 1.0)
        result = brute_force_oracle([p], AgentRegistry([gv("gv-1", (0, 0))]), 0.0, CTX)
        assert result.count == 0 and result.assignment == (None,)

    def test_leaves_registry_alone(self):
        rng = np.random.default_rng(0)
        parcels, registry = random_instance(rng, 4, 3)
        before = {a.id: a for a in registry}
        brute_force_oracle(parcels, registry, 0.0, CTX)
        assert {a.id: a for a in registry} == before

    def test_too_large(self):
        parcels, registry = random_instance(np.random.default_rng(1), 9, 2)
        with pytest.raises(InstanceTooLarge):
            brute_force_oracle(parcels, registry, 0.0, CTX)


class TestGreedyAgainstOracle:
    def test_gv_instances(self):
        # one parcel per vehicle: the oracle bounds greedy in count and, at equal count, in cost
        gaps = compare_with_oracle(n_instances=40, seed=7, ctx=CTX, max_parcels=6, max_agents=3, kinds=(AgentKind.GV,))
        for gap in gaps:
            assert gap.oracle_count >= gap.greedy_count, f"instance {gap.instance}"
            if gap.oracle_count == gap.greedy_count:
                assert gap.oracle_cost <= gap.greedy_cost + 1e-9, f"instance {gap.instance}"
        summary = summarize_gaps(gaps)
        assert summary["instances"] == 40
        assert summary["min_ratio"] >= 0.5

    def test_six_by_three(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            parcels, registry = random_instance(rng, 6, 3)
            oracle = brute_force_oracle(parcels, registry, 0.0, CTX)
            greedy = greedy_gapar(parcels, registry.copy(), 0.0, CTX)
            assert oracle.count - len(greedy) <= len(parcels) // 2

    def test_summary_of_nothing(self):
        assert summarize_gaps([])["instances"] == 0


def isolated_instance(seed):
    """Four agents of mixed kinds 20-40 km apart, one parcel next to each; no agent reaches another's parcel."""
    rng = np.random.default_rng(seed)

    def near(x, y):
        return Location(*map(float, np.array([x, y]) + rng.uniform(-500.0, 500.0, 2)))

    e_max = 2400 * 320.9
    station = near(20000, 20000)
    courier_home = near(40000, 40000)
    registry = AgentRegistry(
        [
            gv("gv-00", near(0, 0)),
            gv("gv-01", near(40000, 0)),
            UavState("uav-00", "s0", station, station, 16.0, e_max, e_max, 0.1, 2.0, idle_route(station, 0.0, e_max, "s0")),
            CourierState("courier-00", "s1", courier_home, 5.0, 5, idle_route(courier_home, 0.0)),
        ]
    )
    parcels = []
    for k, agent in enumerate(registry):
        home = agent.location_at(0.0) if isinstance(agent, GvState) else agent.location
        l_o = Location(home.x + 300.0, home.y)
        parcels.append(Parcel(f"p{k:02d}", 0.0, l_o, Location(l_o.x, l_o.y + 1000.0), 1.0))
    return parcels, registry


@pytest.mark.slow
class TestMixedKinds:
    def test_cost_and_count_bounds(self):
        gaps = compare_with_oracle(n_instances=200, seed=11, ctx=CTX, max_parcels=6, max_agents=4)
        for gap in gaps:
            assert gap.oracle_count >= gap.greedy_count, f"instance {gap.instance}"
            if gap.oracle_count == gap.greedy_count:
                assert gap.greedy_cost >= gap.oracle_cost - 1e-9, f"instance {gap.instance}: {gap}"
        summary = summarize_gaps(gaps)
        assert summary["mean_ratio"] >= 0.9, f"{summary}"

    @pytest.mark.parametrize("seed", range(5))
    def test_single_feasible_agent(self, seed):
        parcels, registry = isolated_instance(seed)
        for p in parcels:
            feasible = [a.id for a in registry if plan_for(a, p, 0.0, CTX.planning)]
            assert len(feasible) == 1, f"{p.id}: {feasible}"
        oracle = brute_force_oracle(parcels, registry, 0.0, CTX)
        greedy = greedy_gapar(parcels, registry.copy(), 0.0, CTX)
        assert oracle.count == len(greedy) == len(parcels)
        assert sum(d.cost for d in greedy) == pytest.approx(oracle.cost, abs=1e-9)
        assert sorted((d.parcel_id, d.agent_id) for d in greedy) == sorted(
            (p.id, a) for p, a in zip(parcels, oracle.assignment)
        )
