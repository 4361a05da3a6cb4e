import itertools
import statistics

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfdgm.metrics import (
    BatteryStats,
    ConnectivityGraph,
    DiffusionState,
    ReachabilitySamples,
    accumulate_contact,
    accumulate_group,
    battery_stats,
    ccdf,
    ccdf_at,
    connected_components,
    diffusion_on_join,
    sample_diffusion,
    sample_reachability,
)


# -- contact graph ---------------------------------------------------------


def test_pair_accumulates_duration():
    cg = accumulate_contact(ConnectivityGraph(nodes=[0, 1]), 0, 1, 100)
    assert cg.weight(0, 1) == cg.weight(1, 0) == 100


def test_group_of_three_expands_to_every_pair():
    cg = accumulate_group(ConnectivityGraph(nodes=[3, 5, 9]), [9, 3, 5], 10)
    oracle = {tuple(sorted(p)): 10 for p in itertools.combinations([3, 5, 9], 2)}
    assert cg.edges == oracle


def test_never_grouped_nodes_have_no_edge():
    cg = accumulate_group(ConnectivityGraph(nodes=[0, 1, 2]), [0, 1], 5)
    assert cg.weight(0, 2) == 0 and (0, 2) not in cg.edges


def test_self_contact_rejected():
    with pytest.raises(ValueError):
        accumulate_contact(ConnectivityGraph(nodes=[0]), 0, 0, 1)


# -- components ------------------------------------------------------------


def _bfs_components(nodes, edges):
    adj = {v: set() for v in nodes}
    for (a, b), w in edges.items():
        if w > 0:
            adj[a].add(b)
            adj[b].add(a)
    seen, comps = set(), []
    for v in nodes:
        if v in seen:
            continue
        comp, queue = [], [v]
        seen.add(v)
        while queue:
            u = queue.pop()
            comp.append(u)
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return sorted(comps)


def test_isolated_nodes():
    rep = connected_components(ConnectivityGraph(nodes=list(range(5))))
    assert rep.count == 5 and rep.largest_fraction == pytest.approx(1 / 5)


def test_single_long_group():
    cg = accumulate_group(ConnectivityGraph(nodes=list(range(6))), range(6), 3600)
    rep = connected_components(cg)
    assert rep.count == 1 and rep.largest_fraction == 1.0


def test_components_match_bfs_on_1000_random_graphs():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        nodes = list(range(n))
        cg = ConnectivityGraph(nodes=nodes)
        p = rng.uniform()
        for a, b in itertools.combinations(nodes, 2):
            if rng.uniform() < p * 0.5:
                # zero-weight edges must not connect anything
                cg.edges[(a, b)] = float(rng.choice([0.0, rng.uniform(0.1, 10)]))
        rep = connected_components(cg)
        got = sorted(sorted(m) for _, m in rep.components)
        assert got == _bfs_components(nodes, cg.edges)
        assert sum(size for size, _ in rep.components) == n
        assert rep.largest_fraction == max(len(c) for c in got) / n


def test_restricted_components_use_induced_subgraph():
    cg = ConnectivityGraph(nodes=[0, 1, 2])
    accumulate_contact(cg, 0, 1, 1)
    accumulate_contact(cg, 1, 2, 1)
    rep = connected_components(cg, restrict_to=[0, 2])
    assert rep.count == 2


# -- reachability ----------------------------------------------------------


def test_static_group_always_reachable():
    rs = ReachabilitySamples(4)
    for _ in range(10):
        sample_reachability(rs, [[0, 1, 2]])
    assert rs.probability(0, 2) == 1.0
    assert rs.probability(0, 3) == 0.0


def test_unbridged_groups_never_reach_each_other():
    rs = ReachabilitySamples(4)
    for _ in range(5):
        sample_reachability(rs, [[0, 1], [2, 3]])
    assert rs.probability(1, 2) == 0.0 and rs.probability(2, 3) == 1.0


def test_half_of_the_samples():
    rs = ReachabilitySamples(3)
    for k in range(60):
        sample_reachability(rs, [[0, 1]] if k % 2 else [])
    assert rs.probability(0, 1) == 0.5


def test_multi_hop_through_shared_owner_chain():
    rs = ReachabilitySamples(5)
    sample_reachability(rs, [[0, 1], [1, 2], [3, 4]])
    assert rs.probability(0, 2) == 1.0 and rs.probability(0, 3) == 0.0


def test_reachability_rejects_self_pairs():
    with pytest.raises(ValueError):
        ReachabilitySamples(2).probability(1, 1)


@given(st.lists(st.lists(st.lists(st.integers(0, 7), min_size=1, max_size=4), max_size=3), max_size=10))
def test_reachability_probabilities_bounded(samples):
    rs = ReachabilitySamples(8)
    for groups in samples:
        sample_reachability(rs, groups)
    p = rs.probabilities()
    assert len(p) == 28
    assert ((p >= 0) & (p <= 1)).all()


# -- CCDF ------------------------------------------------------------------


def test_ccdf_examples():
    assert all(f == 1.0 for _, f in ccdf([1.0, 1.0, 1.0]))
    assert ccdf_at([0.0, 1.0], 0.5) == 0.5
    assert ccdf([]) == []


def test_ccdf_matches_sort_and_count_on_1000_lists():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        values = rng.choice(np.linspace(0, 1, 11), size=int(rng.integers(1, 40))).tolist()
        got = ccdf(values)
        ordered = sorted(values)
        expected = []
        for t in sorted(set(ordered)):
            expected.append((t, sum(1 for v in ordered if v >= t) / len(ordered)))
        assert got == expected
        fractions = [f for _, f in got]
        assert fractions[0] == 1.0
        assert all(a >= b for a, b in zip(fractions, fractions[1:]))


# -- diffusion -------------------------------------------------------------


def test_bidirectional_sync_on_join():
    ds = DiffusionState(3)
    diffusion_on_join(ds, 0, [1])
    assert ds.cache(0) == ds.cache(1) == {0, 1}
    before = list(ds.caches)
    diffusion_on_join(ds, 0, [1])
    assert ds.caches == before


def test_static_group_of_five_holds_five_messages_each():
    n = 20
    ds = DiffusionState(n)
    members = [0]
    for joiner in (1, 2, 3, 4):
        diffusion_on_join(ds, joiner, members)
        members.append(joiner)
    for v in members:
        assert ds.cache(v) == set(members)
    assert ds.mean_fraction() == pytest.approx((5 * 5 + 15 * 1) / (n * n))


def test_diffusion_samples():
    ds = sample_diffusion(DiffusionState(4), 0.0)
    assert ds.samples == [(0.0, 0.25)]
    for j in (1, 2, 3):
        diffusion_on_join(ds, j, [0, *range(1, j)])
    sample_diffusion(ds, 1800.0)
    assert ds.samples[-1] == (1800.0, 1.0)


@given(st.lists(st.tuples(st.integers(0, 9), st.sets(st.integers(0, 9), max_size=4)), max_size=30))
def test_caches_grow_monotonically(joins):
    ds = DiffusionState(10)
    prev = ds.mean_fraction()
    for joiner, members in joins:
        snapshot = list(ds.caches)
        diffusion_on_join(ds, joiner, sorted(members - {joiner}))
        for v in range(10):
            assert ds.caches[v] & snapshot[v] == snapshot[v]
            assert ds.caches[v] >> v & 1
        now = ds.mean_fraction()
        assert now >= prev
        prev = now


# -- battery statistics ----------------------------------------------------


def test_battery_stats_examples():
    assert battery_stats([0.5, 0.5, 0.5]) == BatteryStats(0.5, 0.5, 0.0)
    s = battery_stats([0.6, 0.8])
    assert s.mean == pytest.approx(0.7) and s.median == pytest.approx(0.7)
    assert s.variance == pytest.approx(0.01)
    with pytest.raises(ValueError):
        battery_stats([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_battery_stats_match_statistics_module(values):
    s = battery_stats(values)
    assert s.mean == pytest.approx(statistics.fmean(values))
    assert s.median == statistics.median(values)
    assert s.variance == pytest.approx(statistics.pvariance(values), abs=1e-15)
