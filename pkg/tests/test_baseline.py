from scenes import Fixed, Scripted

from wfdgm.domain import Role
from wfdgm.invariants import check_trace
from wfdgm.kernel import SimConfig, Simulator


def sim(scene, n, duration, cap=(4, 15), trace=True):
    cfg = SimConfig(duration=duration, node_count=n, t_d=1, capacity_range=cap, trace=trace, check_invariants=True)
    s = Simulator(cfg, "baseline", scene)
    s.result = s.run()
    assert not s.result.violations
    assert not check_trace(s.result.trace, "baseline", 1)
    return s


def test_highest_ordinal_becomes_owner():
    s = sim(Fixed({10: (0, 0), 22: (30, 0), 7: (0, 30)}), 23, 3)
    assert s.nodes[22].role is Role.GROUP_OWNER
    assert s.nodes[22].group.members == {7, 10}
    assert s.nodes[7].current_go == 22 and s.nodes[10].current_go == 22


def test_full_owner_sends_node_to_next_highest():
    placed = {i: (float(i), 0.0) for i in range(6)}
    placed[22] = (0.0, 10.0)
    s = sim(Fixed(placed), 23, 4, cap=(4, 4))
    assert s.nodes[22].group.members == {0, 1, 2, 3}
    assert s.nodes[5].group.members == {4}
    rejects = [e for e in s.result.trace if e.kind == "reject"]
    assert {(e.node, e.data["target"]) for e in rejects} == {(4, 22), (5, 22)}
    assert all(e.data["reason"] == "capacity_full" for e in rejects)


def test_owner_walking_away_frees_its_clients():
    scene = Scripted({0: (0, 0), 1: (20, 0), 2: (10, 10)}, {2: (5.0, (5000.0, 5000.0))})
    s = sim(scene, 3, 10)
    losses = [e for e in s.result.trace if e.kind == "leave"]
    assert [(e.node, e.data["cause"], e.time) for e in losses] == [(0, "out_of_range", 5.0), (1, "out_of_range", 5.0)]
    # freed at 5 s, 0 re-elects 1 on the same tick
    assert s.nodes[0].current_go == 1
    assert s.nodes[2].role is Role.FREE and s.result.counters["link_losses"] == 2


def test_isolated_node_stays_free():
    s = sim(Fixed({0: (0, 0)}), 2, 20)
    decides = [e for e in s.result.trace if e.node == 0 and e.kind == "decide"]
    assert len(decides) == 20 and {e.data["state"] for e in decides} == {"free"}
    assert s.result.counters["joins"] == 0 and s.nodes[0].role is Role.FREE
