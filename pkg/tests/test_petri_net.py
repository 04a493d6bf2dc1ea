import pytest
from hypothesis import given, settings, strategies as st

from conftest import mk
from oracles import enumerate_markings
from slidealign.bench import random_workflow_net
from slidealign.petri_net import (
    Marking,
    NetError,
    NotEnabled,
    ProcessNet,
    StateCapExceeded,
    build_reachability_graph,
    enabled_transitions,
    fire,
    reachable_label_sets,
)

NETS = [random_workflow_net(s) for s in range(12)]


def test_marking_canonical():
    a = Marking.of(["p2", "p1", "p2"])
    b = Marking.of({"p1": 1, "p2": 2})
    assert a == b and hash(a) == hash(b)
    assert a.tokens == (("p1", 1), ("p2", 2))
    assert Marking.of({"p1": 0}) == Marking()


@pytest.mark.parametrize(
    "marking, expected",
    [(("p0",), {"A"}), (("p3",), {"D", "tau", "E"}), (("p4",), set())],
)
def test_enabled_transitions(loop_net, marking, expected):
    assert enabled_transitions(loop_net, mk(*marking)) == expected


def test_fire(loop_net):
    assert fire(loop_net, mk("p0"), "A") == mk("p1")
    assert fire(loop_net, mk("p3"), "E") == mk("p4")
    with pytest.raises(NotEnabled):
        fire(loop_net, mk("p0"), "C")


def test_reachability_graph_loop(loop_net):
    rg = build_reachability_graph(loop_net, 1000)
    # exhaustive enumeration with the bare firing rule
    assert set(rg.nodes) == enumerate_markings(loop_net) == {mk(f"p{i}") for i in range(5)}
    assert len(rg.edges) == 6
    assert rg.root == mk("p0")
    for src, tid, dst in rg.edges:
        assert fire(loop_net, src, tid) == dst


def test_state_cap(loop_net):
    with pytest.raises(StateCapExceeded):
        build_reachability_graph(loop_net, 3)


def test_unbounded_net_hits_cap():
    net = ProcessNet.build(["p", "q"], {"gen": "a"}, [("p", "gen"), ("gen", "p"), ("gen", "q")], ["p"], ["p"])
    with pytest.raises(StateCapExceeded):
        build_reachability_graph(net, 50)


def test_single_place_net():
    net = ProcessNet.build(["p"], {}, [], ["p"], ["p"])
    rg = build_reachability_graph(net, 10)
    assert rg.nodes == (mk("p"),) and rg.edges == ()


def test_net_validation():
    with pytest.raises(NetError):
        ProcessNet.build(["p"], {"t": "a"}, [("p", "x")], ["p"], ["p"])
    with pytest.raises(NetError):
        ProcessNet.build(["p"], {"t": "a"}, [], ["p"], ["nowhere"])


def _dfs_labels(net, rg, start):
    adj = rg.successors()
    seen, stack, labels = {start}, [start], set()
    while stack:
        m = stack.pop()
        for tid, n in adj[m]:
            lab = net.transition(tid).label
            if lab is not None:
                labels.add(lab)
            if n not in seen:
                seen.add(n)
                stack.append(n)
    return labels


def test_reachable_labels_loop(loop_net):
    rg = build_reachability_graph(loop_net)
    reach = reachable_label_sets(rg, loop_net)
    assert reach[mk("p0")] == set("ABCDE")
    assert reach[mk("p4")] == set()
    assert reach[mk("p2")] == set("ABCDE") == _dfs_labels(loop_net, rg, mk("p2"))


@pytest.mark.parametrize("net", NETS, ids=lambda n: n.name)
def test_reachable_labels_match_dfs(net):
    rg = build_reachability_graph(net)
    reach = reachable_label_sets(rg, net)
    assert set(reach.table) == set(rg.nodes)
    for m in rg.nodes:
        assert reach[m] == _dfs_labels(net, rg, m)
        assert reach[m] <= net.labels
    for src, tid, dst in rg.edges:
        lab = net.transition(tid).label
        assert reach[src] >= reach[dst] | ({lab} if lab else set())


@pytest.mark.parametrize("net", NETS, ids=lambda n: n.name)
def test_reachability_deterministic(net):
    a = build_reachability_graph(net)
    b = build_reachability_graph(ProcessNet.build(net.places, net.transitions, net.arcs,
                                                  net.initial_marking, net.final_marking))
    assert a.nodes == b.nodes and a.edges == b.edges


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(NETS), st.data())
def test_fire_conserves_tokens(net, data):
    rg = build_reachability_graph(net)
    m = data.draw(st.sampled_from(rg.nodes))
    for tid in enabled_transitions(net, m):
        n = fire(net, m, tid)
        assert n.size() == m.size() - len(net.preset(tid)) + len(net.postset(tid))
