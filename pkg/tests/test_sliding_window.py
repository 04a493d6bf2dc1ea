import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import mk
from oracles import optimal_cost
from slidealign.alignment import MoveKind, astar_optimal_alignment
from slidealign.bench import random_workflow_net, simulate_trace
from slidealign.event_log import Trace
from slidealign.petri_net import loop_fixture
from slidealign.sliding_window import (
    WindowConfig,
    compare_with_oracle,
    marginal_cost_lower_bound,
    prepare_model,
    window_conformance,
)

MODELS = [prepare_model(random_workflow_net(s, max_places=8, require_loop=False)) for s in range(20)]
MODELS.append(prepare_model(loop_fixture()))


def run(model, trace, L, N, **kw):
    return window_conformance(model.net, model.reach, trace, WindowConfig(L, N, **kw), model.alive)


@pytest.mark.parametrize(
    "reachable, remaining, expected",
    [
        (set(), {"C": 2, "E": 1}, 3),
        (set("ABCDE"), {"C": 2, "E": 1}, 0),
        ({"E"}, {"C": 2, "E": 1}, 2),
        ({"A"}, {}, 0),
    ],
)
def test_marginal_bound(reachable, remaining, expected):
    assert marginal_cost_lower_bound(reachable, remaining) == expected


def test_walkthrough(loop_model, walk_trace):
    res = run(loop_model, walk_trace, 3, 2)
    assert res.cost == 2
    assert res.windows == 3
    first, second, last = res.steps
    assert [(e.model_marking, e.accumulated_cost) for e in first.beam] == [(mk("p0"), 1), (mk("p2"), 1)]
    cands = {c.marking: (c.accumulated_cost, c.penalty) for c in second.candidates}
    assert cands[mk("p2")] == (2, 0) and cands[mk("p3")] == (2, 0)
    assert cands[mk("p4")][1] == 3
    assert sorted((e.model_marking, e.accumulated_cost) for e in second.beam) == [(mk("p2"), 2), (mk("p3"), 2)]
    # [p3] reaches [p2] through tau, so it goes first among the exact tie
    assert [c.shadowed for c in second.candidates[:2]] == [False, True]
    aln = res.alignment
    aln.check(loop_model.net, walk_trace)
    assert aln.final_model_marking == mk("p4")
    assert sum(m.kind != MoveKind.SYNC and m.label is not None for m in aln.moves) == 2
    assert res.explored_nodes == sum(s.explored for s in res.steps)
    assert not res.truncated


def test_empty_trace(loop_model):
    res = run(loop_model, Trace("e", ""), 3, 2)
    assert res.cost == 4 and res.windows == 0


def test_bad_config():
    with pytest.raises(ValueError):
        WindowConfig(0, 1)
    with pytest.raises(ValueError):
        WindowConfig(3, 0)


def test_window_longer_than_trace(loop_model, walk_trace):
    res = run(loop_model, walk_trace, 50, 1)
    assert res.windows == 1 and res.cost == 2


def test_compare_with_oracle(loop_net, walk_trace):
    cmp = compare_with_oracle(loop_net, walk_trace, WindowConfig(3, 2))
    assert (cmp.window_cost, cmp.optimal_cost, cmp.delta, cmp.optimal) == (2, 2, 0.0, True)
    skipped = compare_with_oracle(loop_net, walk_trace, WindowConfig(3, 2), oracle_budget=2)
    assert skipped.skipped and skipped.optimal is None and skipped.window_cost == 2


def test_tiny_budget_still_completes(loop_model, walk_trace):
    res = run(loop_model, walk_trace, 3, 2, per_window_budget=2)
    res.alignment.check(loop_model.net, walk_trace)
    assert res.truncated
    assert res.cost >= 2


def traces_for(max_len=14):
    @st.composite
    def build(draw):
        model = draw(st.sampled_from(MODELS))
        alphabet = sorted(model.net.labels) + ["Z"]
        acts = draw(st.lists(st.sampled_from(alphabet), max_size=max_len))
        return model, Trace("h", acts)

    return build()


@settings(max_examples=300, deadline=None)
@given(traces_for(), st.integers(1, 6), st.integers(1, 4))
def test_sandwich(case, L, N):
    model, trace = case
    res = run(model, trace, L, N)
    opt = optimal_cost(model.net, trace.activities)
    res.alignment.check(model.net, trace)
    assert res.alignment.final_model_marking == model.net.final_marking
    assert opt <= res.cost
    assert res.windows == math.ceil(len(trace) / L)
    assert res.explored_nodes == sum(s.explored for s in res.steps)


@settings(max_examples=200, deadline=None)
@given(traces_for(), st.integers(1, 6), st.integers(1, 4))
def test_beam_invariants(case, L, N):
    model, trace = case
    res = run(model, trace, L, N)
    for step in res.steps[:-1]:
        assert 1 <= len(step.beam) <= N
        marks = [e.model_marking for e in step.beam]
        assert len(set(marks)) == len(marks)
        totals = [c.total for c in step.candidates]
        assert totals == sorted(totals)
        # the beam is the head of the ranked candidate list
        assert marks == [c.marking for c in step.candidates[: len(marks)]]
        for e in step.beam:
            e.prefix.check(model.net, trace)
            assert e.prefix.trace_progress == min((step.index + 1) * L, len(trace))
            assert e.accumulated_cost == e.prefix.cost


@settings(max_examples=200, deadline=None)
@given(traces_for(), st.integers(1, 3))
def test_single_window_is_exact(case, N):
    model, trace = case
    L = max(len(trace), 1)
    res = run(model, trace, L, N)
    assert res.cost == astar_optimal_alignment(model.net, trace).alignment.cost


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(MODELS), st.integers(0, 10_000), st.integers(1, 8), st.integers(1, 3))
def test_fitting_traces_cost_zero(model, seed, L, N):
    trace = simulate_trace(model.net, 30, seed)
    assert run(model, trace, L, N).cost == 0


@settings(max_examples=100, deadline=None)
@given(traces_for(), st.integers(1, 5), st.integers(1, 3))
def test_deterministic(case, L, N):
    model, trace = case
    a, b = run(model, trace, L, N), run(model, trace, L, N)
    assert a.alignment == b.alignment and a.explored_nodes == b.explored_nodes
