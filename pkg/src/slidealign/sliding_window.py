"""Window-by-window alignment of long traces with a top-N beam of prefixes.

Each window is aligned from every marking in the beam.  Candidates are
ranked by their accumulated cost plus a lower bound on the cost still
forced by the rest of the trace: remaining events whose labels can no
longer fire from the candidate's marking must all become log moves.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .alignment import (
    DEFAULT_ORACLE_BUDGET,
    DEFAULT_WINDOW_BUDGET,
    UNIT_COSTS,
    Alignment,
    CostProfile,
    Move,
    MoveKind,
    align_to_marking,
    astar_optimal_alignment,
    partial_alignments,
)
from .errors import BudgetExceeded, NoGoalFound, Unreachable
from .event_log import SubtraceView, Trace, split_trace, suffix_frequencies
from .petri_net import (
    DEFAULT_STATE_CAP,
    LabelReachability,
    Marking,
    ProcessNet,
    ReachabilityGraph,
    build_reachability_graph,
    markings_reaching,
    reachable_label_sets,
)


@dataclass(frozen=True)
class WindowConfig:
    window_length: int = 10
    beam_width: int = 3
    per_window_budget: int = DEFAULT_WINDOW_BUDGET
    goal_overcollect: int = 2
    final_retry_factor: int = 10
    profile: CostProfile = UNIT_COSTS

    def __post_init__(self):
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.goal_overcollect < 1:
            raise ValueError("goal_overcollect must be >= 1")
        if self.per_window_budget < 1:
            raise ValueError("per_window_budget must be >= 1")


@dataclass(frozen=True)
class PreparedModel:
    """A net together with everything precomputed once per model."""

    net: ProcessNet
    rg: ReachabilityGraph
    reach: LabelReachability
    alive: frozenset[Marking]


def prepare_model(net: ProcessNet, state_cap: int = DEFAULT_STATE_CAP) -> PreparedModel:
    rg = build_reachability_graph(net, state_cap)
    return PreparedModel(net, rg, reachable_label_sets(rg, net), markings_reaching(rg, net.final_marking))


@dataclass(frozen=True)
class BeamEntry:
    """A prefix alignment, stored as a chain of per-window segments."""

    model_marking: Marking
    accumulated_cost: int
    segment: Alignment
    parent: Optional["BeamEntry"] = None

    @classmethod
    def root(cls, marking: Marking) -> "BeamEntry":
        return cls(marking, 0, Alignment.empty(marking))

    def extend(self, seg: Alignment) -> "BeamEntry":
        return BeamEntry(seg.final_model_marking, self.accumulated_cost + seg.cost, seg, self)

    @property
    def prefix(self) -> Alignment:
        chain = []
        node = self
        while node is not None:
            chain.append(node.segment)
            node = node.parent
        moves = []
        for seg in reversed(chain):
            moves.extend(seg.moves)
        first = chain[-1]
        return Alignment(
            tuple(moves), self.accumulated_cost, first.start_marking,
            self.model_marking, first.trace_start, self.segment.trace_progress,
        )


@dataclass(frozen=True)
class Candidate:
    marking: Marking
    accumulated_cost: int
    penalty: float
    shadowed: bool = False

    @property
    def total(self) -> float:
        return self.accumulated_cost + self.penalty


@dataclass
class WindowStep:
    index: int
    explored: int
    candidates: list[Candidate]
    beam: list[BeamEntry]
    truncated: bool = False


@dataclass
class ConformanceResult:
    alignment: Alignment
    cost: int
    explored_nodes: int
    windows: int
    truncated: bool
    wall_time: float
    steps: list[WindowStep] = field(default_factory=list, repr=False)


def marginal_cost_lower_bound(labels_reachable, remaining: Mapping[str, int]) -> int:
    """Number of remaining events whose label is not in ``labels_reachable``."""
    return sum(n for a, n in remaining.items() if a not in labels_reachable)


def _silent_closure(net: ProcessNet, m: Marking, cache: dict) -> frozenset[Marking]:
    got = cache.get(m)
    if got is None:
        seen, stack = {m}, [m]
        while stack:
            for t, n in net.moves_from(stack.pop()):
                if t.silent and n not in seen:
                    seen.add(n)
                    stack.append(n)
        got = cache[m] = frozenset(seen)
    return got


def _rank(net, best, closures):
    """Order merged extensions by (total, accumulated, shadowed, marking).

    A candidate is shadowed when another candidate with no higher accumulated
    cost reaches it through silent transitions alone; that one can follow the
    same continuation for free, so among exact ties it should go first.
    """
    keys = [kv[0] for kv in best.values()]
    ranked = []
    for key, ext in best.values():
        total, acc, m = key
        shadowed = any(
            om != m and oacc <= acc and m in _silent_closure(net, om, closures)
            for _, oacc, om in keys
        )
        ranked.append(((total, acc, shadowed, m), ext))
    ranked.sort(key=lambda kv: kv[0])
    return ranked


def _log_only(entry: BeamEntry, window: SubtraceView, profile: CostProfile) -> Alignment:
    acts = window.parent.activities
    moves = tuple(Move(MoveKind.LOG, acts[i], None, i) for i in range(window.start, window.end))
    m = entry.model_marking
    return Alignment(moves, profile.log * len(moves), m, m, window.start, window.end)


def window_conformance(
    net: ProcessNet,
    reach: LabelReachability,
    trace: Trace,
    cfg: WindowConfig = WindowConfig(),
    alive: Optional[frozenset[Marking]] = None,
) -> ConformanceResult:
    """Align ``trace`` window by window, keeping the ``beam_width`` best prefixes.

    ``alive`` optionally restricts beam markings to those that can still reach
    the final marking.
    """
    t0 = time.perf_counter()
    profile = cfg.profile
    windows = split_trace(trace, cfg.window_length)
    suffix = suffix_frequencies(trace)
    n_goals = cfg.beam_width * cfg.goal_overcollect
    beam = [BeamEntry.root(net.initial_marking)]
    explored = 0
    truncated = False
    steps: list[WindowStep] = []
    closures: dict[Marking, frozenset[Marking]] = {}

    for window in windows[:-1]:
        remaining = suffix.at(window.end)
        penalties: dict[Marking, float] = {}

        def penalty(m: Marking) -> float:
            v = penalties.get(m)
            if v is None:
                if alive is not None and m not in alive:
                    v = math.inf
                else:
                    v = profile.log * marginal_cost_lower_bound(reach.table.get(m, ()), remaining)
                penalties[m] = v
            return v

        best: dict[Marking, tuple[tuple, BeamEntry]] = {}
        step_explored = 0
        step_truncated = False
        for entry in beam:
            try:
                found = partial_alignments(
                    net, entry.model_marking, window, n_goals, penalty, cfg.per_window_budget, profile
                )
            except (BudgetExceeded, NoGoalFound):
                step_truncated = True
                step_explored += cfg.per_window_budget
                continue
            step_explored += found.explored
            step_truncated |= found.truncated
            for seg, _ in found.goals:
                ext = entry.extend(seg)
                m = ext.model_marking
                key = (ext.accumulated_cost + penalty(m), ext.accumulated_cost, m)
                if m not in best or key < best[m][0]:
                    best[m] = (key, ext)
        if not best:
            # every search failed: keep the cheapest entry alive by pure log moves
            entry = beam[0]
            ext = entry.extend(_log_only(entry, window, profile))
            best[ext.model_marking] = ((ext.accumulated_cost, ext.accumulated_cost, ext.model_marking), ext)
        ranked = _rank(net, best, closures)
        beam = [ext for _, ext in ranked[: cfg.beam_width]]
        explored += step_explored
        truncated |= step_truncated
        steps.append(WindowStep(
            window.window_index,
            step_explored,
            [Candidate(key[3], key[1], key[0] - key[1], key[2]) for key, _ in ranked],
            beam,
            step_truncated,
        ))

    last = windows[-1] if windows else SubtraceView(trace, 0, 0, 0)
    final, last_explored, last_truncated = _close(net, beam, last, cfg, alive)
    explored += last_explored
    truncated |= last_truncated
    steps.append(WindowStep(last.window_index, last_explored, [], [final], last_truncated))
    alignment = final.prefix
    return ConformanceResult(
        alignment, alignment.cost, explored, len(windows), truncated, time.perf_counter() - t0, steps
    )


def _close(net, beam, window, cfg, alive):
    """Extend each beam entry through the last window to the final marking; keep the cheapest."""
    h = None
    if alive is not None:
        h = lambda m, pos: 0 if m in alive else math.inf
    explored = 0
    truncated = False
    budget = cfg.per_window_budget
    for attempt in range(2):
        done = []
        for rank, entry in enumerate(beam):
            try:
                res = align_to_marking(
                    net, entry.model_marking, window, net.final_marking, budget, cfg.profile, h
                )
            except BudgetExceeded:
                explored += budget
                truncated = True
                continue
            except Unreachable:
                continue
            explored += res.explored
            ext = entry.extend(res.alignment)
            done.append(((ext.accumulated_cost, entry.model_marking, rank), ext))
        if done:
            return min(done, key=lambda kv: kv[0])[1], explored, truncated
        if not truncated:
            break
        budget *= cfg.final_retry_factor
    raise Unreachable("no beam entry reaches the final marking in the last window")


@dataclass
class Comparison:
    window_cost: Optional[int]
    optimal_cost: Optional[int]
    delta: Optional[float]
    explored_window: int
    explored_oracle: Optional[int]
    wall_window: float
    wall_oracle: Optional[float]
    skipped: bool = False

    @property
    def optimal(self) -> Optional[bool]:
        return None if self.skipped else self.window_cost == self.optimal_cost


def compare_with_oracle(
    net: ProcessNet,
    trace: Trace,
    cfg: WindowConfig = WindowConfig(),
    oracle_budget: int = DEFAULT_ORACLE_BUDGET,
    model: Optional[PreparedModel] = None,
) -> Comparison:
    """Run the window aligner and the exact aligner on one trace.

    ``delta`` is ``(window - optimal) / max(optimal, 1)``.  If the oracle runs
    out of budget the record is marked ``skipped``.
    """
    model = model or prepare_model(net)
    res = window_conformance(net, model.reach, trace, cfg, model.alive)
    t0 = time.perf_counter()
    try:
        opt = astar_optimal_alignment(net, trace, oracle_budget, "remaining", cfg.profile, model.reach)
    except BudgetExceeded:
        return Comparison(res.cost, None, None, res.explored_nodes, None, res.wall_time, None, True)
    wall = time.perf_counter() - t0
    ocost = opt.alignment.cost
    if res.cost < ocost:
        raise AssertionError(f"window cost {res.cost} below optimal cost {ocost}")
    return Comparison(
        res.cost, ocost, (res.cost - ocost) / max(ocost, 1),
        res.explored_nodes, opt.explored, res.wall_time, wall,
    )
