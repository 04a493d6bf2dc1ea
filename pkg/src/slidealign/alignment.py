"""Synchronous-product search: exact alignments and per-window goal sets.

The product of the process net and the (sub)trace is never built as a net.
A search state is a pair ``(model marking, trace position)`` and successor
moves are generated on demand from the net's firing rule.
"""
from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import count
from typing import Callable, Iterator, Optional

from .errors import BudgetExceeded, NoGoalFound, Unreachable
from .event_log import SubtraceView, Trace, full_view, suffix_frequencies
from .petri_net import SILENT, LabelReachability, Marking, ProcessNet, fire

DEFAULT_WINDOW_BUDGET = 50_000
DEFAULT_ORACLE_BUDGET = 5_000_000


class MoveKind(IntEnum):
    SYNC = 0
    MODEL = 1
    LOG = 2


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    label: Optional[str]
    transition: Optional[str] = None
    trace_index: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.name.lower(),
            "label": self.label,
            "transition": self.transition,
            "trace_index": self.trace_index,
        }

    def __str__(self) -> str:
        log = self.label if self.kind != MoveKind.MODEL else ">>"
        model = ">>" if self.kind == MoveKind.LOG else (self.label if self.label is not SILENT else "tau")
        return f"({log},{model})"


@dataclass(frozen=True)
class CostProfile:
    """Per-kind move costs.  The default is the standard unit cost function."""

    sync: int = 0
    log: int = 1
    model: int = 1
    silent: int = 0

    def __post_init__(self):
        if min(self.sync, self.log, self.model, self.silent) < 0:
            raise ValueError("move costs must be nonnegative")


UNIT_COSTS = CostProfile()


def move_cost(move: Move, profile: CostProfile = UNIT_COSTS) -> int:
    if move.kind == MoveKind.SYNC:
        return profile.sync
    if move.kind == MoveKind.LOG:
        return profile.log
    return profile.silent if move.label is SILENT else profile.model


@dataclass(frozen=True)
class Alignment:
    """Moves replaying ``trace[trace_start:trace_progress]`` from ``start_marking``."""

    moves: tuple[Move, ...]
    cost: int
    start_marking: Marking
    final_model_marking: Marking
    trace_start: int = 0
    trace_progress: int = 0

    @classmethod
    def empty(cls, marking: Marking, position: int = 0) -> "Alignment":
        return cls((), 0, marking, marking, position, position)

    def log_projection(self) -> list[str]:
        return [m.label for m in self.moves if m.kind != MoveKind.MODEL]

    def model_projection(self) -> list[str]:
        return [m.transition for m in self.moves if m.kind != MoveKind.LOG]

    def then(self, other: "Alignment") -> "Alignment":
        if other.start_marking != self.final_model_marking or other.trace_start != self.trace_progress:
            raise ValueError("alignments do not chain")
        return Alignment(
            self.moves + other.moves,
            self.cost + other.cost,
            self.start_marking,
            other.final_model_marking,
            self.trace_start,
            other.trace_progress,
        )

    def check(self, net: ProcessNet, trace: Trace, profile: CostProfile = UNIT_COSTS) -> None:
        """Raise ``AssertionError`` unless the projection invariants hold."""
        assert self.cost == sum(move_cost(m, profile) for m in self.moves), "cost mismatch"
        expected = list(trace.activities[self.trace_start:self.trace_progress])
        assert self.log_projection() == expected, "log projection differs from trace segment"
        pos = self.trace_start
        m = self.start_marking
        for mv in self.moves:
            if mv.kind != MoveKind.LOG:
                assert net.transition(mv.transition).label == mv.label
                m = fire(net, m, mv.transition)
            if mv.kind != MoveKind.MODEL:
                assert mv.trace_index == pos and trace.activities[pos] == mv.label
                pos += 1
        assert m == self.final_model_marking, "model projection does not reach final marking"

    def pretty(self) -> str:
        log = ["≫" if m.kind == MoveKind.MODEL else m.label for m in self.moves]
        model = ["≫" if m.kind == MoveKind.LOG else (m.label or "τ") for m in self.moves]
        width = [max(len(a), len(b)) for a, b in zip(log, model)]
        row = lambda xs: " | ".join(x.ljust(w) for x, w in zip(xs, width))
        return f"log   | {row(log)}\nmodel | {row(model)}"


@dataclass(frozen=True)
class SyncState:
    model_marking: Marking
    trace_position: int
    g: int = field(default=0, compare=False)


def successors(
    net: ProcessNet, s: SyncState, window: SubtraceView, profile: CostProfile = UNIT_COSTS
) -> list[tuple[Move, SyncState]]:
    """Product moves out of ``s``: synchronous, then model (by transition id), then log."""
    return [
        (_make_move(kind, t, pos, window.parent.activities), SyncState(nxt, npos, s.g + c))
        for kind, t, nxt, npos, c, pos in _expand(
            net, s.model_marking, s.trace_position, window.end, window.parent.activities, profile
        )
    ]


def _expand(net, m, pos, end, acts, profile):
    moves = net.moves_from(m)
    out = []
    if pos < end:
        a = acts[pos]
        for t, nxt in moves:
            if t.label == a:
                out.append((MoveKind.SYNC, t, nxt, pos + 1, profile.sync, pos))
    for t, nxt in moves:
        out.append((MoveKind.MODEL, t, nxt, pos, profile.silent if t.label is SILENT else profile.model, None))
    if pos < end:
        out.append((MoveKind.LOG, None, m, pos + 1, profile.log, pos))
    return out


def _make_move(kind, t, pos, acts) -> Move:
    if kind == MoveKind.LOG:
        return Move(kind, acts[pos], None, pos)
    return Move(kind, t.label, t.id, pos)


class _Search:
    """Best-first search over ``(marking, position)`` states of one trace segment.

    ``settle()`` yields ``(g, marking, position)`` in nondecreasing order of
    ``g + h``; successors of a yielded state are generated only when the
    consumer resumes the generator, so breaking out never expands the state.
    Ties are broken by deeper trace position, then canonical marking, then
    generation order.
    """

    def __init__(self, net, start, window: SubtraceView, profile, h=None):
        self.net = net
        self.window = window
        self.profile = profile
        self.h = h
        self.start = (start, window.start)
        self.best = {self.start: 0}
        self.parent = {}

    def settle(self) -> Iterator[tuple[int, Marking, int]]:
        net, profile, h = self.net, self.profile, self.h
        acts, end = self.window.parent.activities, self.window.end
        best, parent = self.best, self.parent
        tie = count()
        m0, p0 = self.start
        f0 = h(m0, p0) if h else 0
        if f0 == math.inf:
            return
        heap = [(f0, -p0, m0, next(tie), 0)]
        closed = set()
        while heap:
            _, negpos, m, _, g = heapq.heappop(heap)
            key = (m, -negpos)
            if key in closed:
                continue
            closed.add(key)
            yield g, m, -negpos
            for kind, t, nxt, npos, c, tpos in _expand(net, m, -negpos, end, acts, profile):
                ng = g + c
                nkey = (nxt, npos)
                old = best.get(nkey)
                if nkey in closed or (old is not None and old <= ng):
                    continue
                hv = h(nxt, npos) if h else 0
                if hv == math.inf:
                    continue
                best[nkey] = ng
                parent[nkey] = (key, kind, t, tpos)
                heapq.heappush(heap, (ng + hv, -npos, nxt, next(tie), ng))

    def alignment_to(self, m: Marking, pos: int) -> Alignment:
        acts = self.window.parent.activities
        moves = []
        key = (m, pos)
        while key != self.start:
            prev, kind, t, tpos = self.parent[key]
            moves.append(_make_move(kind, t, tpos, acts))
            key = prev
        moves.reverse()
        return Alignment(tuple(moves), self.best[(m, pos)], self.start[0], m, self.window.start, pos)


@dataclass(frozen=True)
class SearchResult:
    alignment: Alignment
    explored: int


def remaining_heuristic(
    reach: LabelReachability, window: SubtraceView, profile: CostProfile = UNIT_COSTS, alive=None
) -> Callable[[Marking, int], float]:
    """Admissible estimate: every remaining event whose label can no longer fire is a log move.

    Markings outside ``alive`` (when given) cannot reach the target and get
    an infinite estimate.
    """
    freq = suffix_frequencies(window.parent)
    end_counts = freq.at(window.end)
    cache = {}

    def h(m: Marking, pos: int) -> float:
        key = (m, pos)
        v = cache.get(key)
        if v is None:
            if alive is not None and m not in alive:
                v = math.inf
            else:
                labels = reach.table.get(m)
                here = freq.at(pos)
                v = 0
                for a, n in here.items():
                    if labels is None or a not in labels:
                        v += n - end_counts.get(a, 0)
                v *= profile.log
            cache[key] = v
        return v

    return h


def align_to_marking(
    net: ProcessNet,
    start: Marking,
    window: SubtraceView,
    target: Marking,
    budget: int = DEFAULT_ORACLE_BUDGET,
    profile: CostProfile = UNIT_COSTS,
    heuristic: Optional[Callable[[Marking, int], float]] = None,
) -> SearchResult:
    """Cheapest alignment of ``window`` from ``start`` that ends exactly in ``target``."""
    search = _Search(net, start, window, profile, heuristic)
    explored = 0
    for g, m, pos in search.settle():
        if pos == window.end and m == target:
            return SearchResult(search.alignment_to(m, pos), explored + 1)
        explored += 1
        if explored >= budget:
            raise BudgetExceeded(f"search exceeded {budget} expansions")
    raise Unreachable(f"final marking {target} unreachable from {start}")


def astar_optimal_alignment(
    net: ProcessNet,
    trace: Trace,
    budget: int = DEFAULT_ORACLE_BUDGET,
    heuristic: str = "zero",
    profile: CostProfile = UNIT_COSTS,
    reach: Optional[LabelReachability] = None,
) -> SearchResult:
    """Optimal alignment of the whole trace from the initial to the final marking.

    ``heuristic="zero"`` is plain Dijkstra.  ``"remaining"`` counts remaining
    events whose label is unreachable from the current marking; it needs the
    label reachability table (computed here if not given).
    """
    view = full_view(trace)
    h = None
    if heuristic == "remaining":
        if reach is None:
            from .petri_net import build_reachability_graph, reachable_label_sets

            reach = reachable_label_sets(build_reachability_graph(net), net)
        h = remaining_heuristic(reach, view, profile)
    elif heuristic != "zero":
        raise ValueError(f"unknown heuristic {heuristic!r}")
    return align_to_marking(net, net.initial_marking, view, net.final_marking, budget, profile, h)


@dataclass
class GoalSet:
    """Result of a window search: ``(alignment, cost + penalty)`` pairs, best first."""

    goals: list[tuple[Alignment, float]]
    explored: int
    truncated: bool = False


def partial_alignments(
    net: ProcessNet,
    start: Marking,
    window: SubtraceView,
    n_goals: int,
    penalty: Optional[Callable[[Marking], float]] = None,
    budget: int = DEFAULT_WINDOW_BUDGET,
    profile: CostProfile = UNIT_COSTS,
) -> GoalSet:
    """Cheapest window alignments ending at up to ``n_goals`` distinct model markings.

    A goal is any state at the window's end position, whatever the model
    marking.  Each marking is recorded once, on first settlement, so with its
    cheapest cost.  The search stops once ``n_goals`` goals are known and every
    unsettled state costs more than the ``n_goals``-th best ``cost + penalty``
    (penalties are nonnegative), so goals tied with that cutoff are all
    returned and more than ``n_goals`` may come back.  Goals with infinite
    penalty are dropped.
    """
    if n_goals < 1:
        raise ValueError("n_goals must be >= 1")
    search = _Search(net, start, window, profile)
    goals = []
    totals: list[float] = []
    explored = 0
    truncated = False
    for g, m, pos in search.settle():
        if len(totals) >= n_goals and g > totals[n_goals - 1]:
            break
        if explored >= budget:
            truncated = True
            break
        explored += 1
        if pos == window.end:
            pen = penalty(m) if penalty else 0
            if pen != math.inf:
                goals.append((g + pen, g, m))
                bisect.insort(totals, g + pen)
    if not goals:
        if truncated:
            raise BudgetExceeded(f"no window goal found within {budget} expansions")
        raise NoGoalFound(f"no admissible goal marking for window {window.window_index} from {start}")
    goals.sort()
    return GoalSet(
        [(search.alignment_to(m, window.end), total) for total, _, m in goals],
        explored,
        truncated,
    )
