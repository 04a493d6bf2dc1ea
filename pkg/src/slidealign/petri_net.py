"""Labeled Petri nets, firing semantics and reachability analysis."""
from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

SILENT = None
DEFAULT_STATE_CAP = 100_000


class NetError(ValueError):
    """Structurally invalid net."""


class NotEnabled(ValueError):
    pass


class StateCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Marking:
    """Multiset of places, stored as a sorted tuple of ``(place, count)``."""

    tokens: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, places: Iterable[str] | Mapping[str, int] = ()) -> "Marking":
        counts = Counter(places) if not isinstance(places, Mapping) else Counter(dict(places))
        return cls(tuple(sorted((p, c) for p, c in counts.items() if c > 0)))

    def as_counter(self) -> Counter:
        return Counter(dict(self.tokens))

    def places(self) -> set[str]:
        return {p for p, _ in self.tokens}

    def size(self) -> int:
        return sum(c for _, c in self.tokens)

    def __str__(self) -> str:
        parts = [p if c == 1 else f"{p}^{c}" for p, c in self.tokens]
        return "[" + ",".join(parts) + "]"


@dataclass(frozen=True)
class Transition:
    id: str
    label: Optional[str] = SILENT

    @property
    def silent(self) -> bool:
        return self.label is SILENT


@dataclass(eq=False)
class ProcessNet:
    """A labeled Petri net with initial and final markings.

    Arcs have multiplicity one.  Instances are treated as immutable once
    built; enabled/fire results are memoized per marking.
    """

    places: frozenset[str]
    transitions: tuple[Transition, ...]
    arcs: frozenset[tuple[str, str]]
    initial_marking: Marking
    final_marking: Marking
    name: str = "net"
    _preset: dict = field(default_factory=dict, repr=False)
    _postset: dict = field(default_factory=dict, repr=False)
    _by_id: dict = field(default_factory=dict, repr=False)
    _moves: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.places = frozenset(self.places)
        self.transitions = tuple(sorted(self.transitions, key=lambda t: t.id))
        self.arcs = frozenset(self.arcs)
        ids = [t.id for t in self.transitions]
        if len(set(ids)) != len(ids):
            raise NetError("duplicate transition identifiers")
        clash = set(ids) & self.places
        if clash:
            raise NetError(f"identifiers used for both place and transition: {sorted(clash)}")
        self._by_id = {t.id: t for t in self.transitions}
        pre = {t: [] for t in ids}
        post = {t: [] for t in ids}
        for src, dst in self.arcs:
            if src in self.places and dst in self._by_id:
                pre[dst].append(src)
            elif src in self._by_id and dst in self.places:
                post[src].append(dst)
            else:
                raise NetError(f"arc ({src!r}, {dst!r}) does not connect a place and a transition")
        self._preset = {t: tuple(sorted(ps)) for t, ps in pre.items()}
        self._postset = {t: tuple(sorted(ps)) for t, ps in post.items()}
        for which, m in (("initial", self.initial_marking), ("final", self.final_marking)):
            unknown = m.places() - self.places
            if unknown:
                raise NetError(f"{which} marking references unknown places {sorted(unknown)}")

    @classmethod
    def build(cls, places, transitions, arcs, initial, final, name="net") -> "ProcessNet":
        """Convenience constructor.

        ``transitions`` maps id -> label (``None`` for silent); markings may be
        any iterable of places or a ``{place: count}`` mapping.
        """
        if isinstance(transitions, Mapping):
            transitions = [Transition(tid, lab) for tid, lab in transitions.items()]
        return cls(
            places=frozenset(places),
            transitions=tuple(transitions),
            arcs=frozenset(arcs),
            initial_marking=initial if isinstance(initial, Marking) else Marking.of(initial),
            final_marking=final if isinstance(final, Marking) else Marking.of(final),
            name=name,
        )

    def transition(self, tid: str) -> Transition:
        return self._by_id[tid]

    def preset(self, tid: str) -> tuple[str, ...]:
        return self._preset[tid]

    def postset(self, tid: str) -> tuple[str, ...]:
        return self._postset[tid]

    @property
    def labels(self) -> set[str]:
        return {t.label for t in self.transitions if not t.silent}

    def moves_from(self, m: Marking) -> tuple[tuple[Transition, Marking], ...]:
        """Enabled transitions at ``m`` with their successor markings, ordered by id."""
        cached = self._moves.get(m)
        if cached is None:
            counts = dict(m.tokens)
            out = []
            for t in self.transitions:
                pre = self._preset[t.id]
                if all(counts.get(p, 0) >= 1 for p in pre):
                    out.append((t, _fire_unchecked(counts, pre, self._postset[t.id])))
            cached = self._moves[m] = tuple(out)
        return cached

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_moves"] = {}
        return state


def _fire_unchecked(counts: dict, pre, post) -> Marking:
    new = dict(counts)
    for p in pre:
        new[p] -= 1
    for p in post:
        new[p] = new.get(p, 0) + 1
    return Marking(tuple(sorted((p, c) for p, c in new.items() if c > 0)))


def enabled_transitions(net: ProcessNet, m: Marking) -> set[str]:
    return {t.id for t, _ in net.moves_from(m)}


def fire(net: ProcessNet, m: Marking, tid: str) -> Marking:
    for t, nxt in net.moves_from(m):
        if t.id == tid:
            return nxt
    raise NotEnabled(f"transition {tid!r} is not enabled in {m}")


@dataclass(frozen=True)
class ReachabilityGraph:
    nodes: tuple[Marking, ...]
    edges: tuple[tuple[Marking, str, Marking], ...]
    root: Marking

    def successors(self) -> dict[Marking, list[tuple[str, Marking]]]:
        adj = {m: [] for m in self.nodes}
        for src, tid, dst in self.edges:
            adj[src].append((tid, dst))
        return adj


def build_reachability_graph(net: ProcessNet, state_cap: int = DEFAULT_STATE_CAP) -> ReachabilityGraph:
    """Breadth-first closure of the firing rule from the initial marking.

    Nodes are listed in discovery order; successors of a marking are explored
    in transition-id order, which makes the result deterministic.
    """
    if state_cap < 1:
        raise ValueError("state_cap must be >= 1")
    root = net.initial_marking
    seen = {root}
    nodes = [root]
    edges = []
    queue = deque([root])
    while queue:
        m = queue.popleft()
        for t, nxt in net.moves_from(m):
            edges.append((m, t.id, nxt))
            if nxt not in seen:
                if len(seen) >= state_cap:
                    raise StateCapExceeded(
                        f"more than {state_cap} reachable markings; net unbounded or too large"
                    )
                seen.add(nxt)
                nodes.append(nxt)
                queue.append(nxt)
    return ReachabilityGraph(tuple(nodes), tuple(edges), root)


@dataclass(frozen=True)
class LabelReachability:
    """For each reachable marking, the visible labels that can still fire in its future."""

    table: Mapping[Marking, frozenset[str]]

    def __getitem__(self, m: Marking) -> frozenset[str]:
        return self.table[m]


def strongly_connected_components(nodes, adj) -> list[list]:
    """Tarjan's algorithm (iterative).  Components come out in reverse topological order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    comps = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(adj[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(adj[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def reachable_label_sets(rg: ReachabilityGraph, net: ProcessNet) -> LabelReachability:
    adj = {m: [] for m in rg.nodes}
    local = {m: set() for m in rg.nodes}
    for src, tid, dst in rg.edges:
        adj[src].append(dst)
        label = net.transition(tid).label
        if label is not SILENT:
            local[src].add(label)

    comps = strongly_connected_components(rg.nodes, adj)
    comp_of = {}
    for i, comp in enumerate(comps):
        for m in comp:
            comp_of[m] = i
    # Tarjan emits sinks first, so every successor component is already final.
    comp_labels: list[frozenset[str]] = []
    for i, comp in enumerate(comps):
        labels = set()
        for m in comp:
            labels |= local[m]
            for nxt in adj[m]:
                j = comp_of[nxt]
                if j != i:
                    labels |= comp_labels[j]
        comp_labels.append(frozenset(labels))
    return LabelReachability({m: comp_labels[comp_of[m]] for m in rg.nodes})


def markings_reaching(rg: ReachabilityGraph, target: Marking) -> frozenset[Marking]:
    """Markings of ``rg`` from which ``target`` is reachable (backward BFS)."""
    if target not in set(rg.nodes):
        return frozenset()
    rev = {m: [] for m in rg.nodes}
    for src, _, dst in rg.edges:
        rev[dst].append(src)
    seen = {target}
    queue = deque([target])
    while queue:
        m = queue.popleft()
        for prev in rev[m]:
            if prev not in seen:
                seen.add(prev)
                queue.append(prev)
    return frozenset(seen)


def loop_fixture() -> ProcessNet:
    """The five-place loop model with a silent back-edge used throughout the tests and docs."""
    return ProcessNet.build(
        places=["p0", "p1", "p2", "p3", "p4"],
        transitions={"A": "A", "B": "B", "C": "C", "D": "D", "E": "E", "tau": SILENT},
        arcs=[
            ("p0", "A"), ("A", "p1"),
            ("p1", "B"), ("B", "p2"),
            ("p2", "C"), ("C", "p3"),
            ("p3", "D"), ("D", "p0"),
            ("p3", "tau"), ("tau", "p2"),
            ("p3", "E"), ("E", "p4"),
        ],
        initial=["p0"],
        final=["p4"],
        name="loop",
    )
