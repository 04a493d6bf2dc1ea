"""Synthetic corpora (random workflow nets, simulated traces, noise) and the accuracy/scaling harness."""
from __future__ import annotations

import configparser
import csv
import io
import random
import statistics
import string
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .alignment import DEFAULT_ORACLE_BUDGET, DEFAULT_WINDOW_BUDGET, astar_optimal_alignment
from .errors import BudgetExceeded, GenerationFailed
from .event_log import Trace
from .petri_net import SILENT, Marking, ProcessNet, strongly_connected_components, build_reachability_graph, loop_fixture
from .sliding_window import WindowConfig, prepare_model, window_conformance

# -- nets from block trees -----------------------------------------------------
#
# A tree is either an activity label (str), None for a silent step, or a tuple
# (op, child, child, ...) with op in {"seq", "xor", "and", "loop"}.  "loop"
# takes exactly two children: the body and the redo part.

Tree = Union[str, None, tuple]


class _NetBuilder:
    def __init__(self):
        self.places = ["source", "sink"]
        self.transitions = {}
        self.arcs = []

    def place(self) -> str:
        p = f"p{len(self.places) - 1}"
        self.places.append(p)
        return p

    def transition(self, label, pre, post) -> str:
        tid = f"t{len(self.transitions)}"
        self.transitions[tid] = label
        self.arcs += [(p, tid) for p in pre] + [(tid, p) for p in post]
        return tid

    def build(self, node: Tree, p_in: str, p_out: str) -> None:
        if node is None or isinstance(node, str):
            self.transition(node, [p_in], [p_out])
            return
        op, *kids = node
        if op == "seq":
            cur = p_in
            for i, kid in enumerate(kids):
                nxt = p_out if i == len(kids) - 1 else self.place()
                self.build(kid, cur, nxt)
                cur = nxt
        elif op == "xor":
            for kid in kids:
                self.build(kid, p_in, p_out)
        elif op == "loop":
            body, redo = kids
            mid = self.place()
            self.build(body, p_in, mid)
            self.build(redo, mid, p_in)
            self.transition(SILENT, [mid], [p_out])
        elif op == "and":
            starts = [self.place() for _ in kids]
            ends = [self.place() for _ in kids]
            self.transition(SILENT, [p_in], starts)
            for kid, a, b in zip(kids, starts, ends):
                self.build(kid, a, b)
            self.transition(SILENT, ends, [p_out])
        else:
            raise ValueError(f"unknown block operator {op!r}")


def net_from_tree(tree: Tree, name: str = "net") -> ProcessNet:
    """Translate a block tree into a safe workflow net (one source, one sink)."""
    b = _NetBuilder()
    if isinstance(tree, tuple) and tree[0] == "loop":
        # a loop returning to the source would make the initial marking re-enterable
        first = b.place()
        b.transition(SILENT, ["source"], [first])
        b.build(tree, first, "sink")
    else:
        b.build(tree, "source", "sink")
    return ProcessNet.build(b.places, b.transitions, b.arcs, ["source"], ["sink"], name=name)


def _random_tree(rng: random.Random, labels, depth: int, parallel: bool, dup_prob: float, top: bool = False) -> Tree:
    if depth <= 0 or (not top and rng.random() < 0.25):
        if labels["used"] and rng.random() < dup_prob:
            return rng.choice(labels["used"])
        lab = labels["pool"][len(labels["used"])]
        labels["used"].append(lab)
        return lab
    ops = ["seq", "seq", "xor", "loop"] + (["and"] if parallel else [])
    op = rng.choice(ops)
    if op == "loop":
        redo = None if rng.random() < 0.3 else _random_tree(rng, labels, depth - 2, parallel, dup_prob)
        return ("loop", _random_tree(rng, labels, depth - 1, parallel, dup_prob), redo)
    arity = rng.choice((2, 3, 4)) if op == "xor" else rng.choice((2, 2, 3))
    kids = [_random_tree(rng, labels, depth - 1, parallel, dup_prob) for _ in range(arity)]
    if op == "xor" and rng.random() < 0.15:
        kids.append(None)
    return (op, *kids)


def random_workflow_net(
    seed: int,
    min_places: int = 4,
    max_places: int = 10,
    parallel: bool = True,
    dup_prob: float = 0.0,
    require_loop: bool = True,
    max_tries: int = 10_000,
) -> ProcessNet:
    """Random block-structured (hence safe and sound) workflow net.

    Rejection-samples trees until the net has between ``min_places`` and
    ``max_places`` places and, if ``require_loop``, a cycle through a visible
    transition (so arbitrarily long fitting traces exist).
    """
    rng = random.Random(seed)
    pool = list(string.ascii_uppercase) + [f"{a}{b}" for a in string.ascii_uppercase for b in string.ascii_uppercase]
    for _ in range(max_tries):
        labels = {"pool": pool, "used": []}
        tree = _random_tree(rng, labels, rng.randint(3, 5), parallel, dup_prob, top=True)
        if not isinstance(tree, tuple):
            continue
        net = net_from_tree(tree, name=f"rand{seed}")
        if not min_places <= len(net.places) <= max_places:
            continue
        if require_loop and not walk_tables(net)[1]:
            continue
        return net
    raise GenerationFailed(f"no net with {min_places}-{max_places} places found for seed {seed}")


def loop_scaling_model() -> ProcessNet:
    """Loop-style model used for scaling runs: a repeated body with choice and concurrency."""
    return net_from_tree(("loop", ("seq", "A", ("xor", "B", "C"), ("and", "D", "E"), "F"), ("xor", "G", None)), "loopbody")


BUILTIN_NETS = {"fixture": loop_fixture, "loop": loop_scaling_model}


# -- traces ----------------------------------------------------------------------

def walk_tables(net: ProcessNet) -> tuple[dict[Marking, int], frozenset[Marking]]:
    """Fewest visible transitions from each marking to the final marking (0-1 BFS),
    and the markings from which a cycle through a visible transition is reachable."""
    rg = build_reachability_graph(net)
    rev = {m: [] for m in rg.nodes}
    adj = {m: [] for m in rg.nodes}
    for src, tid, dst in rg.edges:
        rev[dst].append((src, 0 if net.transition(tid).silent else 1))
        adj[src].append(dst)
    dist: dict[Marking, int] = {}
    target = net.final_marking
    if target in rev:
        dist[target] = 0
        dq = deque([target])
        while dq:
            m = dq.popleft()
            for prev, w in rev[m]:
                d = dist[m] + w
                if d < dist.get(prev, 1 << 60):
                    dist[prev] = d
                    (dq.appendleft if w == 0 else dq.append)(prev)
    comp_of = {}
    for i, comp in enumerate(strongly_connected_components(rg.nodes, adj)):
        for m in comp:
            comp_of[m] = i
    seeds = {
        src for src, tid, dst in rg.edges
        if not net.transition(tid).silent and comp_of[src] == comp_of[dst] and src in dist
    }
    extendable = set(seeds)
    dq = deque(seeds)
    while dq:
        m = dq.popleft()
        for prev, _ in rev[m]:
            if prev not in extendable:
                extendable.add(prev)
                dq.append(prev)
    return dist, frozenset(extendable)


def simulate_trace(
    net: ProcessNet,
    max_len: int,
    seed: int,
    min_len: int = 0,
    case_id: str = "sim",
    retries: int = 50,
    bias: float = 0.5,
    _tables=None,
) -> Trace:
    """Random firing sequence from the initial to the final marking, projected to its labels.

    Until ``min_len`` labels are produced the walk avoids entering the final
    marking; afterwards it moves along a shortest remaining path with
    probability ``bias``.  Moves that would make ``max_len`` unattainable are
    never taken.
    """
    dist, extendable = _tables if _tables is not None else walk_tables(net)
    m0, mf = net.initial_marking, net.final_marking
    if dist.get(m0, max_len + 1) > max_len:
        raise GenerationFailed(f"final marking not reachable within {max_len} events")
    rng = random.Random(seed)
    step_cap = 20 * max_len + 100
    for _ in range(retries):
        m, labels = m0, []
        for _ in range(step_cap):
            if m == mf and len(labels) >= min_len:
                return Trace(case_id, labels)
            options = []
            for t, nxt in net.moves_from(m):
                v = 0 if t.silent else 1
                if nxt in dist and len(labels) + v + dist[nxt] <= max_len:
                    options.append((t, nxt, v))
            if len(labels) < min_len:
                options = [o for o in options if o[1] in extendable] or options
            elif rng.random() < bias:
                options = [o for o in options if o[2] + dist[o[1]] == dist[m]] or options
            if not options:
                break
            t, m, v = rng.choice(options)
            if v:
                labels.append(t.label)
    raise GenerationFailed(f"no trace of length {min_len}-{max_len} reached the final marking")


@dataclass(frozen=True)
class NoiseProfile:
    p_insert: float = 0.0
    p_delete: float = 0.0
    p_swap: float = 0.0
    seed: int = 0
    pool: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("p_insert", "p_delete", "p_swap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @classmethod
    def uniform(cls, level: float, seed: int, pool: Sequence[str]) -> "NoiseProfile":
        """Split a total noise ``level`` evenly over insertion, deletion and swap."""
        return cls(level / 3, level / 3, level / 3, seed, tuple(pool))


def inject_noise(trace: Trace, profile: NoiseProfile) -> Trace:
    """One pass over the trace; at each position independently insert before, delete, or swap with the next."""
    rng = random.Random(profile.seed)
    acts = list(trace.activities)
    pool = sorted(set(profile.pool)) or sorted(set(acts))
    out = []
    i = 0
    while i < len(acts):
        u_ins, u_del, u_swap = rng.random(), rng.random(), rng.random()
        if u_ins < profile.p_insert and pool:
            out.append(rng.choice(pool))
        if u_del < profile.p_delete:
            i += 1
            continue
        if u_swap < profile.p_swap and i + 1 < len(acts):
            acts[i], acts[i + 1] = acts[i + 1], acts[i]
        out.append(acts[i])
        i += 1
    return Trace(trace.case_id, out)


# -- corpus and harness ----------------------------------------------------------

@dataclass
class CorpusSpec:
    nets: list[str] = field(default_factory=lambda: ["random:5"])
    net_seed: int = 1
    traces_per_net: int = 10
    min_length: int = 40
    max_length: int = 120
    noise: tuple[float, float] = (0.1, 0.3)
    foreign_labels: tuple[str, ...] = ()
    seed: int = 7


@dataclass
class Instance:
    instance_id: str
    net_name: str
    trace: Trace


def _load_nets(spec: CorpusSpec) -> dict[str, ProcessNet]:
    from .pnml import read_pnml

    nets = {}
    for item in spec.nets:
        if item.startswith("random:"):
            k = int(item.split(":", 1)[1])
            for i in range(k):
                net = random_workflow_net(spec.net_seed * 1000 + i)
                nets[net.name] = net
        elif item in BUILTIN_NETS:
            nets[item] = BUILTIN_NETS[item]()
        else:
            nets[Path(item).stem] = read_pnml(item)
    return nets


def generate_corpus(spec: CorpusSpec, nets: Optional[dict[str, ProcessNet]] = None) -> tuple[dict, list[Instance]]:
    nets = nets if nets is not None else _load_nets(spec)
    rng = random.Random(spec.seed)
    out = []
    for name in sorted(nets):
        net = nets[name]
        tables = walk_tables(net)
        pool = sorted(net.labels) + list(spec.foreign_labels)
        for j in range(spec.traces_per_net):
            target = rng.randint(spec.min_length, spec.max_length)
            level = rng.uniform(*spec.noise)
            s1, s2 = rng.randrange(1 << 31), rng.randrange(1 << 31)
            slack = max(5, target // 10)
            trace = simulate_trace(net, target + slack, s1, min_len=target, case_id=f"{name}-{j}", _tables=tables)
            if level > 0:
                trace = inject_noise(trace, NoiseProfile.uniform(level, s2, pool))
            out.append(Instance(f"{name}-{j}", name, trace))
    return nets, out


@dataclass
class BenchRow:
    instance: str
    net: str
    length: int
    L: int
    N: int
    window_cost: Optional[int] = None
    oracle_cost: Optional[int] = None
    delta: Optional[float] = None
    explored_window: Optional[int] = None
    explored_oracle: Optional[int] = None
    wall_window: Optional[float] = None
    wall_oracle: Optional[float] = None
    truncated: bool = False
    error: str = ""


TIMING_COLUMNS = ("wall_window", "wall_oracle")


@dataclass
class BenchReport:
    rows: list[BenchRow]
    manifest: dict = field(default_factory=dict)

    def aggregates(self) -> list[dict]:
        groups: dict[tuple, list[BenchRow]] = {}
        for r in self.rows:
            groups.setdefault((r.L, r.N), []).append(r)
        out = []
        for (L, N), rows in sorted(groups.items()):
            cmp = [r for r in rows if r.oracle_cost is not None and r.window_cost is not None]
            agg = {"L": L, "N": N, "instances": len(rows), "errors": sum(1 for r in rows if r.error),
                   "compared": len(cmp)}
            if cmp:
                agg["fraction_optimal"] = sum(r.window_cost == r.oracle_cost for r in cmp) / len(cmp)
                agg["mean_delta"] = statistics.fmean(r.delta for r in cmp)
                agg["nodes_ratio"] = sum(r.explored_window for r in cmp) / max(1, sum(r.explored_oracle for r in cmp))
            out.append(agg)
        return out

    def to_csv(self, timing: bool = True) -> str:
        names = [f for f in BenchRow.__dataclass_fields__ if timing or f not in TIMING_COLUMNS]
        buf = io.StringIO()
        for k, v in self.manifest.items():
            buf.write(f"# {k}={v}\n")
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in self.rows:
            d = asdict(r)
            if d["delta"] is not None:
                d["delta"] = f"{d['delta']:.6f}"
            for c in TIMING_COLUMNS:
                if d.get(c) is not None:
                    d[c] = f"{d[c]:.6f}"
            w.writerow(d)
        return buf.getvalue()

    def to_table(self) -> str:
        lines = [f"{'L':>4} {'N':>3} {'inst':>5} {'cmp':>5} {'optimal%':>9} {'meanΔ%':>8} {'nodes%':>8} {'errors':>6}"]
        for a in self.aggregates():
            if a["compared"]:
                lines.append(
                    f"{a['L']:>4} {a['N']:>3} {a['instances']:>5} {a['compared']:>5} "
                    f"{100 * a['fraction_optimal']:>9.1f} {100 * a['mean_delta']:>8.2f} "
                    f"{100 * a['nodes_ratio']:>8.1f} {a['errors']:>6}"
                )
            else:
                lines.append(f"{a['L']:>4} {a['N']:>3} {a['instances']:>5} {0:>5} {'-':>9} {'-':>8} {'-':>8} {a['errors']:>6}")
        return "\n".join(lines)


_WORKER_MODELS: dict = {}


def _run_instance(args) -> list[BenchRow]:
    net, inst, grid, budget, oracle_max, oracle_budget = args
    key = (inst.net_name, id(net))
    model = _WORKER_MODELS.get(key)
    if model is None:
        model = _WORKER_MODELS[key] = prepare_model(net)
    trace = inst.trace
    oracle = None
    oracle_err = ""
    if len(trace) <= oracle_max:
        t0 = time.perf_counter()
        try:
            res = astar_optimal_alignment(net, trace, oracle_budget, "remaining", reach=model.reach)
            oracle = (res.alignment.cost, res.explored, time.perf_counter() - t0)
        except BudgetExceeded:
            oracle_err = "oracle budget exceeded"
    rows = []
    for L, N in grid:
        row = BenchRow(inst.instance_id, inst.net_name, len(trace), L, N, error=oracle_err)
        try:
            res = window_conformance(net, model.reach, trace, WindowConfig(L, N, budget), model.alive)
        except Exception as exc:  # recorded in-row, the run continues
            row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        row.window_cost, row.explored_window, row.wall_window = res.cost, res.explored_nodes, res.wall_time
        row.truncated = res.truncated
        if oracle is not None:
            row.oracle_cost, row.explored_oracle, row.wall_oracle = oracle
            row.delta = (res.cost - oracle[0]) / max(oracle[0], 1)
        rows.append(row)
    return rows


def run_benchmark(
    spec: CorpusSpec,
    grid: Sequence[tuple[int, int]],
    oracle_max_length: int = 200,
    oracle_budget: int = DEFAULT_ORACLE_BUDGET,
    per_window_budget: int = DEFAULT_WINDOW_BUDGET,
    jobs: int = 1,
    nets: Optional[dict[str, ProcessNet]] = None,
) -> BenchReport:
    nets, instances = generate_corpus(spec, nets)
    tasks = [(nets[i.net_name], i, list(grid), per_window_budget, oracle_max_length, oracle_budget) for i in instances]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_instance, tasks))
    else:
        chunks = [_run_instance(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    manifest = {
        "corpus": asdict(spec),
        "grid": [list(g) for g in grid],
        "oracle_max_length": oracle_max_length,
        "oracle_budget": oracle_budget,
        "per_window_budget": per_window_budget,
    }
    return BenchReport(rows, manifest)


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def load_bench_config(path_or_text: str) -> dict:
    """Parse the INI-style benchmark config; see docs/formats.md for the keys."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if "\n" in path_or_text or path_or_text.lstrip().startswith("["):
        cp.read_string(path_or_text)
    else:
        cp.read_string(Path(path_or_text).read_text(encoding="utf-8"))
    c = cp["corpus"] if cp.has_section("corpus") else {}
    noise = _floats(c.get("noise", "0.1, 0.3"))
    spec = CorpusSpec(
        nets=[s.strip() for s in c.get("nets", "random:5").split(",") if s.strip()],
        net_seed=int(c.get("net_seed", 1)),
        traces_per_net=int(c.get("traces_per_net", 10)),
        min_length=int(c.get("min_length", 40)),
        max_length=int(c.get("max_length", 120)),
        noise=(noise[0], noise[-1]),
        foreign_labels=tuple(s.strip() for s in c.get("foreign_labels", "").split(",") if s.strip()),
        seed=int(c.get("seed", 7)),
    )
    g = cp["grid"] if cp.has_section("grid") else {}
    Ls = [int(x) for x in _floats(g.get("window_length", "10"))]
    Ns = [int(x) for x in _floats(g.get("beam_width", "3"))]
    r = cp["run"] if cp.has_section("run") else {}
    return {
        "spec": spec,
        "grid": [(L, N) for L in Ls for N in Ns],
        "oracle_max_length": int(r.get("oracle_max_length", 200)),
        "oracle_budget": int(r.get("oracle_budget", DEFAULT_ORACLE_BUDGET)),
        "per_window_budget": int(r.get("per_window_budget", DEFAULT_WINDOW_BUDGET)),
        "jobs": int(r.get("jobs", 1)),
    }
