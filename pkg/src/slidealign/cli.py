"""Command-line front end: ``slidealign {check,compare,generate,bench}``."""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .alignment import DEFAULT_ORACLE_BUDGET, DEFAULT_WINDOW_BUDGET
from .bench import (
    BUILTIN_NETS,
    NoiseProfile,
    inject_noise,
    load_bench_config,
    random_workflow_net,
    run_benchmark,
    simulate_trace,
    walk_tables,
)
from .errors import GenerationFailed, MalformedInput
from .event_log import EventLog, parse_csv, parse_xes, to_csv, to_xes
from .petri_net import StateCapExceeded
from .pnml import parse_marking_flag, read_pnml
from .sliding_window import WindowConfig, compare_with_oracle, prepare_model, window_conformance

SCHEMA_VERSION = 1
log = logging.getLogger("slidealign")


class InputError(Exception):
    """Unreadable or invalid input; maps to exit code 1."""


def _load_model(ref: str, final_marking: Optional[str]):
    fm = parse_marking_flag(final_marking) if final_marking else None
    if ref in BUILTIN_NETS:
        return BUILTIN_NETS[ref]()
    if ref.startswith("random:"):
        return random_workflow_net(int(ref.split(":", 1)[1]))
    try:
        return read_pnml(ref, fm)
    except OSError as exc:
        raise InputError(f"cannot read model {ref}: {exc}") from None
    except MalformedInput as exc:
        raise InputError(f"malformed PNML {ref}: {exc}") from None


def _load_log(path: str, args) -> EventLog:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read log {path}: {exc}") from None
    try:
        if path.lower().endswith(".csv") or (not path.lower().endswith(".xes") and not data.lstrip().startswith(b"<")):
            ev = parse_csv(data, args.case_col, args.activity_col, args.time_col)
        else:
            ev = parse_xes(data)
    except MalformedInput as exc:
        raise InputError(f"malformed log {path}: {exc}") from None
    return ev.filter_min_length(args.min_length) if args.min_length else ev


def _config(args) -> WindowConfig:
    return WindowConfig(args.window_length, args.beam_width, args.budget, args.overcollect)


def _manifest(args, cfg: WindowConfig, net) -> dict:
    return {
        "type": "manifest",
        "schema_version": SCHEMA_VERSION,
        "tool": "slidealign",
        "version": __version__,
        "command": args.command,
        "model": args.model,
        "log": getattr(args, "log", None),
        "final_marking": str(net.final_marking),
        "config": {
            "window_length": cfg.window_length,
            "beam_width": cfg.beam_width,
            "budget": cfg.per_window_budget,
            "goal_overcollect": cfg.goal_overcollect,
            "oracle_budget": getattr(args, "oracle_budget", None),
            "costs": {"sync": cfg.profile.sync, "log": cfg.profile.log,
                      "model": cfg.profile.model, "silent": cfg.profile.silent},
        },
        "seed": getattr(args, "seed", None),
    }


def _prepare(net, ev):
    try:
        model = prepare_model(net)
    except StateCapExceeded as exc:
        raise InputError(str(exc)) from None
    log.info("model %s: %d places, %d transitions, %d reachable markings",
             net.name, len(net.places), len(net.transitions), len(model.rg.nodes))
    log.info("log: %d traces, %d events", len(ev.traces), sum(len(t) for t in ev.traces))
    return model


def _check_one(job) -> dict:
    net, model, trace, cfg, emit_moves = job
    row = {"type": "trace", "case_id": trace.case_id, "length": len(trace)}
    try:
        res = window_conformance(net, model.reach, trace, cfg, model.alive)
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(cost=res.cost, explored_nodes=res.explored_nodes, windows=res.windows,
               truncated=res.truncated, wall_ms=round(1000 * res.wall_time, 3))
    if emit_moves:
        row["moves"] = [m.to_dict() for m in res.alignment.moves]
    return row


def _compare_one(job) -> dict:
    net, model, trace, cfg, oracle_budget = job
    row = {"type": "trace", "case_id": trace.case_id, "length": len(trace)}
    try:
        c = compare_with_oracle(net, trace, cfg, oracle_budget, model)
    except Exception as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(window_cost=c.window_cost, optimal_cost=c.optimal_cost, delta=c.delta,
               explored_window=c.explored_window, explored_oracle=c.explored_oracle, skipped=c.skipped,
               wall_ms_window=round(1000 * c.wall_window, 3),
               wall_ms_oracle=None if c.wall_oracle is None else round(1000 * c.wall_oracle, 3))
    return row


def _map(fn, jobs, n_jobs):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(fn, jobs))
    else:
        rows = [fn(j) for j in jobs]
    return sorted(rows, key=lambda r: r["case_id"])


def _summary_check(rows) -> dict:
    ok = [r for r in rows if "error" not in r]
    s = {"type": "summary", "traces": len(rows), "errors": len(rows) - len(ok)}
    if ok:
        costs = [r["cost"] for r in ok]
        nodes = [r["explored_nodes"] for r in ok]
        s.update(mean_cost=statistics.fmean(costs), median_cost=statistics.median(costs),
                 mean_explored=statistics.fmean(nodes), median_explored=statistics.median(nodes))
    return s


def _summary_compare(rows) -> dict:
    cmp = [r for r in rows if "error" not in r and not r["skipped"]]
    s = {"type": "summary", "traces": len(rows), "errors": sum("error" in r for r in rows),
         "skipped": sum(1 for r in rows if r.get("skipped")), "compared": len(cmp)}
    if cmp:
        s["optimal_pct"] = 100.0 * sum(r["window_cost"] == r["optimal_cost"] for r in cmp) / len(cmp)
        s["mean_delta_pct"] = 100.0 * statistics.fmean(r["delta"] for r in cmp)
        s["nodes_pct"] = 100.0 * sum(r["explored_window"] for r in cmp) / max(1, sum(r["explored_oracle"] for r in cmp))
    return s


def _emit(out, fmt, manifest, rows, summary):
    if fmt == "jsonl":
        for obj in (manifest, *rows, summary):
            out.write(json.dumps(obj, sort_keys=False) + "\n")
        return
    cols = []
    for r in rows:
        for k in r:
            if k not in cols and k not in ("type", "moves"):
                cols.append(k)
    if fmt == "csv":
        import csv

        out.write(f"# manifest={json.dumps(manifest)}\n")
        w = csv.DictWriter(out, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
        out.write(f"# summary={json.dumps(summary)}\n")
        return
    widths = {c: max([len(c)] + [len(_fmt(r.get(c))) for r in rows]) for c in cols}
    out.write("  ".join(c.ljust(widths[c]) for c in cols) + "\n")
    for r in rows:
        out.write("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in cols) + "\n")
    out.write(" ".join(f"{k}={_fmt(v)}" for k, v in summary.items() if k != "type") + "\n")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def _open_out(args):
    return open(args.output, "w", encoding="utf-8") if args.output else sys.stdout


def cmd_check(args) -> int:
    net = _load_model(args.model, args.final_marking)
    ev = _load_log(args.log, args)
    cfg = _config(args)
    model = _prepare(net, ev)
    rows = _map(_check_one, [(net, model, t, cfg, args.emit_moves) for t in ev], args.jobs)
    out = _open_out(args)
    try:
        _emit(out, args.format, _manifest(args, cfg, net), rows, _summary_check(rows))
    finally:
        if out is not sys.stdout:
            out.close()
    return 2 if any("error" in r for r in rows) else 0


def cmd_compare(args) -> int:
    net = _load_model(args.model, args.final_marking)
    ev = _load_log(args.log, args)
    cfg = _config(args)
    model = _prepare(net, ev)
    rows = _map(_compare_one, [(net, model, t, cfg, args.oracle_budget) for t in ev], args.jobs)
    out = _open_out(args)
    try:
        _emit(out, args.format, _manifest(args, cfg, net), rows, _summary_compare(rows))
    finally:
        if out is not sys.stdout:
            out.close()
    return 2 if any("error" in r for r in rows) else 0


def cmd_generate(args) -> int:
    import random

    net = _load_model(args.model, args.final_marking)
    rng = random.Random(args.seed)
    tables = walk_tables(net)
    pool = sorted(net.labels) + [s for s in args.foreign_labels.split(",") if s]
    traces = []
    failed = 0
    for i in range(args.traces):
        s1, s2 = rng.randrange(1 << 31), rng.randrange(1 << 31)
        try:
            t = simulate_trace(net, args.max_len, s1, min_len=args.min_len, case_id=f"case{i}", _tables=tables)
        except GenerationFailed as exc:
            print(f"slidealign: case{i}: {exc}", file=sys.stderr)
            failed += 1
            continue
        noise = NoiseProfile(args.p_insert, args.p_delete, args.p_swap, s2, tuple(pool))
        traces.append(inject_noise(t, noise))
    ev = EventLog(traces)
    fmt = args.format or ("csv" if (args.output or "").lower().endswith(".csv") else "xes")
    text = to_csv(ev) if fmt == "csv" else to_xes(ev)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 2 if failed else 0


def cmd_bench(args) -> int:
    try:
        conf = load_bench_config(args.config)
    except (OSError, KeyError, ValueError, configparser.Error) as exc:
        raise InputError(f"bad bench config {args.config}: {exc}") from None
    report = run_benchmark(
        conf["spec"], conf["grid"], conf["oracle_max_length"], conf["oracle_budget"],
        conf["per_window_budget"], args.jobs or conf["jobs"],
    )
    if args.csv:
        Path(args.csv).write_text(report.to_csv(timing=not args.no_timing), encoding="utf-8")
    print(report.to_table())
    return 2 if any(r.error for r in report.rows) else 0


def _add_common(p, oracle=False):
    p.add_argument("model", help="PNML file, or a built-in model name (fixture, loop, random:SEED)")
    p.add_argument("log", help="XES or CSV event log")
    p.add_argument("-L", "--window-length", type=int, default=10)
    p.add_argument("-N", "--beam-width", type=int, default=3)
    p.add_argument("--budget", type=int, default=DEFAULT_WINDOW_BUDGET, help="expansion cap per window search")
    p.add_argument("--overcollect", type=int, default=2, help="goals per beam entry = N * overcollect")
    if oracle:
        p.add_argument("--oracle-budget", type=int, default=DEFAULT_ORACLE_BUDGET)
    p.add_argument("--final-marking", help="place[:count],... when the PNML has no final marking")
    p.add_argument("--case-col", default="case")
    p.add_argument("--activity-col", default="activity")
    p.add_argument("--time-col", default=None)
    p.add_argument("--min-length", type=int, default=0, help="skip traces shorter than this")
    p.add_argument("--format", choices=("jsonl", "csv", "table"), default="jsonl")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    p.add_argument("-o", "--output")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slidealign", description="Sliding-window conformance checking for long traces.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="align every trace with the sliding-window aligner")
    _add_common(p)
    p.add_argument("--emit-moves", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="compare the window aligner with the exact aligner")
    _add_common(p, oracle=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("generate", help="simulate (noisy) traces from a model")
    p.add_argument("model")
    p.add_argument("--final-marking")
    p.add_argument("--traces", type=int, default=10)
    p.add_argument("--min-len", type=int, default=0)
    p.add_argument("--max-len", type=int, default=100)
    p.add_argument("--p-insert", type=float, default=0.0)
    p.add_argument("--p-delete", type=float, default=0.0)
    p.add_argument("--p-swap", type=float, default=0.0)
    p.add_argument("--foreign-labels", default="", help="comma-separated labels outside the model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("xes", "csv"))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="run a benchmark described by a config file")
    p.add_argument("config")
    p.add_argument("--csv", help="write the per-instance report here")
    p.add_argument("--no-timing", action="store_true", help="omit wall-time columns from the CSV")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"slidealign: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"slidealign: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
