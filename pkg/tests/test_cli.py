import json
import subprocess
import sys

import pytest

from slidealign import __version__
from slidealign.cli import SCHEMA_VERSION, main
from slidealign.event_log import EventLog, Trace, parse_csv, parse_xes, to_csv, to_xes
from slidealign.petri_net import loop_fixture
from slidealign.pnml import to_pnml


@pytest.fixture
def files(tmp_path, walk_trace):
    pnml = tmp_path / "loop.pnml"
    pnml.write_text(to_pnml(loop_fixture()), encoding="utf-8")
    xes = tmp_path / "one.xes"
    xes.write_text(to_xes(EventLog([walk_trace])), encoding="utf-8")
    return tmp_path, str(pnml), str(xes)


def jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_check_walkthrough(files, capsys):
    _, pnml, xes = files
    assert main(["check", pnml, xes, "--window-length", "3", "--beam-width", "2", "--emit-moves"]) == 0
    manifest, row, summary = jsonl(capsys.readouterr().out)
    assert manifest["type"] == "manifest" and manifest["schema_version"] == SCHEMA_VERSION
    assert manifest["version"] == __version__
    assert manifest["config"]["window_length"] == 3 and manifest["config"]["beam_width"] == 2
    assert manifest["final_marking"] == "[p4]"
    assert row["case_id"] == "walkthrough" and row["cost"] == 2 and row["windows"] == 3
    assert set(row) >= {"explored_nodes", "truncated", "wall_ms", "moves"}
    kinds = {m["kind"] for m in row["moves"]}
    assert kinds <= {"sync", "log", "model"}
    for m in row["moves"]:
        assert set(m) == {"kind", "label", "transition", "trace_index"}
        assert (m["transition"] is None) == (m["kind"] == "log")
        assert (m["trace_index"] is None) == (m["kind"] == "model")
    assert summary["type"] == "summary" and summary["mean_cost"] == 2 and summary["errors"] == 0


def test_check_empty_log(files, capsys):
    d, pnml, _ = files
    empty = d / "empty.xes"
    empty.write_text(to_xes(EventLog([])), encoding="utf-8")
    assert main(["check", pnml, str(empty)]) == 0
    out = jsonl(capsys.readouterr().out)
    assert [o["type"] for o in out] == ["manifest", "summary"]
    assert out[1]["traces"] == 0


def test_malformed_pnml(tmp_path, files, capsys):
    _, _, xes = files
    bad = tmp_path / "bad.pnml"
    bad.write_text("<pnml><net id='n'><place id='p'/><arc id='arc7' source='p'/></net></pnml>")
    assert main(["check", str(bad), xes]) == 1
    err = capsys.readouterr().err
    assert "arc7" in err and "Traceback" not in err


def test_missing_files(files, capsys):
    _, pnml, _ = files
    assert main(["check", pnml, "/nonexistent.xes"]) == 1
    assert main(["check", "/nonexistent.pnml", "/nonexistent.xes"]) == 1


def test_final_marking_flag(tmp_path, files, capsys):
    _, _, xes = files
    text = to_pnml(loop_fixture())
    start = text.index("<finalmarkings>")
    stop = text.index("</finalmarkings>") + len("</finalmarkings>")
    plain = tmp_path / "nofinal.pnml"
    plain.write_text(text[:start] + text[stop:])
    assert main(["check", str(plain), xes, "-L", "3", "-N", "2"]) == 1
    capsys.readouterr()
    assert main(["check", str(plain), xes, "-L", "3", "-N", "2", "--final-marking", "p4"]) == 0
    assert jsonl(capsys.readouterr().out)[1]["cost"] == 2


def test_csv_log_and_formats(tmp_path, files, capsys):
    _, pnml, _ = files
    log = tmp_path / "log.csv"
    log.write_text("id;act\n" + "".join(f"c1;{a}\n" for a in "ABDCCECCE") + "c0;A\nc0;B\nc0;C\nc0;E\n")
    args = ["check", pnml, str(log), "-L", "3", "-N", "2", "--case-col", "id", "--activity-col", "act"]
    # wrong delimiter is detected as a missing column
    assert main(args) == 1
    capsys.readouterr()


def test_csv_log(tmp_path, files, capsys):
    _, pnml, _ = files
    log = tmp_path / "log.csv"
    log.write_text("id,act\n" + "".join(f"c1,{a}\n" for a in "ABDCCECCE") + "c0,A\nc0,B\nc0,C\nc0,E\n")
    args = ["check", pnml, str(log), "-L", "3", "-N", "2", "--case-col", "id", "--activity-col", "act"]
    assert main(args + ["--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# manifest=") and lines[-1].startswith("# summary=")
    header = lines[1].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[2:-1]]
    assert [(r["case_id"], r["cost"]) for r in rows] == [("c0", "0"), ("c1", "2")]
    assert main(args + ["--format", "table"]) == 0
    assert "case_id" in capsys.readouterr().out


def test_compare(files, capsys):
    _, pnml, xes = files
    assert main(["compare", pnml, xes, "-L", "3", "-N", "2"]) == 0
    _, row, summary = jsonl(capsys.readouterr().out)
    assert (row["window_cost"], row["optimal_cost"], row["delta"]) == (2, 2, 0.0)
    assert summary["optimal_pct"] == 100.0 and summary["mean_delta_pct"] == 0.0


def test_compare_skipped(files, capsys):
    _, pnml, xes = files
    assert main(["compare", pnml, xes, "-L", "3", "--oracle-budget", "2"]) == 0
    _, row, summary = jsonl(capsys.readouterr().out)
    assert row["skipped"] and row["optimal_cost"] is None
    assert summary["skipped"] == 1 and summary["compared"] == 0


def test_generate_then_compare_fitting(tmp_path, capsys):
    out = tmp_path / "gen.xes"
    assert main(["generate", "random:4", "--traces", "6", "--min-len", "5", "--max-len", "40",
                 "--seed", "3", "-o", str(out)]) == 0
    first = out.read_bytes()
    assert main(["generate", "random:4", "--traces", "6", "--min-len", "5", "--max-len", "40",
                 "--seed", "3", "-o", str(out)]) == 0
    assert out.read_bytes() == first
    assert len(parse_xes(first).traces) == 6
    assert main(["compare", "random:4", str(out), "-L", "4", "--jobs", "2"]) == 0
    summary = jsonl(capsys.readouterr().out)[-1]
    assert summary["optimal_pct"] == 100.0 and summary["mean_delta_pct"] == 0.0


def test_generate_noise_csv(tmp_path, capsys):
    out = tmp_path / "gen.csv"
    assert main(["generate", "fixture", "--traces", "3", "--max-len", "30", "--p-delete", "0.2",
                 "--p-insert", "0.2", "--foreign-labels", "Z", "--seed", "1", "-o", str(out)]) == 0
    log = parse_csv(out.read_text())
    assert [t.case_id for t in log] == ["case0", "case1", "case2"]


def test_generate_failure_exit(capsys):
    assert main(["generate", "fixture", "--traces", "2", "--max-len", "1"]) == 2
    assert "case0" in capsys.readouterr().err


def test_manifest_reproduces(files, capsys):
    _, pnml, xes = files
    assert main(["check", pnml, xes, "-L", "3", "-N", "2", "--seed", "9"]) == 0
    manifest, row, _ = jsonl(capsys.readouterr().out)
    cfg = manifest["config"]
    again = ["check", manifest["model"], manifest["log"], "-L", str(cfg["window_length"]),
             "-N", str(cfg["beam_width"]), "--budget", str(cfg["budget"]),
             "--overcollect", str(cfg["goal_overcollect"]), "--seed", str(manifest["seed"])]
    assert main(again) == 0
    m2, row2, _ = jsonl(capsys.readouterr().out)
    assert m2 == manifest
    strip = lambda r: {k: v for k, v in r.items() if k != "wall_ms"}
    assert strip(row2) == strip(row)


def test_output_order_independent_of_jobs(tmp_path, capsys):
    log = tmp_path / "many.csv"
    traces = [Trace(f"c{i:02d}", "ABCDABCE"[: 3 + i % 5] + "E") for i in range(12)]
    log.write_text(to_csv(EventLog(traces[::-1])))
    outs = []
    for jobs in ("1", "3"):
        assert main(["check", "fixture", str(log), "-L", "3", "--jobs", jobs]) == 0
        rows = jsonl(capsys.readouterr().out)[1:-1]
        outs.append([(r["case_id"], r["cost"]) for r in rows])
    assert outs[0] == outs[1]
    assert [c for c, _ in outs[0]] == sorted(t.case_id for t in traces)


def test_bench_command(tmp_path, capsys):
    cfg = tmp_path / "b.ini"
    cfg.write_text("[corpus]\nnets = fixture\ntraces_per_net = 3\nmin_length = 8\nmax_length = 15\n"
                   "[grid]\nwindow_length = 3\nbeam_width = 2\n")
    csv_out = tmp_path / "r.csv"
    assert main(["bench", str(cfg), "--csv", str(csv_out), "--no-timing"]) == 0
    assert "optimal%" in capsys.readouterr().out
    text = csv_out.read_text()
    assert "wall_window" not in text and "fixture-0" in text
    assert main(["bench", str(tmp_path / "missing.ini")]) == 1


def test_bad_window_length(files, capsys):
    _, pnml, xes = files
    assert main(["check", pnml, xes, "-L", "0"]) == 1
    assert "window_length" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "slidealign", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
