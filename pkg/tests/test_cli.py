"""End-to-end tests for the command-line front end.

Everything goes through cli.main(argv) in-process: exit codes, printed
summaries, and the files the subcommands leave behind. The scripted
backend fixtures alternate flat and peaked logit rows so that switching
and budget termination actually fire, which the tiny backend's smoothed
state never manages on its own.
"""

import json
import sys

import numpy as np
import pytest

from swidecode import trace as trace_mod
from swidecode.cli import main
from swidecode.metrics import curves_to_csv, parse_curves_csv

from helpers import data_path


def run_cli(capsys, argv):
    rc = main(argv)
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def scripted_setup(tmp_path, steps=64, vocab=8, dim=4):
    """Write an .npz script plus a config file pointing at it.

    Odd rows are sharply peaked (low entropy), even rows flat (high), so
    a zero-window run switches on nearly every comparison. Peak ids stay
    in 3..6, clear of the default special ids 0..2.
    """
    rng = np.random.default_rng(7)
    script = np.zeros((steps, vocab))
    for i in range(steps):
        if i % 2 == 1:
            script[i, 3 + (i // 2) % 4] = 10.0
    table = rng.standard_normal((vocab, dim))
    npz = tmp_path / "script.npz"
    np.savez(npz, script=script, table=table)
    cfg = tmp_path / "cfg.ini"
    cfg.write_text(f"[backend]\nkind = scripted\nscript = {npz}\n")
    return str(cfg)


def problems_file(tmp_path):
    path = tmp_path / "problems.tsv"
    path.write_text("# two toy prompts\n3\t6\n4 5\t6 6\n")
    return str(path)


# ---------------------------------------------------------------------------
# run


def test_run_defaults_short(capsys):
    rc, out, err = run_cli(capsys, ["run", "--t-max", "40"])
    assert rc == 0
    assert err == ""
    assert "steps:        40" in out
    assert "stop reason:  length" in out
    assert "answer:       (empty)" in out


def test_run_writes_parseable_trace(capsys, tmp_path):
    trace_path = tmp_path / "run.trace"
    rc, out, _ = run_cli(
        capsys, ["run", "--t-max", "40", "--out-trace", str(trace_path)]
    )
    assert rc == 0
    assert f"trace:        {trace_path}" in out
    doc = trace_mod.parse(trace_path.read_text())
    assert doc.config["window_explicit_to_latent"] == 512
    assert doc.config["t_max"] == 40
    assert doc.transcript.eos_token_id == 0
    assert len(doc.transcript.steps) == 40


def test_run_rejects_bad_alpha0(capsys):
    rc, _, err = run_cli(capsys, ["run", "--alpha0", "1.2"])
    assert rc == 1
    assert err.startswith("error:")
    assert "alpha0" in err


def test_run_missing_config_file(capsys):
    rc, _, err = run_cli(capsys, ["run", "--config", "/no/such/file.ini"])
    assert rc == 1
    assert "config file not found" in err


def scripted_run_argv(cfg, trace_path=None, text_path=None):
    argv = [
        "run", "--config", cfg, "--window", "0", "--window-le", "0",
        "--c-max", "1", "--answer-budget", "4", "--t-max", "40",
        "--prompt", "3",
    ]
    if trace_path:
        argv += ["--out-trace", str(trace_path)]
    if text_path:
        argv += ["--out-text", str(text_path)]
    return argv


def test_run_scripted_summary_and_answer_text(capsys, tmp_path):
    cfg = scripted_setup(tmp_path)
    text_path = tmp_path / "answer.txt"
    rc, out, _ = run_cli(capsys, scripted_run_argv(cfg, text_path=text_path))
    assert rc == 0
    assert "switches:     2" in out
    assert "stop reason:  eos" in out
    assert "injected:     2" in out
    assert "incomplete:   False" in out
    assert "answer:       6" in out
    assert text_path.read_text() == "6\n"


# ---------------------------------------------------------------------------
# replay


def test_run_then_replay_check(capsys, tmp_path):
    cfg = scripted_setup(tmp_path)
    trace_path = tmp_path / "run.trace"
    rc, _, _ = run_cli(capsys, scripted_run_argv(cfg, trace_path=trace_path))
    assert rc == 0

    rc, out, _ = run_cli(capsys, ["replay", str(trace_path)])
    assert rc == 0
    assert "switches:     2" in out
    assert "prompt len:   1" in out
    assert "answer:       6" in out

    rc, out, err = run_cli(capsys, ["replay", str(trace_path), "--check"])
    assert rc == 0
    assert err == ""
    assert "decisions:    consistent" in out


def test_replay_check_flags_tampered_header(capsys, tmp_path):
    cfg = scripted_setup(tmp_path)
    trace_path = tmp_path / "run.trace"
    run_cli(capsys, scripted_run_argv(cfg, trace_path=trace_path))

    lines = trace_path.read_text().splitlines()
    header = json.loads(lines[0])
    header["switch_count"] += 1
    lines[0] = json.dumps(header)
    trace_path.write_text("\n".join(lines) + "\n")

    rc, _, err = run_cli(capsys, ["replay", str(trace_path), "--check"])
    assert rc == 1
    assert "mismatch:" in err


def test_replay_missing_file(capsys):
    rc, _, err = run_cli(capsys, ["replay", "/no/such/trace"])
    assert rc == 1
    assert "cannot read trace" in err


# ---------------------------------------------------------------------------
# sweep


def test_sweep_curve_over_budgets(capsys, tmp_path):
    cfg = scripted_setup(tmp_path)
    out_csv = tmp_path / "curve.csv"
    rc, out, _ = run_cli(capsys, [
        "sweep", "--config", cfg, "--window", "0", "--window-le", "0",
        "--c-max-list", "1 2", "--t-max", "40", "--answer-budget", "4",
        "--problems", problems_file(tmp_path),
        "--label", "Scripted", "--out", str(out_csv),
    ])
    assert rc == 0
    assert "c_max=1:" in out
    assert "c_max=2:" in out
    assert "saturated" not in out
    curves = parse_curves_csv(out_csv.read_text())
    assert len(curves) == 1
    assert curves[0].method == "Scripted"
    assert len(curves[0].points) == 2
    tokens = [t for t, _ in curves[0].points]
    assert tokens == sorted(set(tokens))
    assert all(0.0 <= a <= 1.0 for _, a in curves[0].points)


def test_sweep_is_deterministic(capsys, tmp_path):
    cfg = scripted_setup(tmp_path)
    problems = problems_file(tmp_path)
    argv = [
        "sweep", "--config", cfg, "--window", "0", "--window-le", "0",
        "--c-max-list", "1 2", "--t-max", "40", "--answer-budget", "4",
        "--problems", problems,
    ]
    rc_a, out_a, _ = run_cli(capsys, list(argv))
    rc_b, out_b, _ = run_cli(capsys, list(argv))
    assert rc_a == rc_b == 0
    assert out_a == out_b


def test_sweep_saturates_when_budget_stops_binding(capsys, tmp_path):
    # the tiny backend never switches, so every budget beyond the first
    # replays the same transcripts and the sweep cuts off early
    rc, out, _ = run_cli(capsys, [
        "sweep", "--c-max-list", "5 6 7", "--t-max", "12",
        "--problems", problems_file(tmp_path),
    ])
    assert rc == 0
    assert "saturated: c_max=6" in out
    assert "stopped early at c_max=6" in out
    assert "c_max=7" not in out
    assert "method,tokens,accuracy" in out  # curve CSV lands on stdout sans --out


def test_sweep_checker_command(capsys, tmp_path):
    always_yes = f'{sys.executable} -c "import sys; sys.exit(0)"'
    rc, out, _ = run_cli(capsys, [
        "sweep", "--c-max-list", "3", "--t-max", "8",
        "--problems", problems_file(tmp_path),
        "--checker", always_yes,
    ])
    assert rc == 0
    assert "accuracy=1.0000" in out


def test_sweep_requires_problems(capsys):
    rc, _, err = run_cli(capsys, ["sweep", "--c-max-list", "1 2", "--t-max", "8"])
    assert rc == 1
    assert "problems" in err


def test_sweep_rejects_empty_budget_list(capsys, tmp_path):
    rc, _, err = run_cli(capsys, [
        "sweep", "--c-max-list", "", "--t-max", "8",
        "--problems", problems_file(tmp_path),
    ])
    assert rc == 1
    assert "c_max_list" in err


def test_sweep_rejects_bad_problem_line(capsys, tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("3\tok\n4 5 no tab here\n")
    rc, _, err = run_cli(capsys, [
        "sweep", "--c-max-list", "1", "--t-max", "8", "--problems", str(path),
    ])
    assert rc == 1
    assert "line 2" in err


# ---------------------------------------------------------------------------
# metrics


def test_metrics_reports_fixture_gains(capsys, tmp_path):
    out_csv = tmp_path / "table.csv"
    out_plot = tmp_path / "plot.png"
    rc, out, _ = run_cli(capsys, [
        "metrics", str(data_path("gsm8k_qwen3_8b.csv")),
        "--out-csv", str(out_csv), "--out-plot", str(out_plot),
    ])
    assert rc == 0
    assert "baseline:     CoT" in out
    assert "anchor:       accuracy=0.9560 tokens=2136" in out
    assert "gain[SwiR vs CoT]: +1.3455" in out
    assert "gain[CoT (Greedy) vs CoT]: +0.0134" in out
    assert "gain[Soft Thinking vs CoT]: +0.0205" in out

    table_lines = out_csv.read_text().splitlines()
    assert table_lines[0] == "method,tokens,accuracy,efficiency"
    assert len(table_lines) == 1 + 8 + 8 + 7 + 7

    blob = out_plot.read_bytes()
    assert blob[:4] == b"\x89PNG"
    assert len(blob) > 1000


def test_metrics_single_curve_has_no_gain_lines(capsys, tmp_path):
    with open(data_path("gsm8k_qwen3_8b.csv"), encoding="utf-8") as fh:
        curves = parse_curves_csv(fh.read())
    cot = [c for c in curves if c.method == "CoT"]
    path = tmp_path / "cot_only.csv"
    path.write_text(curves_to_csv(cot))
    rc, out, _ = run_cli(capsys, ["metrics", str(path)])
    assert rc == 0
    assert "baseline:     CoT" in out
    assert "gain[" not in out


def test_metrics_unknown_baseline(capsys):
    rc, _, err = run_cli(capsys, [
        "metrics", str(data_path("gsm8k_qwen3_8b.csv")), "--baseline", "Nope",
    ])
    assert rc == 1
    assert "Nope" in err


def test_metrics_rejects_malformed_csv(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("method,tokens,accuracy\nCoT,10,0.5\nCoT,20\n")
    rc, _, err = run_cli(capsys, ["metrics", str(path)])
    assert rc == 1
    assert "row 3" in err


# ---------------------------------------------------------------------------
# config plumbing and exit codes


def test_env_config_honored_and_overridden(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "env.ini"
    cfg.write_text("[run]\nt_max = 17\n")
    monkeypatch.setenv("SWIR_CONFIG", str(cfg))

    trace_path = tmp_path / "env.trace"
    rc, _, _ = run_cli(capsys, ["run", "--out-trace", str(trace_path)])
    assert rc == 0
    doc = trace_mod.parse(trace_path.read_text())
    assert doc.config["t_max"] == 17
    assert len(doc.transcript.steps) <= 17

    rc, _, _ = run_cli(
        capsys, ["run", "--t-max", "9", "--out-trace", str(trace_path)]
    )
    assert rc == 0
    doc = trace_mod.parse(trace_path.read_text())
    assert doc.config["t_max"] == 9  # flag beats the file named by the env var


def test_backend_failure_exits_2(capsys, tmp_path):
    # three flat script rows, never switches, never stops: the fourth
    # feed runs off the end of the script mid-decode
    npz = tmp_path / "short.npz"
    np.savez(npz, script=np.zeros((3, 8)), table=np.eye(8, 4))
    cfg = tmp_path / "short.ini"
    cfg.write_text(f"[backend]\nkind = scripted\nscript = {npz}\n")
    rc, _, err = run_cli(capsys, ["run", "--config", str(cfg), "--t-max", "50"])
    assert rc == 2
    assert err.startswith("backend failure:")


def test_unknown_flag_exits_1(capsys):
    rc, _, err = run_cli(capsys, ["run", "--definitely-not-a-flag", "3"])
    assert rc == 1
    assert err.startswith("error:")


def test_no_subcommand_prints_help(capsys):
    rc, out, _ = run_cli(capsys, [])
    assert rc == 1
    assert "usage" in out.lower()
