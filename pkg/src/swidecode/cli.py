"""Command-line front end.

Four subcommands: run (one decode, optional trace output), replay (load a
trace, summarize, optionally re-check its decisions), sweep (run a problem
set across switch budgets and emit an accuracy/tokens curve), and metrics
(normalize curves against a baseline and report efficiency gains, with an
optional plot).

Configuration is an INI file (sections listed in the README) named by
--config or the SWIR_CONFIG environment variable; command-line flags
override file values, which override built-in defaults. Exit codes: 0 on
success, 1 for configuration or validation problems, 2 when a model
backend fails mid-run.
"""

from __future__ import annotations

import argparse
import configparser
import os
import shlex
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from . import trace as trace_mod
from .backends import ScriptedBackend, TinyModel
from .budget import BudgetConfig
from .decode import (
    Greedy,
    Sampled,
    SamplingPolicy,
    SpecialIds,
    Transcript,
    decode,
    extract_answer,
)
from .errors import BackendError, ConfigError, SwidecodeError
from .metrics import (
    EfficiencyCurve,
    anchor_from_curve,
    avg_efficiency_gain,
    curves_to_csv,
    normalized_efficiency,
    parse_curves_csv,
)
from .mixing import MixSchedule
from .switching import SwitchConfig
from .wire import BridgeBackend

CONFIG_ENV = "SWIR_CONFIG"

_DEFAULTS = {
    ("backend", "kind"): "tiny",
    ("backend", "vocab"): "32",
    ("backend", "dim"): "8",
    ("backend", "seed"): "0",
    ("backend", "eos"): "0",
    ("backend", "think_begin"): "1",
    ("backend", "think_end"): "2",
    ("backend", "device"): "cpu",
    ("switch", "window_explicit_to_latent"): "512",
    ("switch", "window_latent_to_explicit"): "0",
    ("switch", "mode_control"): "auto",
    ("mix", "alpha0"): "1.0",
    ("mix", "beta0"): "0.7",
    ("budget", "max_switches"): "1000000",
    ("budget", "answer_budget"): "512",
    ("sampling", "policy"): "greedy",
    ("sampling", "temperature"): "1.0",
    ("sampling", "seed"): "0",
    ("run", "t_max"): "32768",
    ("run", "prompt"): "3",
    ("run", "method_label"): "SwiR",
    ("sweep", "jobs"): "1",
}


# ---------------------------------------------------------------------------
# config plumbing


def _load_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    chosen = path or os.environ.get(CONFIG_ENV)
    if chosen:
        if not os.path.exists(chosen):
            raise ConfigError(f"config file not found: {chosen}")
        try:
            cp.read(chosen)
        except configparser.Error as exc:
            raise ConfigError(f"config file {chosen}: {exc}") from exc
    return cp


def _get(cp: configparser.ConfigParser, section: str, key: str,
         override: object | None = None) -> str | None:
    """Override beats file beats default; None when nowhere defined."""
    if override is not None:
        return str(override)
    if cp.has_option(section, key):
        value = cp.get(section, key).strip()
        return value if value else None
    return _DEFAULTS.get((section, key))


def _conv(section: str, key: str, raw: str, kind: Callable):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _get_int(cp, section, key, override=None) -> int | None:
    raw = _get(cp, section, key, override)
    return None if raw is None else _conv(section, key, raw, int)


def _get_float(cp, section, key, override=None) -> float | None:
    raw = _get(cp, section, key, override)
    return None if raw is None else _conv(section, key, raw, float)


def _parse_ids(section: str, key: str, raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in raw.split())
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _build_backend_factory(cp, args) -> Callable[[], object]:
    kind = _get(cp, "backend", "kind", getattr(args, "backend", None))
    specials = SpecialIds(
        eos=_get_int(cp, "backend", "eos"),
        think_begin=_parse_ids("backend", "think_begin", _get(cp, "backend", "think_begin")),
        think_end=_parse_ids("backend", "think_end", _get(cp, "backend", "think_end")),
    )
    if kind == "tiny":
        vocab = _get_int(cp, "backend", "vocab")
        dim = _get_int(cp, "backend", "dim")
        seed = _get_int(cp, "backend", "seed")
        return lambda: TinyModel(vocab=vocab, dim=dim, seed=seed, specials=specials)
    if kind == "scripted":
        path = _get(cp, "backend", "script")
        if not path:
            raise ConfigError("[backend] script: required for kind=scripted")
        try:
            data = np.load(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[backend] script: cannot load {path}: {exc}") from exc
        if not hasattr(data, "files") or not {"script", "table"} <= set(data.files):
            raise ConfigError(
                "[backend] script: expected an .npz with arrays 'script' "
                "(steps, vocab) and 'table' (vocab, dim)"
            )
        from .mixing import EmbeddingTable

        script = np.asarray(data["script"], dtype=np.float64)
        table = EmbeddingTable(rows=np.asarray(data["table"], dtype=np.float64))
        return lambda: ScriptedBackend(script=script, table=table, specials=specials)
    if kind == "bridge":
        command = _get(cp, "backend", "command")
        model = _get(cp, "backend", "model")
        device = _get(cp, "backend", "device")
        if not command or not model:
            raise ConfigError("[backend] command and model: required for kind=bridge")
        argv = shlex.split(command)
        return lambda: BridgeBackend(command=argv, model=model, device=device)
    raise ConfigError(f"[backend] kind: unknown backend {kind!r}")


def _build_run_pieces(cp, args):
    switch = SwitchConfig(
        window_explicit_to_latent=_get_int(
            cp, "switch", "window_explicit_to_latent", getattr(args, "window", None)
        ),
        window_latent_to_explicit=_get_int(
            cp, "switch", "window_latent_to_explicit", getattr(args, "window_le", None)
        ),
    )
    mode_control = _get(cp, "switch", "mode_control", getattr(args, "mode", None))
    if mode_control not in ("auto", "pin_latent", "pin_explicit"):
        raise ConfigError(f"[switch] mode_control: unknown value {mode_control!r}")
    alpha0 = _get_float(cp, "mix", "alpha0", getattr(args, "alpha0", None))
    beta0 = _get_float(cp, "mix", "beta0", getattr(args, "beta0", None))
    t_max = _get_int(cp, "run", "t_max", getattr(args, "t_max", None))
    try:
        schedule = MixSchedule(alpha0=alpha0, beta0=beta0, t_max=t_max)
    except ValueError as exc:
        raise ConfigError(f"[mix]/[run]: {exc}") from exc

    pol_kind = _get(cp, "sampling", "policy", getattr(args, "policy", None))
    policy: SamplingPolicy
    if pol_kind == "greedy":
        policy = Greedy()
    elif pol_kind == "sampled":
        top_k = _get_int(cp, "sampling", "top_k", getattr(args, "top_k", None))
        top_p = _get_float(cp, "sampling", "top_p", getattr(args, "top_p", None))
        policy = Sampled(
            temperature=_get_float(cp, "sampling", "temperature",
                                   getattr(args, "temperature", None)),
            top_k=top_k,
            top_p=top_p,
            seed=_get_int(cp, "sampling", "seed", getattr(args, "seed", None)),
        )
    else:
        raise ConfigError(f"[sampling] policy: unknown policy {pol_kind!r}")
    return switch, mode_control, schedule, policy


def _build_budget(cp, args, specials: SpecialIds, c_max: int | None = None) -> BudgetConfig:
    max_switches = c_max if c_max is not None else _get_int(
        cp, "budget", "max_switches", getattr(args, "c_max", None)
    )
    raw_prefix = _get(cp, "budget", "final_prefix")
    prefix = (
        _parse_ids("budget", "final_prefix", raw_prefix)
        if raw_prefix
        else tuple(specials.think_end)
    )
    return BudgetConfig(
        max_switches=max_switches,
        answer_budget=_get_int(cp, "budget", "answer_budget",
                               getattr(args, "answer_budget", None)),
        end_think_token_ids=tuple(specials.think_end),
        final_prefix_token_ids=prefix,
    )


def _answer_text(transcript: Transcript) -> str:
    """Toy detokenization: ids as decimal words, single-spaced."""
    return " ".join(str(t) for t in extract_answer(transcript))


# ---------------------------------------------------------------------------
# subcommands


def _cmd_run(args) -> int:
    cp = _load_config(args.config)
    factory = _build_backend_factory(cp, args)
    switch, mode_control, schedule, policy = _build_run_pieces(cp, args)
    prompt = _parse_ids("run", "prompt", _get(cp, "run", "prompt", args.prompt))

    backend = factory()
    try:
        specials = backend.special_ids()
        budget_config = _build_budget(cp, args, specials)
        transcript = decode(
            prompt,
            backend,
            schedule=schedule,
            budget_config=budget_config,
            switch_config=switch,
            policy=policy,
            mode_control=mode_control,
            record_embeddings=args.full_embeddings,
        )
    finally:
        if hasattr(backend, "close"):
            backend.close()

    answer = _answer_text(transcript)
    print(f"steps:        {len(transcript.steps)}")
    print(f"switches:     {transcript.switch_count}")
    print(f"stop reason:  {transcript.stop_reason.value}")
    print(f"injected:     {len(transcript.injections)}")
    print(f"incomplete:   {transcript.incomplete}")
    print(f"answer:       {answer if answer else '(empty)'}")
    if args.out_trace:
        snapshot = trace_mod.make_snapshot(
            switch_config=switch, schedule=schedule, budget_config=budget_config,
            specials=specials, policy=policy, mode_control=mode_control,
        )
        with open(args.out_trace, "w", encoding="utf-8") as fh:
            fh.write(trace_mod.record(transcript, snapshot))
        print(f"trace:        {args.out_trace}")
    if args.out_text:
        with open(args.out_text, "w", encoding="utf-8") as fh:
            fh.write(answer + "\n")
    return 0


def _cmd_replay(args) -> int:
    try:
        with open(args.trace, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}") from exc
    doc = trace_mod.parse(text)
    tr = doc.transcript
    print(f"steps:        {len(tr.steps)}")
    print(f"switches:     {tr.switch_count}")
    print(f"stop reason:  {tr.stop_reason.value}")
    print(f"prompt len:   {tr.prompt_length}")
    print(f"answer:       {_answer_text(tr) or '(empty)'}")
    if args.check:
        problems = trace_mod.check_decisions(doc)
        if problems:
            for p in problems:
                print(f"mismatch: {p}", file=sys.stderr)
            return 1
        print("decisions:    consistent")
    return 0


def _load_problems(path: str) -> list[tuple[tuple[int, ...], str]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read problems file: {exc}") from exc
    problems = []
    for no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ConfigError(f"problems file line {no}: expected 'ids<TAB>expected'")
        ids_part, expected = line.split("\t", 1)
        problems.append((_parse_ids("sweep", "problems", ids_part), expected.strip()))
    if not problems:
        raise ConfigError("problems file holds no problems")
    return problems


def _normalize_answer(text: str) -> str:
    return " ".join(text.split())


def _is_correct(answer: str, expected: str, checker: str | None) -> bool:
    if checker:
        argv = shlex.split(checker) + [answer, expected]
        try:
            proc = subprocess.run(argv, capture_output=True)
        except OSError as exc:
            raise ConfigError(f"[sweep] checker: cannot run {checker!r}: {exc}") from exc
        return proc.returncode == 0
    return _normalize_answer(answer) == _normalize_answer(expected)


def _cmd_sweep(args) -> int:
    cp = _load_config(args.config)
    factory = _build_backend_factory(cp, args)
    switch, mode_control, schedule, policy = _build_run_pieces(cp, args)

    raw_list = _get(cp, "sweep", "c_max_list", args.c_max_list)
    if not raw_list:
        raise ConfigError("[sweep] c_max_list: required")
    c_values = sorted(set(_parse_ids("sweep", "c_max_list", raw_list)))
    if not c_values or c_values[0] < 1:
        raise ConfigError("[sweep] c_max_list: budgets must be >= 1")
    problems_path = _get(cp, "sweep", "problems", args.problems)
    if not problems_path:
        raise ConfigError("[sweep] problems: required")
    problems = _load_problems(problems_path)
    checker = _get(cp, "sweep", "checker", args.checker)
    jobs = _get_int(cp, "sweep", "jobs", args.jobs)
    label = _get(cp, "run", "method_label", args.label)

    def run_one(prompt: tuple[int, ...], c_max: int) -> Transcript:
        backend = factory()
        try:
            specials = backend.special_ids()
            budget_config = _build_budget(cp, args, specials, c_max=c_max)
            return decode(
                prompt, backend,
                schedule=schedule, budget_config=budget_config,
                switch_config=switch, policy=policy, mode_control=mode_control,
            )
        finally:
            if hasattr(backend, "close"):
                backend.close()

    rows: list[tuple[int, float]] = []
    prev: list[Transcript] | None = None
    saturated_at: int | None = None
    for c_max in c_values:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                transcripts = list(
                    pool.map(lambda p: run_one(p[0], c_max), problems)
                )
        else:
            transcripts = [run_one(p, c_max) for p, _ in problems]
        correct = sum(
            _is_correct(_answer_text(t), expected, checker)
            for t, (_, expected) in zip(transcripts, problems)
        )
        mean_tokens = int(round(
            sum(len(t.steps) for t in transcripts) / len(transcripts)
        ))
        acc = correct / len(problems)
        rows.append((mean_tokens, acc))
        print(f"c_max={c_max}: tokens={mean_tokens} accuracy={acc:.4f}")
        if prev is not None and transcripts == prev:
            saturated_at = c_max
            print(f"saturated: c_max={c_max} repeats the previous budget's runs")
            break
        prev = transcripts

    # curve rows need strictly increasing token counts
    best: dict[int, float] = {}
    for tokens, acc in rows:
        best[tokens] = max(acc, best.get(tokens, 0.0))
    points = tuple(sorted(best.items()))
    curve = EfficiencyCurve(method=label, points=points)
    csv_text = curves_to_csv([curve])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"curve:        {args.out}")
    else:
        sys.stdout.write(csv_text)
    if saturated_at is not None:
        print(f"stopped early at c_max={saturated_at}")
    return 0


def _cmd_metrics(args) -> int:
    curves: list[EfficiencyCurve] = []
    for path in args.curves:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                curves.extend(parse_curves_csv(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read curve file {path}: {exc}") from exc
    if not curves:
        raise ConfigError("no curves given")
    by_label = {c.method: c for c in curves}
    baseline = by_label.get(args.baseline)
    if baseline is None:
        lowered = {c.method.lower(): c for c in curves}
        baseline = lowered.get(args.baseline.lower())
    if baseline is None:
        raise ConfigError(
            f"no curve labeled {args.baseline!r}; have {sorted(by_label)}"
        )
    anchor = anchor_from_curve(baseline)
    print(f"baseline:     {baseline.method}")
    print(f"anchor:       accuracy={anchor.accuracy:.4f} tokens={anchor.tokens}")

    out_lines = ["method,tokens,accuracy,efficiency"]
    for curve in curves:
        for tokens, acc in curve.points:
            eff = normalized_efficiency(acc, tokens, anchor)
            out_lines.append(f"{curve.method},{tokens},{acc!r},{eff!r}")
    for curve in curves:
        if curve.method == baseline.method:
            continue
        gain = avg_efficiency_gain(curve, baseline, anchor)
        print(f"gain[{curve.method} vs {baseline.method}]: {gain:+.4f}")

    if args.out_csv:
        with open(args.out_csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(out_lines) + "\n")
        print(f"table:        {args.out_csv}")
    if args.out_plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 4.5))
        for curve in curves:
            xs = [t for t, _ in curve.points]
            ys = [normalized_efficiency(a, t, anchor) for t, a in curve.points]
            ax.plot(xs, ys, marker="o", label=curve.method)
        ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
        ax.set_xlabel("generated tokens")
        ax.set_ylabel("normalized efficiency")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.out_plot, dpi=120)
        plt.close(fig)
        print(f"plot:         {args.out_plot}")
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; usage problems are exit 1
        raise ConfigError(message)


def _add_common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"INI config path (default: ${CONFIG_ENV})")
    p.add_argument("--backend", choices=["tiny", "scripted", "bridge"])
    p.add_argument("--window", type=int, help="explicit-to-latent dwell window")
    p.add_argument("--window-le", dest="window_le", type=int,
                   help="latent-to-explicit dwell window")
    p.add_argument("--mode", choices=["auto", "pin_latent", "pin_explicit"])
    p.add_argument("--alpha0", type=float)
    p.add_argument("--beta0", type=float)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--answer-budget", dest="answer_budget", type=int)
    p.add_argument("--policy", choices=["greedy", "sampled"])
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--top-p", dest="top_p", type=float)
    p.add_argument("--seed", type=int, help="sampling seed")


def _build_parser() -> _Parser:
    parser = _Parser(prog="swidecode",
                     description="entropy-switched decoding and its metrics")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run one decode", parents=[])
    _add_common_run_flags(p_run)
    p_run.add_argument("--c-max", dest="c_max", type=int, help="switch budget")
    p_run.add_argument("--prompt", help="prompt token ids, space separated")
    p_run.add_argument("--out-trace", help="write a switrace/1 file here")
    p_run.add_argument("--out-text", help="write the answer text here")
    p_run.add_argument("--full-embeddings", action="store_true",
                       help="record fed vectors, not just digests")
    p_run.set_defaults(func=_cmd_run)

    p_replay = sub.add_parser("replay", help="summarize a recorded trace")
    p_replay.add_argument("trace")
    p_replay.add_argument("--check", action="store_true",
                          help="re-derive decisions and verify them")
    p_replay.set_defaults(func=_cmd_replay)

    p_sweep = sub.add_parser("sweep", help="curve over switch budgets")
    _add_common_run_flags(p_sweep)
    p_sweep.add_argument("--c-max-list", dest="c_max_list",
                         help="budgets to sweep, space separated")
    p_sweep.add_argument("--problems", help="file of 'ids<TAB>expected' lines")
    p_sweep.add_argument("--checker", help="external correctness command")
    p_sweep.add_argument("--jobs", type=int, help="parallel workers")
    p_sweep.add_argument("--label", help="method label for the curve")
    p_sweep.add_argument("--out", help="write the curve CSV here")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_metrics = sub.add_parser("metrics", help="efficiency report for curves")
    p_metrics.add_argument("curves", nargs="+", help="curve CSV files")
    p_metrics.add_argument("--baseline", default="CoT",
                           help="method label of the baseline curve")
    p_metrics.add_argument("--out-csv", help="write the efficiency table here")
    p_metrics.add_argument("--out-plot", help="write an efficiency plot here")
    p_metrics.set_defaults(func=_cmd_metrics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help()
            return 1
        return int(args.func(args) or 0)
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 2
    except SwidecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
