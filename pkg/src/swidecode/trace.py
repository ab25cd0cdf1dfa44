"""Trace files: serialize a run, parse it back, re-check its decisions.

Format "switrace/1" is UTF-8, one JSON object per line. The first line is a
header carrying the format version, the caller's config snapshot, and the
transcript-level summary (prompt length, stop reason, switch count, answer
span, step count). Every following line is one step with fixed field names:

    t, mode, H, kind, tok, dig, alpha, beta

plus edig (fed-embedding digest) on embedding-fed steps and emb (the full
vector) when the run recorded embeddings. Floats are written in shortest
round-trip decimal form, so parse(record(x)) reproduces x exactly. Unknown
trailing fields are ignored for forward compatibility; structural damage
(bad JSON, missing keys, wrong step count) reports the 1-based line number.

check_decisions() re-runs the switch machine and budget over the recorded
entropies and emissions and reports every disagreement with what the file
claims. It needs the config snapshot to carry the controller knobs, which
make_snapshot() guarantees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

from . import budget as bdg
from . import switching as sw
from .budget import BudgetConfig
from .decode import (
    Greedy,
    Sampled,
    SamplingPolicy,
    SpecialIds,
    StepKind,
    StopReason,
    Transcript,
    TranscriptStep,
    _ends_with,
    _find_answer_start,
)
from .errors import TraceCorrupt, TraceVersionMismatch
from .mixing import MixSchedule, alpha_at, beta_at
from .switching import Mode, SwitchConfig

__all__ = ["VERSION", "TraceDoc", "record", "parse", "replay", "make_snapshot",
           "check_decisions"]

VERSION = "switrace/1"

_NEVER = 2**62


@dataclass(frozen=True)
class TraceDoc:
    config: dict
    transcript: Transcript


def make_snapshot(
    *,
    switch_config: SwitchConfig,
    schedule: MixSchedule,
    budget_config: BudgetConfig,
    specials: SpecialIds,
    policy: SamplingPolicy,
    mode_control: str = "auto",
) -> dict:
    """Config snapshot with everything check_decisions needs, JSON-plain."""
    if isinstance(policy, Greedy):
        pol: dict = {"kind": "greedy"}
    else:
        pol = {
            "kind": "sampled",
            "temperature": policy.temperature,
            "top_k": policy.top_k,
            "top_p": policy.top_p,
            "seed": policy.seed,
        }
    return {
        "window_explicit_to_latent": switch_config.window_explicit_to_latent,
        "window_latent_to_explicit": switch_config.window_latent_to_explicit,
        "alpha0": schedule.alpha0,
        "beta0": schedule.beta0,
        "t_max": schedule.t_max,
        "max_switches": budget_config.max_switches,
        "answer_budget": budget_config.answer_budget,
        "end_think": list(budget_config.end_think_token_ids),
        "final_prefix": list(budget_config.final_prefix_token_ids),
        "eos": specials.eos,
        "think_begin": list(specials.think_begin),
        "mode_control": mode_control,
        "policy": pol,
    }


def record(transcript: Transcript, config: Mapping[str, object]) -> str:
    """Serialize to switrace/1 text. Pair with parse()."""
    header = {
        "version": VERSION,
        "config": dict(config),
        "prompt_length": transcript.prompt_length,
        "stop_reason": transcript.stop_reason.value,
        "switch_count": transcript.switch_count,
        "end_think_ids": list(transcript.end_think_token_ids),
        "eos_id": transcript.eos_token_id,
        "answer_span": list(transcript.answer_span) if transcript.answer_span else None,
        "incomplete": transcript.incomplete,
        "steps": len(transcript.steps),
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    for s in transcript.steps:
        obj: dict = {
            "t": s.t,
            "mode": s.mode.value,
            "H": s.entropy,
            "kind": s.kind.value,
            "tok": s.token,
            "dig": s.logits_digest,
            "alpha": s.alpha,
            "beta": s.beta,
        }
        if s.emb_digest is not None:
            obj["edig"] = s.emb_digest
        if s.emb is not None:
            obj["emb"] = list(s.emb)
        lines.append(json.dumps(obj, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def _step_from_obj(obj: dict, lineno: int) -> TranscriptStep:
    try:
        return TranscriptStep(
            t=int(obj["t"]),
            mode=Mode(obj["mode"]),
            kind=StepKind(obj["kind"]),
            entropy=float(obj["H"]),
            token=int(obj["tok"]),
            logits_digest=str(obj["dig"]),
            alpha=None if obj.get("alpha") is None else float(obj["alpha"]),
            beta=None if obj.get("beta") is None else float(obj["beta"]),
            emb_digest=None if obj.get("edig") is None else str(obj["edig"]),
            emb=None if obj.get("emb") is None else tuple(float(x) for x in obj["emb"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceCorrupt(lineno, f"bad step record: {exc}") from exc


def parse(text: str) -> TraceDoc:
    """Parse switrace/1 text back into (config, transcript)."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceCorrupt(1, "empty trace")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceCorrupt(1, f"bad header: {exc}") from exc
    if not isinstance(header, dict) or "version" not in header:
        raise TraceCorrupt(1, "header missing version")
    if header["version"] != VERSION:
        raise TraceVersionMismatch(f"expected {VERSION!r}, got {header['version']!r}")

    steps: list[TranscriptStep] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue  # blank lines tolerated
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceCorrupt(i, f"bad step line: {exc}") from exc
        if not isinstance(obj, dict):
            raise TraceCorrupt(i, "step line is not an object")
        steps.append(_step_from_obj(obj, i))

    try:
        declared = int(header["steps"])
        span = header["answer_span"]
        transcript = Transcript(
            steps=tuple(steps),
            prompt_length=int(header["prompt_length"]),
            stop_reason=StopReason(header["stop_reason"]),
            switch_count=int(header["switch_count"]),
            end_think_token_ids=tuple(int(x) for x in header["end_think_ids"]),
            eos_token_id=int(header["eos_id"]),
            answer_span=None if span is None else (int(span[0]), int(span[1])),
            incomplete=bool(header["incomplete"]),
        )
        config = dict(header["config"])
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceCorrupt(1, f"bad header field: {exc}") from exc
    if declared != len(steps):
        raise TraceCorrupt(
            len(lines) + 1, f"header declares {declared} steps, file has {len(steps)}"
        )
    return TraceDoc(config=config, transcript=transcript)


def replay(text: str) -> Transcript:
    return parse(text).transcript


def _policy_from_snapshot(pol: Mapping[str, object]) -> SamplingPolicy:
    if pol.get("kind") == "sampled":
        return Sampled(
            temperature=float(pol["temperature"]),
            top_k=None if pol.get("top_k") is None else int(pol["top_k"]),
            top_p=None if pol.get("top_p") is None else float(pol["top_p"]),
            seed=int(pol.get("seed", 0)),
        )
    return Greedy()


def check_decisions(doc: TraceDoc) -> list[str]:
    """Re-derive every controller decision from the recorded entropies.

    Returns one message per disagreement; an empty list means the file is
    internally consistent with the machine, the budget triggers, and the
    mixing schedule its header declares. Sampled token values are taken as
    recorded (re-drawing them needs the full distributions, which traces do
    not carry).
    """
    c = doc.config
    tr = doc.transcript
    cfg = SwitchConfig(
        window_explicit_to_latent=int(c["window_explicit_to_latent"]),
        window_latent_to_explicit=int(c["window_latent_to_explicit"]),
    )
    mode_control = str(c.get("mode_control", "auto"))
    if mode_control == "pin_latent":
        cfg = replace(cfg, window_latent_to_explicit=_NEVER)
    elif mode_control == "pin_explicit":
        cfg = replace(cfg, window_explicit_to_latent=_NEVER)
    sched = MixSchedule(alpha0=float(c["alpha0"]), beta0=float(c["beta0"]),
                        t_max=int(c["t_max"]))
    bcfg = BudgetConfig(
        max_switches=int(c["max_switches"]),
        answer_budget=int(c["answer_budget"]),
        end_think_token_ids=tuple(int(x) for x in c["end_think"]),
        final_prefix_token_ids=tuple(int(x) for x in c["final_prefix"]),
    )
    eos = int(c["eos"])

    problems: list[str] = []
    machine: sw.SwitchState | None = None
    bstate = bdg.new_state()
    answer_phase = False
    emitted: list[int] = []
    expected_stop: StopReason | None = None

    for i, s in enumerate(tr.steps):
        def bad(msg: str, _t: int = s.t) -> None:
            problems.append(f"step {_t}: {msg}")

        if expected_stop is not None:
            bad("run continued past a terminal step")
            return problems
        if s.t != i + 1:
            bad(f"expected step index {i + 1}")

        if bstate.queue:
            bstate, tok = bdg.next_injected(bstate)
            if s.kind is not StepKind.INJECTED:
                bad(f"expected an injected step, recorded {s.kind.value}")
            if s.token != tok:
                bad(f"expected injected id {tok}, recorded {s.token}")
            exp_mode = machine.mode if machine is not None else Mode.LATENT
            if s.mode is not exp_mode:
                bad(f"expected mode {exp_mode.value}, recorded {s.mode.value}")
            emitted.append(s.token)
            if s.token == eos:
                expected_stop = StopReason.EOS
        elif answer_phase:
            if s.kind is not StepKind.SAMPLED:
                bad(f"expected a sampled step in the answer phase, recorded {s.kind.value}")
            if s.mode is not Mode.EXPLICIT:
                bad(f"answer phase must stay explicit, recorded {s.mode.value}")
            emitted.append(s.token)
            if s.token == eos:
                expected_stop = StopReason.EOS
            else:
                bstate, out = bdg.tick_answer_budget(bstate)
                if out:
                    expected_stop = StopReason.BUDGET
        else:
            if machine is None:
                if mode_control == "pin_explicit":
                    machine = sw.SwitchState(mode=Mode.EXPLICIT, block_entropy=s.entropy,
                                             dwell_steps=0, switch_count=0)
                else:
                    machine = sw.init(s.entropy)
                decision = sw.SwitchDecision.NO_SWITCH
                first = True
            else:
                machine, decision = sw.step(machine, s.entropy, cfg)
                first = False
                if decision is sw.SwitchDecision.TO_EXPLICIT:
                    bstate = bdg.on_switch_to_explicit(bstate, machine.switch_count, bcfg)
                    if bstate.armed:
                        answer_phase = True

            sample_now = machine.mode is Mode.EXPLICIT and (first or machine.dwell_steps > 0)
            if sample_now:
                if s.kind is not StepKind.SAMPLED:
                    bad(f"expected a sampled step, recorded {s.kind.value}")
                if s.mode is not Mode.EXPLICIT:
                    bad(f"expected mode E, recorded {s.mode.value}")
                if s.alpha is not None or s.beta is not None:
                    bad("mix weights recorded on a sampled step")
                emitted.append(s.token)
                if s.token == eos:
                    expected_stop = StopReason.EOS
                elif _ends_with(emitted, bcfg.end_think_token_ids):
                    answer_phase = True
            else:
                if s.kind is not StepKind.LATENT:
                    bad(f"expected an embedding-fed step, recorded {s.kind.value}")
                if s.mode is not machine.mode:
                    bad(f"expected mode {machine.mode.value}, recorded {s.mode.value}")
                exp_alpha = (
                    alpha_at(sched, s.t)
                    if decision is sw.SwitchDecision.TO_LATENT else None
                )
                exp_beta = (
                    beta_at(sched, s.t)
                    if decision is sw.SwitchDecision.TO_EXPLICIT else None
                )
                if s.alpha != exp_alpha:
                    bad(f"expected alpha {exp_alpha!r}, recorded {s.alpha!r}")
                if s.beta != exp_beta:
                    bad(f"expected beta {exp_beta!r}, recorded {s.beta!r}")

    exp = expected_stop if expected_stop is not None else StopReason.LENGTH
    if tr.stop_reason is not exp:
        problems.append(
            f"stop reason: expected {exp.value}, recorded {tr.stop_reason.value}"
        )
    if exp is StopReason.LENGTH and tr.steps and tr.steps[-1].t != sched.t_max:
        problems.append(
            f"length stop at step {tr.steps[-1].t}, but the step limit is {sched.t_max}"
        )
    if machine is not None and tr.switch_count != machine.switch_count:
        problems.append(
            f"switch count: expected {machine.switch_count}, recorded {tr.switch_count}"
        )
    start = _find_answer_start(tr.steps, tr.end_think_token_ids)
    exp_span = (start, len(tr.steps)) if start is not None else None
    if tr.answer_span != exp_span:
        problems.append(f"answer span: expected {exp_span}, recorded {tr.answer_span}")
    if tr.incomplete != (start is None):
        problems.append(f"incomplete flag: expected {start is None}")
    return problems
