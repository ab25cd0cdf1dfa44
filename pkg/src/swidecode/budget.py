"""Switch budget: convergence nudges and hard termination.

The caller grants at most max_switches latent-to-explicit transitions. Once
the count enters the upper half of the budget the controller starts hinting
that thinking should wrap up: on each such transition it queues the
think-end marker for injection, once per transition. When the count exceeds
the budget it queues a final answer prefix instead and arms a countdown of
answer_budget tokens; the run stops when the countdown hits zero.

Trigger bands for a budget of C_max, evaluated at the post-increment count C:

    ceil(C_max / 2) <= C <= C_max   queue end-think ids   (convergence)
    C > C_max                       queue answer prefix, arm countdown

Queued ids drain strictly FIFO, one per step, before anything else happens
on a step; the switch machine does not run while the queue is nonempty. The
countdown ticks only on tokens emitted after the prefix has fully drained.
Injection is encouragement, not enforcement: after a convergence injection
the model may keep thinking and switch again, which is what eventually
drives the count past the budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AlreadyTerminated, BudgetConfigInvalid

__all__ = ["BudgetConfig", "BudgetState", "new_state", "on_switch_to_explicit",
           "next_injected", "tick_answer_budget"]


@dataclass(frozen=True)
class BudgetConfig:
    max_switches: int  # C_max, latent->explicit transitions allowed
    answer_budget: int  # tokens granted after the final prefix drains
    end_think_token_ids: tuple[int, ...]  # think-end marker, pre-tokenized
    final_prefix_token_ids: tuple[int, ...]  # forced answer prefix, pre-tokenized

    def __post_init__(self):
        if self.max_switches < 1:
            raise BudgetConfigInvalid(f"max_switches must be >= 1, got {self.max_switches}")
        if self.answer_budget < 1:
            raise BudgetConfigInvalid(f"answer_budget must be >= 1, got {self.answer_budget}")
        if not self.end_think_token_ids:
            raise BudgetConfigInvalid("end_think_token_ids must be nonempty")
        if not self.final_prefix_token_ids:
            raise BudgetConfigInvalid("final_prefix_token_ids must be nonempty")

    @property
    def convergence_low(self) -> int:
        """Lowest switch count inside the convergence band."""
        return (self.max_switches + 1) // 2


@dataclass(frozen=True)
class BudgetState:
    queue: tuple[int, ...] = ()  # pending injected ids, FIFO
    remaining_answer_tokens: int | None = None  # None until termination arms it
    convergence_fired_for: frozenset[int] = frozenset()  # switch counts already nudged
    terminated: bool = False

    @property
    def armed(self) -> bool:
        """True once the termination prefix has been queued."""
        return self.remaining_answer_tokens is not None


def new_state() -> BudgetState:
    return BudgetState()


def on_switch_to_explicit(
    state: BudgetState, switch_count: int, config: BudgetConfig
) -> BudgetState:
    """Evaluate triggers at a latent->explicit transition.

    switch_count is the post-increment transition count. Call exactly once
    per transition; the fired-for set makes accidental repeats harmless for
    the convergence band.
    """
    if state.terminated:
        raise AlreadyTerminated("budget consulted after the run terminated")
    if switch_count > config.max_switches:
        if state.armed:
            return state
        return BudgetState(
            queue=state.queue + config.final_prefix_token_ids,
            remaining_answer_tokens=config.answer_budget,
            convergence_fired_for=state.convergence_fired_for,
            terminated=False,
        )
    if (
        config.convergence_low <= switch_count
        and switch_count not in state.convergence_fired_for
    ):
        return BudgetState(
            queue=state.queue + config.end_think_token_ids,
            remaining_answer_tokens=state.remaining_answer_tokens,
            convergence_fired_for=state.convergence_fired_for | {switch_count},
            terminated=False,
        )
    return state


def next_injected(state: BudgetState) -> tuple[BudgetState, int | None]:
    """Pop the next queued id, or None when the queue is empty."""
    if not state.queue:
        return state, None
    head = state.queue[0]
    nxt = BudgetState(
        queue=state.queue[1:],
        remaining_answer_tokens=state.remaining_answer_tokens,
        convergence_fired_for=state.convergence_fired_for,
        terminated=state.terminated,
    )
    return nxt, head


def tick_answer_budget(state: BudgetState) -> tuple[BudgetState, bool]:
    """Count one post-prefix emitted token. Returns (state, should_stop).

    No-op while the countdown is not armed. The caller must not tick while
    queued ids remain (prefix tokens are free).
    """
    if state.remaining_answer_tokens is None:
        return state, False
    left = state.remaining_answer_tokens - 1
    stop = left <= 0
    nxt = BudgetState(
        queue=state.queue,
        remaining_answer_tokens=left,
        convergence_fired_for=state.convergence_fired_for,
        terminated=stop,
    )
    return nxt, stop
