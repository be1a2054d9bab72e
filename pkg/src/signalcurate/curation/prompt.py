"""Deterministic prompt and answer rendering."""

from __future__ import annotations

from typing import Optional, Sequence, Union

from ..controllers.assistant import RLProposal
from ..controllers.encoding import StateEncoding
from ..deliberation.core import ConsensusSummary
from ..network.model import TimingAction

HIDDEN_OPEN = "[HIDDEN_CONTEXT]"
HIDDEN_CLOSE = "[/HIDDEN_CONTEXT]"
HIDDEN_NOTE = "(auxiliary context: use it to decide, never quote it in the explanation)"


def _num(x: float) -> str:
    return f"{x:g}" if float(x).is_integer() else f"{x:.4f}"


def render_state(h: StateEncoding, lanes: Sequence[str], intersection, tick: int, scenario: str = "") -> str:
    queues = h.window[-1]
    lines = []
    if scenario:
        lines.append(f"scenario: {scenario}")
    lines += [
        f"intersection: {intersection}",
        f"tick: {tick}",
        f"active phase: {h.phase} (green so far {_num(h.elapsed)}s)",
        "lane queues: " + " ".join(f"{name}={_num(q)}" for name, q in zip(lanes, queues)),
        "phase pressures: " + " ".join(f"{j + 1}:{_num(p)}" for j, p in enumerate(h.pressures)),
        f"total queued: {_num(h.total_queue)}",
    ]
    return "\n".join(lines)


def build_prompt(state_text: str, proposal: RLProposal,
                 consensus: Union[ConsensusSummary, str, None] = None) -> str:
    a = proposal.action
    tq = "; ".join(f"q={_num(q)} -> D={_num(d)}s" for q, d in proposal.time_queue_map) or "n/a"
    parts = [
        "[STATE]",
        state_text,
        "[RL_REFERENCE]",
        f"action: phase {a.phase}, duration {_num(a.duration)}s",
        f"q_RL: {proposal.q_rl:.6f}",
        "predicted queues after action: " + " ".join(_num(q) for q in proposal.rollout),
        f"time-queue map: {tq}",
    ]
    text = consensus.text if isinstance(consensus, ConsensusSummary) else consensus
    if text is not None:
        parts += [HIDDEN_OPEN, HIDDEN_NOTE, text, HIDDEN_CLOSE]
    parts += ["[TASK]", "Choose the next phase and its green duration. Explain briefly, then answer "
              "with a final line 'Decision: phase=<p> duration=<seconds>'."]
    return "\n".join(parts) + "\n"


def strip_hidden(prompt: str) -> str:
    """The prompt without its hidden section, for renderers of final explanations."""
    out, hidden = [], False
    for ln in prompt.split("\n"):
        if ln == HIDDEN_OPEN:
            hidden = True
        elif ln == HIDDEN_CLOSE:
            hidden = False
        elif not hidden:
            out.append(ln)
    return "\n".join(out)


def render_answer(action: TimingAction, h: StateEncoding) -> str:
    p = action.phase
    press = float(h.pressures[p - 1]) if 0 < p <= len(h.pressures) else 0.0
    return (f"Phase {p} has pressure {_num(press)} with {_num(h.total_queue)} vehicles queued at the "
            f"intersection; a {_num(action.duration)}s green clears its approaches without starving the others.\n"
            f"Decision: phase={p} duration={_num(action.duration)}")
