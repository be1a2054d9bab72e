"""Chat-completion clients: an HTTP endpoint client and scriptable mocks."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import requests

log = logging.getLogger(__name__)

Messages = Sequence[dict]


class ChatTransportError(RuntimeError):
    """One chat exchange failed (network, HTTP status, malformed response)."""


class ChatClient:
    """Interface: ``complete(messages) -> str`` plus retry settings."""

    timeout: float = 30.0
    max_retries: int = 2
    backoff: float = 0.5

    def complete(self, messages: Messages) -> str:  # pragma: no cover - interface
        raise NotImplementedError


def _check_limits(timeout: float, max_retries: int) -> None:
    if not timeout > 0:
        raise ValueError(f"timeout must be > 0, got {timeout}")
    if max_retries < 0:
        raise ValueError(f"max_retries must be >= 0, got {max_retries}")


class HTTPChatClient(ChatClient):
    """OpenAI-style ``POST {base_url}/chat/completions``.

    The bearer token is read from the environment variable ``token_env`` at
    request time, so configs never hold secrets.
    """

    def __init__(self, base_url: str, model: str, token_env: Optional[str] = None, timeout: float = 30.0,
                 max_retries: int = 2, backoff: float = 0.5, temperature: float = 0.0,
                 session: Optional[requests.Session] = None):
        _check_limits(timeout, max_retries)
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.temperature = temperature
        self._local = threading.local()
        self._shared = session

    def _session(self) -> requests.Session:
        if self._shared is not None:
            return self._shared
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def complete(self, messages: Messages) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env)
            if not token:
                raise ChatTransportError(f"environment variable {self.token_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": self.model, "messages": list(messages), "temperature": self.temperature}
        try:
            resp = self._session().post(self.url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ChatTransportError(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise ChatTransportError(f"{self.url}: HTTP {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ChatTransportError(f"{self.url}: malformed response ({exc})") from exc
        if not isinstance(content, str):
            raise ChatTransportError(f"{self.url}: message content is not text")
        return content


@dataclass
class MockChatClient(ChatClient):
    """Deterministic stand-in.

    ``reply`` is either a fixed string or a function of the messages.
    ``fail_first`` makes the first n calls raise, ``always_fail`` every call.
    Calls are recorded in ``calls`` (thread-safe).
    """

    reply: "str | Callable[[Messages], str]" = ""
    fail_first: int = 0
    always_fail: bool = False
    timeout: float = 1.0
    max_retries: int = 0
    backoff: float = 0.0
    calls: list = field(default_factory=list)

    def __post_init__(self):
        _check_limits(self.timeout, self.max_retries)
        self._lock = threading.Lock()

    def complete(self, messages: Messages) -> str:
        with self._lock:
            self.calls.append([dict(m) for m in messages])
            n = len(self.calls)
        if self.always_fail or n <= self.fail_first:
            raise ChatTransportError(f"scripted failure on call {n}")
        return self.reply(messages) if callable(self.reply) else self.reply


def exchange(client: ChatClient, messages: Messages, sleep: Callable[[float], None] = time.sleep) -> str:
    """``client.complete`` with up to ``max_retries`` retries and exponential backoff."""
    attempts = client.max_retries + 1
    for attempt in range(attempts):
        try:
            return client.complete(messages)
        except ChatTransportError as exc:
            if attempt == attempts - 1:
                raise
            delay = client.backoff * (2 ** attempt)
            log.warning("chat attempt %d/%d failed (%s); retrying in %.2fs", attempt + 1, attempts, exc, delay)
            if delay > 0:
                sleep(delay)
    raise AssertionError("unreachable")


# -- heuristic mock policy ------------------------------------------------

_CAND_RE = re.compile(r"^- (\S+): phase=(\d+) duration=(\d+(?:\.\d+)?)s q_RL=(\S+)$", re.M)


def heuristic_reply(messages: Messages) -> str:
    """Rule-based replies for both roles, keyed off the prompt's ROLE line.

    Defenders restate the case for their candidate. The consensus scores each
    candidate by its critic value and by how close its duration is to the
    candidates' median duration, half and half, then emits a score block.
    """
    prompt = messages[-1]["content"]
    cands = [(cid, int(p), float(d), float(q)) for cid, p, d, q in _CAND_RE.findall(prompt)]
    if "ROLE: consensus" not in prompt:
        target = re.search(r"^CANDIDATE: (\S+)$", prompt, re.M)
        cid = target.group(1) if target else "?"
        row = next((c for c in cands if c[0] == cid), None)
        if row is None:
            return f"{cid} keeps the intersection moving."
        return (f"{cid} serves phase {row[1]} for {row[2]:g}s; its critic expectation {row[3]:.4f} "
                f"indicates the queue on the served approaches dissipates within the green.")
    if not cands:
        return "No candidates.\nSCORES_BEGIN\nSCORES_END"
    qs = [c[3] for c in cands]
    ds = sorted(c[2] for c in cands)
    med = ds[len(ds) // 2]
    q_lo, q_hi = min(qs), max(qs)
    d_span = max(1.0, ds[-1] - ds[0])
    lines, scores = [], []
    for cid, _, d, q in cands:
        fq = 0.5 if q_hi == q_lo else (q - q_lo) / (q_hi - q_lo)
        fd = 1.0 - abs(d - med) / d_span
        scores.append((cid, 0.5 * fq + 0.5 * fd))
    best = max(scores, key=lambda x: x[1])[0]
    lines.append(f"Comparison: {best} balances expected queue dissipation against green length best.")
    lines.append("SCORES_BEGIN")
    lines.extend(f"{cid}={s:.6f}" for cid, s in scores)
    lines.append("SCORES_END")
    return "\n".join(lines)


def mock_panel(n_defenders: int = 3) -> tuple[list[MockChatClient], MockChatClient]:
    """Heuristic mock defenders plus a heuristic mock consensus."""
    return [MockChatClient(heuristic_reply) for _ in range(n_defenders)], MockChatClient(heuristic_reply)


def client_from_config(doc: dict) -> ChatClient:
    """``{"mock": "heuristic"|<fixed reply>}`` or HTTP settings
    ``{"base_url", "model", "token_env", "timeout", "max_retries", "backoff", "temperature"}``."""
    if "mock" in doc:
        reply = doc["mock"]
        return MockChatClient(heuristic_reply if reply == "heuristic" else str(reply))
    allowed = {"base_url", "model", "token_env", "timeout", "max_retries", "backoff", "temperature"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown client keys: {sorted(unknown)}")
    if "base_url" not in doc or "model" not in doc:
        raise ValueError("HTTP client config needs base_url and model")
    return HTTPChatClient(**doc)
