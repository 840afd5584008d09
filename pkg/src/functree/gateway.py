"""Chat-completion access: live HTTP backend or deterministic mock replay.

The mock transcript is a JSON Lines file, one record per line:
``{"digest": ..., "sample_index": ..., "text": ...}``. The digest keys the
exact request (messages and temperature); sample_index addresses one of the
stored samples. Mock token counts are whitespace counts scaled by 1.3 and
exist only for cost-bound assertions, never for billing; the prompt side
counts the request's variable content (the fixed few-shot scaffold declared
by the template is subtracted).
"""
from __future__ import annotations

import hashlib
import json
import os
import statistics
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendUnavailable, ConfigError, MockMiss

TOKEN_FACTOR = 1.3

STAGE_DIVIDE = "divide"
STAGE_CONQUER = "conquer"
STAGE_INPUT_GEN = "input-gen"
STAGE_JUDGE = "judge"


def approx_tokens(text: str) -> int:
    return int(len(text.split()) * TOKEN_FACTOR)


@dataclass
class ChatRequest:
    messages: list[tuple[str, str]]
    temperature: float = 0.0
    n_samples: int = 1
    max_tokens: int | None = None
    sample_offset: int = 0
    scaffold_tokens: int = 0

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0][0] != "system":
            raise ValueError("first message must have the system role")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")

    def digest(self) -> str:
        payload = json.dumps(
            {"messages": [list(m) for m in self.messages], "temperature": self.temperature},
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class Completion:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


class TokenLedger:
    """Per-stage prompt/completion token counters for one problem."""

    def __init__(self) -> None:
        self.stages: dict[str, dict[str, int]] = {}
        self._lock = threading.Lock()

    def record(self, stage: str, completion: Completion) -> None:
        with self._lock:
            bucket = self.stages.setdefault(stage, {"prompt": 0, "completion": 0})
            bucket["prompt"] += completion.prompt_tokens
            bucket["completion"] += completion.completion_tokens

    def stage_total(self, stage: str) -> int:
        bucket = self.stages.get(stage, {})
        return bucket.get("prompt", 0) + bucket.get("completion", 0)

    def total(self) -> int:
        return sum(self.stage_total(stage) for stage in self.stages)

    def to_json(self) -> dict:
        return {
            "stages": {name: dict(counts) for name, counts in sorted(self.stages.items())},
            "total": self.total(),
        }


def summarize_ledgers(ledgers: list[TokenLedger]) -> dict:
    """Min/max/avg/median over per-problem totals."""
    totals = sorted(ledger.total() for ledger in ledgers)
    if not totals:
        return {"problems": 0}
    return {
        "problems": len(totals),
        "min": totals[0],
        "max": totals[-1],
        "avg": round(statistics.mean(totals), 1),
        "median": statistics.median(totals),
    }


class MockBackend:
    """Deterministic replay of a recorded transcript."""

    def __init__(self, transcript_path: str | Path) -> None:
        self.path = Path(transcript_path)
        self.entries: dict[tuple[str, int], str] = {}
        if not self.path.exists():
            raise ConfigError(f"mock transcript not found: {self.path}")
        with self.path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self.entries[(record["digest"], int(record["sample_index"]))] = record["text"]

    def complete(self, req: ChatRequest) -> list[Completion]:
        digest = req.digest()
        prompt_text = "\n".join(content for _, content in req.messages)
        prompt_tokens = max(0, approx_tokens(prompt_text) - req.scaffold_tokens)
        completions = []
        for i in range(req.n_samples):
            key = (digest, req.sample_offset + i)
            if key not in self.entries:
                raise MockMiss(f"no transcript entry for digest={digest} sample_index={key[1]}")
            text = self.entries[key]
            completions.append(
                Completion(
                    text=text,
                    prompt_tokens=prompt_tokens if i == 0 else 0,
                    completion_tokens=approx_tokens(text),
                )
            )
        return completions


class LiveBackend:
    """OpenAI-compatible chat-completions endpoint with retries."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
    ) -> None:
        api_key = os.environ.get(api_key_env, "")
        if not api_key:
            raise ConfigError(f"environment variable {api_key_env} is not set")
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {api_key}"},
        )

    def complete(self, req: ChatRequest) -> list[Completion]:
        payload = {
            "model": self.model,
            "messages": [{"role": role, "content": content} for role, content in req.messages],
            "temperature": req.temperature,
            "n": req.n_samples,
        }
        if req.max_tokens is not None:
            payload["max_tokens"] = req.max_tokens
        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._client.post(f"{self.endpoint}/chat/completions", json=payload)
                if response.status_code in (429,) or response.status_code >= 500:
                    raise httpx.HTTPStatusError(
                        f"status {response.status_code}", request=response.request, response=response
                    )
                response.raise_for_status()
                return self._parse(response.json(), req)
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        raise BackendUnavailable(f"backend failed after {self.retries} attempts: {last_error}")

    def _parse(self, doc: dict, req: ChatRequest) -> list[Completion]:
        choices = doc["choices"]
        usage = doc.get("usage", {})
        prompt_tokens = int(usage.get("prompt_tokens", 0))
        total_completion = int(usage.get("completion_tokens", 0))
        texts = [choice["message"]["content"] or "" for choice in choices]
        # The API reports aggregate usage; apportion completion tokens by size
        # and charge the prompt once so ledger totals match billed usage.
        weights = [max(1, approx_tokens(t)) for t in texts]
        scale = total_completion / sum(weights) if texts else 0.0
        completions = []
        for i, text in enumerate(texts):
            completions.append(
                Completion(
                    text=text,
                    prompt_tokens=prompt_tokens if i == 0 else 0,
                    completion_tokens=int(round(weights[i] * scale)),
                )
            )
        return completions


class TranscriptWriter:
    """Appends replayable transcript records; used for tests and live capture."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def add(self, req: ChatRequest, texts: list[str], offset: int = 0) -> None:
        digest = req.digest()
        with self._lock, self.path.open("a", encoding="utf-8") as handle:
            for i, text in enumerate(texts):
                record = {"digest": digest, "sample_index": offset + i, "text": text}
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class LlmGateway:
    """Shared front door: rate limiting, ledger recording, optional capture."""

    def __init__(
        self,
        backend,
        max_concurrency: int = 8,
        capture: TranscriptWriter | None = None,
    ) -> None:
        self.backend = backend
        self.capture = capture
        self._semaphore = threading.Semaphore(max_concurrency)

    def complete(self, req: ChatRequest, stage: str, ledger: TokenLedger | None = None) -> list[Completion]:
        with self._semaphore:
            completions = self.backend.complete(req)
        if ledger is not None:
            for completion in completions:
                ledger.record(stage, completion)
        if self.capture is not None:
            self.capture.add(req, [c.text for c in completions], offset=req.sample_offset)
        return completions
