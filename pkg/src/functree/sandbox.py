"""Subprocess execution of untrusted candidate programs.

Each execution spawns one fresh driver interpreter and speaks the wire
protocol: a single JSON request on the driver's stdin
(``{"mode", "source", "call"?, "stdin"?, "memory_hint"?}``, newline
terminated) and a single JSON response on its stdout
(``{"status", "value"?, "stdout"?, "error"?, "duration"}``). The host owns
the clock: the process group is killed at the wall-clock limit.
"""
from __future__ import annotations

import json
import math
import os
import signal
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import SandboxUnavailable

STATUS_OK = "ok"
STATUS_EXCEPTION = "exception"
STATUS_TIMEOUT = "timeout"
STATUS_CRASHED = "crashed"

KILL_GRACE = 0.5
DEFAULT_CALL_LIMIT = 2.0
DEFAULT_JUDGE_LIMIT = 2.5

REL_TOL = 1e-6
ABS_TOL = 1e-9

DEFAULT_DRIVER_CMD = [sys.executable, "-m", "functree_driver"]


@dataclass
class ExecRequest:
    program: str
    mode: str = "call"  # call | stdio
    call_expr: str | None = None
    stdin_data: str | None = None
    time_limit: float = DEFAULT_CALL_LIMIT
    memory_hint: int | None = None

    def __post_init__(self) -> None:
        if self.mode == "call":
            if self.call_expr is None or self.stdin_data is not None:
                raise ValueError("call mode takes call_expr only")
        elif self.mode == "stdio":
            if self.stdin_data is None or self.call_expr is not None:
                raise ValueError("stdio mode takes stdin_data only")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class ExecOutcome:
    status: str
    value: object = None
    stdout: str = ""
    error_detail: str = ""
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def to_json(self) -> dict:
        doc: dict = {"status": self.status}
        if self.status == STATUS_OK:
            doc["value"] = self.value
            if self.stdout:
                doc["stdout"] = self.stdout
        elif self.error_detail:
            doc["error"] = self.error_detail
        return doc


class SandboxExecutor:
    """Pool of single-shot driver subprocesses."""

    def __init__(
        self,
        driver_cmd: list[str] | None = None,
        max_workers: int = 8,
    ) -> None:
        self.driver_cmd = list(driver_cmd or DEFAULT_DRIVER_CMD)
        self.max_workers = max_workers

    def run(self, req: ExecRequest) -> ExecOutcome:
        payload = {"mode": req.mode, "source": req.program}
        if req.mode == "call":
            payload["call"] = req.call_expr
        else:
            payload["stdin"] = req.stdin_data
        if req.memory_hint is not None:
            payload["memory_hint"] = req.memory_hint
        line = json.dumps(payload, ensure_ascii=False) + "\n"

        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                self.driver_cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            raise SandboxUnavailable(f"cannot launch driver {self.driver_cmd}: {exc}") from exc
        try:
            stdout, stderr = proc.communicate(line, timeout=req.time_limit)
        except subprocess.TimeoutExpired:
            self._kill_group(proc)
            stdout, stderr = proc.communicate()
            return ExecOutcome(status=STATUS_TIMEOUT, duration=time.monotonic() - start)
        elapsed = time.monotonic() - start

        response = self._last_json_line(stdout)
        if response is None:
            detail = (stderr or "").strip()
            if "No module named" in detail and self.driver_cmd[-1] in detail:
                raise SandboxUnavailable(f"driver module missing: {detail.splitlines()[-1]}")
            return ExecOutcome(
                status=STATUS_CRASHED,
                error_detail=f"exit {proc.returncode}: {detail[-500:]}",
                duration=elapsed,
            )
        return ExecOutcome(
            status=response.get("status", STATUS_CRASHED),
            value=response.get("value"),
            stdout=response.get("stdout", ""),
            error_detail=response.get("error", ""),
            duration=float(response.get("duration", elapsed)),
        )

    def run_many(self, reqs: list[ExecRequest]) -> list[ExecOutcome]:
        if not reqs:
            return []
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(self.run, reqs))

    @staticmethod
    def _kill_group(proc: subprocess.Popen) -> None:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()

    @staticmethod
    def _last_json_line(stdout: str) -> dict | None:
        for line in reversed((stdout or "").splitlines()):
            line = line.strip()
            if not line.startswith("{"):
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(doc, dict) and "status" in doc:
                return doc
        return None


def _numbers_equal(a: float, b: float) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    if isinstance(a, bool):
        return a == b
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    fa, fb = float(a), float(b)
    if math.isnan(fa) and math.isnan(fb):
        return True
    return math.isclose(fa, fb, rel_tol=REL_TOL, abs_tol=ABS_TOL)


def outputs_equal(a: object, b: object) -> bool:
    """Structural equality over canonical value documents.

    Numbers compare within tolerance (1e-6 relative / 1e-9 absolute) except
    int-to-int which is exact; marker documents (maps, sets, complex, repr
    fallbacks) compare per kind. Use only on values from ok outcomes.
    """
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, (bool, int, float)) and isinstance(b, (bool, int, float)):
        return _numbers_equal(a, b)
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(outputs_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        kind_a, kind_b = a.get("__kind__"), b.get("__kind__")
        if kind_a != kind_b:
            return False
        if kind_a == "complex":
            return _numbers_equal(a["re"], b["re"]) and _numbers_equal(a["im"], b["im"])
        if kind_a == "set":
            return outputs_equal(a["items"], b["items"])
        if kind_a == "map":
            return outputs_equal(a["items"], b["items"])
        if kind_a == "repr":
            return a.get("type") == b.get("type") and a.get("repr") == b.get("repr")
        return False
    return False


def outcomes_agree(a: ExecOutcome, b: ExecOutcome) -> bool:
    """Two outcomes agree only when both succeeded with equal values."""
    return a.ok and b.ok and outputs_equal(a.value, b.value)


def stdout_equal(a: str, b: str) -> bool:
    """Token-stream comparison; numeric tokens are compared as text."""
    return a.split() == b.split()


def decode_canonical(doc: object) -> object:
    """Rebuild a Python value from a canonical value document.

    Repr-fallback documents decode to their display string (the original
    object is not reconstructable).
    """
    if doc is None or isinstance(doc, (bool, int, float, str)):
        return doc
    if isinstance(doc, list):
        return [decode_canonical(item) for item in doc]
    if isinstance(doc, dict):
        kind = doc.get("__kind__")
        if kind == "complex":
            return complex(doc["re"], doc["im"])
        if kind == "set":
            items = [decode_canonical(item) for item in doc["items"]]
            try:
                return set(items)
            except TypeError:
                return set(_freeze(item) for item in items)
        if kind == "map":
            result = {}
            for key_doc, value_doc in doc["items"]:
                result[_freeze(decode_canonical(key_doc))] = decode_canonical(value_doc)
            return result
        if kind == "repr":
            return doc.get("str", doc.get("repr", ""))
    return doc


def _freeze(value: object) -> object:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, set):
        return frozenset(value)
    if isinstance(value, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    return value


def value_display(doc: object) -> str:
    """Human-readable string for an ok value (used for math predictions)."""
    decoded = decode_canonical(doc)
    if isinstance(decoded, str):
        return decoded
    return str(decoded)
