"""One-shot execution shim for untrusted candidate programs.

Reads exactly one JSON request from stdin, runs the candidate in a fresh
namespace, and writes exactly one JSON response line to stdout. Any internal
failure still produces a well-formed response with status "exception"; the
process exits nonzero only for driver-level bugs.

Request:  {"mode": "call"|"stdio", "source": str, "call": str?,
           "stdin": str?, "memory_hint": int?}
Response: {"status": "ok"|"exception", "value"?: <canonical document>,
           "stdout"?: str, "error"?: str, "duration": float}

Canonical value documents: JSON scalars map directly; sequences become
arrays; mappings become {"__kind__": "map", "items": [[k, v], ...]} with
items sorted by the serialized key; sets become {"__kind__": "set",
"items": [...]} sorted likewise; complex numbers become {"__kind__":
"complex", "re": ..., "im": ...}; anything else falls back to
{"__kind__": "repr", "type": ..., "repr": ..., "str": ...}.

Hardening here (socket denial, file-write denial, recursion and output
caps) is best effort only; real isolation is the host's subprocess plus
wall-clock kill.
"""
from __future__ import annotations

import io
import json
import sys
import time
from contextlib import redirect_stdout

RECURSION_LIMIT = 5000
OUTPUT_CAP_BYTES = 1_000_000


def canonical_repr(value: object) -> object:
    """Total function from any Python value to a canonical JSON document."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, complex):
        return {"__kind__": "complex", "re": value.real, "im": value.imag}
    if isinstance(value, (list, tuple)):
        return [canonical_repr(item) for item in value]
    if isinstance(value, (set, frozenset)):
        items = sorted((canonical_repr(item) for item in value), key=_sort_key)
        return {"__kind__": "set", "items": items}
    if isinstance(value, dict):
        items = [[canonical_repr(k), canonical_repr(v)] for k, v in value.items()]
        items.sort(key=lambda pair: _sort_key(pair[0]))
        return {"__kind__": "map", "items": items}
    return {
        "__kind__": "repr",
        "type": type(value).__name__,
        "repr": _safe_text(repr, value),
        "str": _safe_text(str, value),
    }


def _sort_key(doc: object) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, default=str)


def _safe_text(fn, value: object) -> str:
    try:
        return fn(value)
    except Exception:
        return f"<unprintable {type(value).__name__}>"


def _apply_limits(memory_hint: int | None) -> None:
    sys.setrecursionlimit(RECURSION_LIMIT)
    try:
        import resource

        if memory_hint:
            resource.setrlimit(resource.RLIMIT_AS, (memory_hint, memory_hint))
    except Exception:
        pass  # best effort; the host enforces the real limits


def _deny_ambient_io() -> None:
    """Best-effort denial of network and file writes for candidate code."""
    try:
        import socket

        def _blocked(*args, **kwargs):
            raise PermissionError("network access is disabled in the sandbox")

        socket.socket = _blocked  # type: ignore[misc]
        socket.create_connection = _blocked  # type: ignore[misc]
    except Exception:
        pass

    import builtins

    real_open = builtins.open

    def guarded_open(file, mode="r", *args, **kwargs):
        if any(flag in mode for flag in ("w", "a", "x", "+")):
            raise PermissionError("file writes are disabled in the sandbox")
        return real_open(file, mode, *args, **kwargs)

    builtins.open = guarded_open  # type: ignore[assignment]


def _error_detail(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _run_call(source: str, call: str) -> dict:
    namespace: dict = {"__name__": "__candidate__"}
    sink = io.StringIO()
    with redirect_stdout(sink):
        exec(compile(source, "<candidate>", "exec"), namespace)
        result = eval(compile(call, "<call>", "eval"), namespace)
    return {"status": "ok", "value": canonical_repr(result)}


def _run_stdio(source: str, stdin_data: str) -> dict:
    namespace: dict = {"__name__": "__candidate__"}
    sink = io.StringIO()
    old_stdin = sys.stdin
    sys.stdin = io.StringIO(stdin_data)
    try:
        with redirect_stdout(sink):
            exec(compile(source, "<candidate>", "exec"), namespace)
            entry = namespace.get("main")
            if callable(entry):
                entry()
    finally:
        sys.stdin = old_stdin
    return {"status": "ok", "stdout": sink.getvalue()}


def handle_request(request: dict) -> dict:
    """Run one request and return the response document (no I/O)."""
    start = time.monotonic()
    try:
        mode = request.get("mode")
        source = request.get("source")
        if not isinstance(source, str):
            raise ValueError("request is missing 'source'")
        _apply_limits(request.get("memory_hint"))
        if mode == "call":
            call = request.get("call")
            if not isinstance(call, str):
                raise ValueError("call mode requires 'call'")
            response = _run_call(source, call)
        elif mode == "stdio":
            stdin_data = request.get("stdin")
            if not isinstance(stdin_data, str):
                raise ValueError("stdio mode requires 'stdin'")
            response = _run_stdio(source, stdin_data)
        else:
            raise ValueError(f"unknown mode: {mode!r}")
    except BaseException as exc:  # noqa: BLE001 - candidate code may raise anything
        response = {"status": "exception", "error": _error_detail(exc)}
    response["duration"] = round(time.monotonic() - start, 6)
    return response


def _encode(response: dict) -> str:
    try:
        line = json.dumps(response, ensure_ascii=False)
    except (TypeError, ValueError) as exc:
        line = json.dumps(
            {
                "status": "exception",
                "error": f"unserializable result: {exc}",
                "duration": response.get("duration", 0.0),
            }
        )
    if len(line.encode("utf-8", errors="replace")) > OUTPUT_CAP_BYTES:
        line = json.dumps(
            {
                "status": "exception",
                "error": f"result exceeds the {OUTPUT_CAP_BYTES} byte output cap",
                "duration": response.get("duration", 0.0),
            }
        )
    return line


def serve_once(stdin=None, stdout=None) -> int:
    """Read one request line, execute it, write one response line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    raw = stdin.readline()
    try:
        request = json.loads(raw)
        if not isinstance(request, dict):
            raise ValueError("request must be a JSON object")
    except ValueError as exc:
        response = {"status": "exception", "error": f"malformed request: {exc}", "duration": 0.0}
        stdout.write(_encode(response) + "\n")
        stdout.flush()
        return 0
    _deny_ambient_io()
    response = handle_request(request)
    stdout.write(_encode(response) + "\n")
    stdout.flush()
    return 0
