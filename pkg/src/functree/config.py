"""Run configuration: TOML file with ${ENV_VAR} interpolation, overridden by
command-line flags."""
from __future__ import annotations

import hashlib
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .engine import SolveConfig
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_ENV_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _interpolate(value):
    if isinstance(value, str):
        def repl(match: re.Match) -> str:
            name = match.group(1)
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} is not set")
            return os.environ[name]

        return _ENV_RE.sub(repl, value)
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    return value


@dataclass
class RunConfig:
    backend: str = "mock"  # mock | live
    mock_transcript: str | None = None
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    solve: SolveConfig = field(default_factory=SolveConfig)
    judge_time_limit: float = 2.5
    dataset_kind: str | None = None
    dataset_path: str | None = None
    sample_n: int | None = None
    seed: int = 0
    parallelism: int = 4
    max_concurrency: int = 8
    out_dir: str = "runs/out"
    driver_cmd: list[str] | None = None
    k_explicit: bool = False

    def validate(self) -> None:
        if self.backend not in ("mock", "live"):
            raise ConfigError(f"backend must be mock or live, got {self.backend!r}")
        if self.backend == "mock" and not self.mock_transcript:
            raise ConfigError("mock backend needs a transcript path (--mock)")
        if self.backend == "live":
            if self.mock_transcript:
                raise ConfigError("exactly one backend mode: drop --mock or the live endpoint")
            if not self.endpoint or not self.model:
                raise ConfigError("live backend needs endpoint and model")
            if not os.environ.get(self.api_key_env):
                raise ConfigError(f"environment variable {self.api_key_env} is not set")

    def resolved_k(self) -> int:
        """Default sample count: 5 for math tasks, 11 otherwise, unless set."""
        if self.k_explicit:
            return self.solve.k
        return 5 if self.dataset_kind == "math" else 11

    def digest(self) -> str:
        doc = self.to_json()
        doc.pop("out_dir", None)
        payload = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]

    def to_json(self) -> dict:
        return {
            "backend": self.backend,
            "mock_transcript": self.mock_transcript,
            "endpoint": self.endpoint,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "solve": self.solve.to_json(),
            "judge_time_limit": self.judge_time_limit,
            "dataset_kind": self.dataset_kind,
            "dataset_path": self.dataset_path,
            "sample_n": self.sample_n,
            "seed": self.seed,
            "parallelism": self.parallelism,
            "max_concurrency": self.max_concurrency,
            "out_dir": self.out_dir,
            "driver_cmd": self.driver_cmd,
        }


def load_config(path: str | Path | None) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    doc = _interpolate(doc)

    backend = doc.get("backend", {})
    cfg.backend = backend.get("mode", cfg.backend)
    cfg.mock_transcript = backend.get("transcript", cfg.mock_transcript)
    cfg.endpoint = backend.get("endpoint", cfg.endpoint)
    cfg.model = backend.get("model", cfg.model)
    cfg.api_key_env = backend.get("api_key_env", cfg.api_key_env)
    cfg.max_concurrency = int(backend.get("max_concurrency", cfg.max_concurrency))

    solve = doc.get("solve", {})
    if "k" in solve:
        cfg.k_explicit = True
    try:
        cfg.solve = SolveConfig(
            method=solve.get("method", cfg.solve.method),
            ranker=solve.get("ranker", cfg.solve.ranker),
            k=int(solve.get("k", cfg.solve.k)),
            max_depth=int(solve.get("max_depth", cfg.solve.max_depth)),
            divide_retries=int(solve.get("divide_retries", cfg.solve.divide_retries)),
            temperatures=solve.get("temperatures", {}),
            input_cap=int(solve.get("input_cap", cfg.solve.input_cap)),
            penalty=bool(solve.get("penalty", cfg.solve.penalty)),
            consensus_time_limit=float(
                solve.get("consensus_time_limit", cfg.solve.consensus_time_limit)
            ),
            max_tokens=solve.get("max_tokens"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solve settings: {exc}") from exc

    sandbox = doc.get("sandbox", {})
    cfg.judge_time_limit = float(sandbox.get("judge_time_limit", cfg.judge_time_limit))
    if "driver_cmd" in sandbox:
        cfg.driver_cmd = [str(part) for part in sandbox["driver_cmd"]]

    dataset = doc.get("dataset", {})
    cfg.dataset_kind = dataset.get("kind", cfg.dataset_kind)
    cfg.dataset_path = dataset.get("path", cfg.dataset_path)
    cfg.sample_n = dataset.get("sample_n", cfg.sample_n)
    cfg.seed = int(dataset.get("seed", cfg.seed))

    run = doc.get("run", {})
    cfg.parallelism = int(run.get("parallelism", cfg.parallelism))
    cfg.out_dir = run.get("out_dir", cfg.out_dir)
    return cfg
