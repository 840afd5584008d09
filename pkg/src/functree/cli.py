"""Command-line entry points: solve one problem, sweep a dataset, compare runs.

Exit codes: 0 success, 1 run-level failure, 2 configuration error.
"""
from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path

import click

from .bench import (
    TaskRecord,
    build_report,
    evaluate_task,
    load_dataset,
    render_comparison,
    summarize_token_totals,
)
from .config import RunConfig, load_config
from .engine import SolveConfig, Solver
from .errors import ConfigError, FuncTreeError
from .gateway import LiveBackend, LlmGateway, MockBackend, TranscriptWriter
from .sandbox import SandboxExecutor

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG = 2


def _apply_flags(cfg: RunConfig, **flags) -> RunConfig:
    solve = cfg.solve.to_json()
    if flags.get("method"):
        solve["method"] = flags["method"]
    if flags.get("ranker"):
        solve["ranker"] = flags["ranker"]
    if flags.get("k") is not None:
        solve["k"] = flags["k"]
        cfg.k_explicit = True
    if flags.get("max_depth") is not None:
        solve["max_depth"] = flags["max_depth"]
    if flags.get("consensus_timeout") is not None:
        solve["consensus_time_limit"] = flags["consensus_timeout"]
    solve.pop("temperatures", None)
    cfg.solve = SolveConfig(temperatures=cfg.solve.temperatures, **solve)
    if flags.get("timeout") is not None:
        cfg.judge_time_limit = flags["timeout"]
    if flags.get("parallelism") is not None:
        cfg.parallelism = flags["parallelism"]
    if flags.get("seed") is not None:
        cfg.seed = flags["seed"]
    if flags.get("mock"):
        cfg.backend = "mock"
        cfg.mock_transcript = flags["mock"]
    if flags.get("endpoint"):
        cfg.backend = "live"
        cfg.endpoint = flags["endpoint"]
    if flags.get("model"):
        cfg.model = flags["model"]
    if flags.get("out"):
        cfg.out_dir = flags["out"]
    return cfg


def _gateway(cfg: RunConfig, capture_path: Path | None = None) -> LlmGateway:
    if cfg.backend == "mock":
        backend = MockBackend(cfg.mock_transcript)
        capture = None
    else:
        backend = LiveBackend(cfg.endpoint, cfg.model, api_key_env=cfg.api_key_env)
        capture = TranscriptWriter(capture_path) if capture_path else None
    return LlmGateway(backend, max_concurrency=cfg.max_concurrency, capture=capture)


def _executor(cfg: RunConfig) -> SandboxExecutor:
    return SandboxExecutor(driver_cmd=cfg.driver_cmd)


_COMMON_FLAGS = (
    click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file."),
    click.option("--method", type=click.Choice(["standard", "one-pass", "two-pass", "full"])),
    click.option("--ranker", type=click.Choice(["consensus", "self-test", "clustering", "none"])),
    click.option("--k", type=int, default=None),
    click.option("--max-depth", type=int, default=None),
    click.option("--timeout", type=float, default=None, help="Judge time limit in seconds."),
    click.option("--consensus-timeout", type=float, default=None),
    click.option("--parallelism", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--mock", type=click.Path(), default=None, help="Mock transcript (JSONL)."),
    click.option("--endpoint", default=None, help="Live chat-completions endpoint."),
    click.option("--model", default=None),
    click.option("--out", type=click.Path(), default=None),
)


def _with_common_flags(fn):
    for flag in reversed(_COMMON_FLAGS):
        fn = flag(fn)
    return fn


@click.group()
def main() -> None:
    """Divide-and-conquer program generation with consensus selection."""


@main.command("solve")
@click.argument("problem_file", type=click.Path(exists=True))
@_with_common_flags
def cmd_solve(problem_file: str, config_path: str | None, **flags) -> None:
    """Solve a single problem file (JSON task record)."""
    try:
        cfg = _apply_flags(load_config(config_path), **flags)
        cfg.validate()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        task = TaskRecord.from_json(json.loads(Path(problem_file).read_text(encoding="utf-8")))
        out_dir = Path(cfg.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        gateway = _gateway(cfg, capture_path=out_dir / "transcript.jsonl")
        solver = Solver(gateway, _executor(cfg), cfg.solve)
        result = solver.solve(task)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (FuncTreeError, KeyError, ValueError, OSError) as exc:
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(EXIT_RUN_FAILURE)

    (out_dir / "solve.json").write_text(
        json.dumps(result.to_json(), indent=2, sort_keys=True), encoding="utf-8"
    )
    (out_dir / "program.py").write_text(result.final_program + "\n", encoding="utf-8")
    with (out_dir / "trace.jsonl").open("w", encoding="utf-8") as handle:
        for event in result.trace:
            handle.write(json.dumps(event, sort_keys=True) + "\n")
    click.echo(result.final_program)
    ranks = [e for e in result.trace if e["event"] == "rank"]
    for event in ranks:
        report = event["report"]
        click.echo(
            f"# consensus {event['node']}: selected={report['selected']} scores={report['scores']}"
        )
    click.echo(f"# tokens: {result.ledger.total()}")


def _run_one(task: TaskRecord, cfg: RunConfig, gateway, executor, traces_dir: Path) -> dict:
    solver = Solver(gateway, executor, cfg.solve)
    row: dict = {"id": task.id, "metadata": task.metadata, "config_digest": cfg.digest()}
    try:
        result = solver.solve(task)
        verdict = evaluate_task(
            task,
            result.final_program,
            executor,
            gateway=gateway,
            ledger=result.ledger,
            time_limit=cfg.judge_time_limit,
        )
        with (traces_dir / f"{_slug(task.id)}.jsonl").open("w", encoding="utf-8") as handle:
            for event in result.trace:
                handle.write(json.dumps(event, sort_keys=True) + "\n")
        row.update(
            passed=verdict.passed,
            first_failure=verdict.first_failure,
            tokens_total=result.ledger.total(),
            tokens=result.ledger.to_json(),
        )
    except FuncTreeError as exc:
        row.update(passed=False, error=f"{type(exc).__name__}: {exc}", tokens_total=0)
    return row


def _slug(task_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in task_id)


@main.command("run")
@click.option("--dataset", "dataset_kind", type=click.Choice(["humaneval", "mbpp-typed", "xcodeeval", "math"]))
@click.option("--dataset-path", type=click.Path(), default=None)
@click.option("--sample-n", type=int, default=None)
@_with_common_flags
def cmd_run(
    dataset_kind: str | None,
    dataset_path: str | None,
    sample_n: int | None,
    config_path: str | None,
    **flags,
) -> None:
    """Sweep a dataset and write a run directory (resumable)."""
    try:
        cfg = _apply_flags(load_config(config_path), **flags)
        if dataset_kind:
            cfg.dataset_kind = dataset_kind
        if dataset_path:
            cfg.dataset_path = dataset_path
        if sample_n is not None:
            cfg.sample_n = sample_n
        if not cfg.dataset_kind or not cfg.dataset_path:
            raise ConfigError("run needs --dataset and --dataset-path (or config values)")
        cfg.solve.k = cfg.resolved_k()
        cfg.validate()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    out_dir = Path(cfg.out_dir)
    traces_dir = out_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(cfg.to_json(), indent=2, sort_keys=True), encoding="utf-8"
    )

    try:
        tasks = load_dataset(cfg.dataset_kind, cfg.dataset_path, cfg.sample_n, cfg.seed)
        gateway = _gateway(cfg, capture_path=out_dir / "transcript.jsonl")
        executor = _executor(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except FuncTreeError as exc:
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(EXIT_RUN_FAILURE)

    verdicts_path = out_dir / "verdicts.jsonl"
    done: dict[str, dict] = {}
    if verdicts_path.exists():
        with verdicts_path.open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    row = json.loads(line)
                    if row.get("config_digest") == cfg.digest():
                        done[row["id"]] = row
    pending = [t for t in tasks if t.id not in done]
    click.echo(f"{len(tasks)} tasks, {len(done)} already judged, {len(pending)} to run")

    rows = dict(done)
    failures = 0
    try:
        with verdicts_path.open("a", encoding="utf-8") as sink:
            with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
                futures = {
                    pool.submit(_run_one, task, cfg, gateway, executor, traces_dir): task
                    for task in pending
                }
                for future in as_completed(futures):
                    row = future.result()
                    rows[row["id"]] = row
                    if row.get("error"):
                        failures += 1
                    sink.write(json.dumps(row, sort_keys=True) + "\n")
                    sink.flush()
    except KeyboardInterrupt:
        click.echo("interrupted; partial verdicts were flushed", err=True)
        sys.exit(EXIT_RUN_FAILURE)

    ordered = [rows[t.id] for t in tasks if t.id in rows]
    token_summary = summarize_token_totals([r.get("tokens_total", 0) for r in ordered])
    report = build_report(ordered, cfg.dataset_kind, token_summary)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    click.echo(f"pass rate: {report['pass_rate']}  ({report['passed']}/{report['tasks']})")
    if failures:
        click.echo(f"{failures} tasks failed to solve", err=True)
        sys.exit(EXIT_RUN_FAILURE)


@main.command("report")
@click.argument("run_dirs", nargs=-1, type=click.Path(exists=True))
def cmd_report(run_dirs: tuple[str, ...]) -> None:
    """Join run reports into a comparison table (deltas vs the first)."""
    if not run_dirs:
        click.echo("no run directories given", err=True)
        sys.exit(EXIT_CONFIG)
    reports = []
    for run_dir in run_dirs:
        path = Path(run_dir) / "report.json"
        if not path.exists():
            click.echo(f"missing report: {path}", err=True)
            sys.exit(EXIT_RUN_FAILURE)
        reports.append((Path(run_dir).name, json.loads(path.read_text(encoding="utf-8"))))
    try:
        click.echo(render_comparison(reports))
    except FuncTreeError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RUN_FAILURE)


if __name__ == "__main__":
    main()
