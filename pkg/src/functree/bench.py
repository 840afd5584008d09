"""Benchmark loading, judging, metrics and reporting.

Datasets are JSON Lines with per-source field names (see README). Loaders
normalize records into TaskRecord and never mutate source files.
"""
from __future__ import annotations

import ast
import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, IntegrityViolation, RowTooShort
from .funcs import FunctionUnit, unit_from_ast
from .gateway import STAGE_JUDGE, LlmGateway, TokenLedger
from .prompts import render_prompt
from .sandbox import (
    STATUS_OK,
    STATUS_TIMEOUT,
    ExecRequest,
    SandboxExecutor,
    stdout_equal,
    value_display,
)

IO_FUNCTIONAL = "functional"
IO_STDIO = "stdio"
IO_MATH = "math-solution"

REASON_WRONG = "wrong-answer"
REASON_EXCEPTION = "exception"
REASON_TIMEOUT = "timeout"

JUDGE_TIME_LIMIT = 2.5

ELLIPSIS_MARKERS = ("...", "…")


@dataclass
class TaskRecord:
    id: str
    io_mode: str
    entry_name: str
    prompt: str
    example_tests: list[dict] = field(default_factory=list)
    system_tests: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    canonical_solution: str | None = None

    def entry_unit(self) -> FunctionUnit:
        """Stub FunctionUnit for the task's entry function."""
        if self.io_mode == IO_FUNCTIONAL:
            try:
                module = ast.parse(self.prompt)
            except SyntaxError as exc:
                raise FormatError(f"task {self.id}: prompt does not parse: {exc}") from exc
            for node in module.body:
                if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) and node.name == self.entry_name:
                    unit = unit_from_ast(node)
                    return FunctionUnit(
                        name=unit.name,
                        header=unit.header,
                        docstring=unit.docstring,
                        imports=[
                            ast.unparse(stmt)
                            for stmt in module.body
                            if isinstance(stmt, (ast.Import, ast.ImportFrom))
                        ],
                    )
            raise FormatError(f"task {self.id}: entry {self.entry_name!r} not found in prompt")
        if self.io_mode == IO_STDIO:
            return FunctionUnit(name="main", header="def main() -> None:", docstring=self.prompt)
        return FunctionUnit(name="solution", header="def solution():", docstring=self.prompt)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "io_mode": self.io_mode,
            "entry_name": self.entry_name,
            "prompt": self.prompt,
            "example_tests": self.example_tests,
            "system_tests": self.system_tests,
            "metadata": self.metadata,
            "canonical_solution": self.canonical_solution,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TaskRecord":
        return cls(
            id=str(doc["id"]),
            io_mode=doc["io_mode"],
            entry_name=doc["entry_name"],
            prompt=doc["prompt"],
            example_tests=list(doc.get("example_tests", [])),
            system_tests=list(doc.get("system_tests", [])),
            metadata=dict(doc.get("metadata", {})),
            canonical_solution=doc.get("canonical_solution"),
        )


@dataclass
class Verdict:
    passed: bool
    first_failure: dict | None = None
    durations: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"passed": self.passed, "first_failure": self.first_failure}


def difficulty_bucket(rating: int | None) -> str:
    """CodeForces-style buckets; 1200 falls in Mid (lower bound inclusive)."""
    if rating is None:
        return "n/a"
    if rating < 1200:
        return "Easy"
    if rating < 1600:
        return "Mid"
    if rating < 2000:
        return "Hard"
    return "Expert"


def _assert_expr(text: str) -> str:
    """Normalize an assertion test to a bare boolean expression."""
    text = text.strip()
    try:
        module = ast.parse(text)
    except SyntaxError as exc:
        raise FormatError(f"test does not parse: {text!r}: {exc}") from exc
    if len(module.body) == 1 and isinstance(module.body[0], ast.Assert):
        return ast.unparse(module.body[0].test)
    if len(module.body) == 1 and isinstance(module.body[0], ast.Expr):
        return ast.unparse(module.body[0].value)
    raise FormatError(f"test is not a single assertion or expression: {text!r}")


def _read_jsonl(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"dataset file not found: {path}")
    records = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return records


def _functional_task(doc: dict, kind: str, index: int) -> TaskRecord:
    try:
        task_id = str(doc.get("task_id") or doc.get("name") or doc["id"])
        entry = doc["entry_point"]
        prompt = doc["prompt"]
    except KeyError as exc:
        raise FormatError(f"{kind} record {index}: missing field {exc}") from exc
    tests = doc.get("system_tests") or doc.get("tests") or []
    system_tests = [{"kind": "assert", "expr": _assert_expr(t)} for t in tests]
    example_tests = [
        {"kind": "assert", "expr": _assert_expr(t)} for t in doc.get("example_tests", [])
    ]
    return TaskRecord(
        id=task_id,
        io_mode=IO_FUNCTIONAL,
        entry_name=entry,
        prompt=prompt,
        example_tests=example_tests,
        system_tests=system_tests,
        metadata={},
        canonical_solution=doc.get("canonical_solution"),
    )


def _xcodeeval_task(doc: dict, index: int) -> TaskRecord | None:
    try:
        task_id = str(doc.get("src_uid") or doc["id"])
        description = doc["description"]
    except KeyError as exc:
        raise FormatError(f"xcodeeval record {index}: missing field {exc}") from exc
    raw_tests = doc.get("hidden_unit_tests") or doc.get("unittests") or []
    samples = list(zip(doc.get("sample_inputs", []), doc.get("sample_outputs", [])))
    all_pairs = [(t["input"], t["output"]) for t in raw_tests] + samples
    for stdin_data, stdout_data in all_pairs:
        trimmed_in, trimmed_out = str(stdin_data).rstrip(), str(stdout_data).rstrip()
        if trimmed_in.endswith(ELLIPSIS_MARKERS) or trimmed_out.endswith(ELLIPSIS_MARKERS):
            return None  # crawled test is truncated; drop the whole problem
    rating = doc.get("difficulty")
    return TaskRecord(
        id=task_id,
        io_mode=IO_STDIO,
        entry_name="main",
        prompt=description,
        example_tests=[{"kind": "stdio", "input": i, "output": o} for i, o in samples],
        system_tests=[
            {"kind": "stdio", "input": t["input"], "output": t["output"]} for t in raw_tests
        ],
        metadata={
            "difficulty": rating,
            "bucket": difficulty_bucket(rating),
            "tags": doc.get("tags", []),
        },
    )


def _math_task(doc: dict, index: int) -> TaskRecord:
    try:
        problem = doc["problem"]
        label = doc.get("answer") or doc["label"]
    except KeyError as exc:
        raise FormatError(f"math record {index}: missing field {exc}") from exc
    task_id = str(doc.get("id") or f"math/{index}")
    return TaskRecord(
        id=task_id,
        io_mode=IO_MATH,
        entry_name="solution",
        prompt=problem,
        system_tests=[{"kind": "label", "label": str(label)}],
        metadata={"subject": doc.get("subject"), "level": doc.get("level")},
    )


def load_dataset(
    kind: str,
    path: str | Path,
    sample_n: int | None = None,
    seed: int = 0,
    max_tests: int | None = None,
) -> list[TaskRecord]:
    """Load and normalize one of the four supported dataset kinds.

    Sampling is seeded and reproducible. xCodeEval problems whose crawled
    tests end in an ellipsis are dropped; ``max_tests`` optionally caps the
    number of system tests kept per problem.
    """
    records = _read_jsonl(path)
    tasks: list[TaskRecord] = []
    for index, doc in enumerate(records):
        if kind in ("humaneval", "mbpp-typed"):
            tasks.append(_functional_task(doc, kind, index))
        elif kind == "xcodeeval":
            task = _xcodeeval_task(doc, index)
            if task is not None:
                tasks.append(task)
        elif kind == "math":
            tasks.append(_math_task(doc, index))
        else:
            raise FormatError(f"unknown dataset kind {kind!r}")
    if max_tests is not None:
        for task in tasks:
            task.system_tests = task.system_tests[:max_tests]
    if sample_n is not None and sample_n < len(tasks):
        tasks = random.Random(seed).sample(tasks, sample_n)
    return tasks


def judge(
    task: TaskRecord,
    program: str,
    executor: SandboxExecutor,
    time_limit: float = JUDGE_TIME_LIMIT,
) -> Verdict:
    """Run the task's system tests, short-circuiting on the first failure."""
    durations: list[float] = []
    for index, test in enumerate(task.system_tests):
        if test["kind"] == "stdio":
            outcome = executor.run(
                ExecRequest(
                    program=program, mode="stdio", stdin_data=test["input"], time_limit=time_limit
                )
            )
            durations.append(outcome.duration)
            if outcome.status == STATUS_OK and stdout_equal(outcome.stdout, test["output"]):
                continue
            return Verdict(
                passed=False,
                first_failure=_failure(index, outcome, expected=test["output"]),
                durations=durations,
            )
        outcome = executor.run(
            ExecRequest(program=program, call_expr=test["expr"], time_limit=time_limit)
        )
        durations.append(outcome.duration)
        if outcome.status == STATUS_OK and outcome.value is True:
            continue
        return Verdict(
            passed=False, first_failure=_failure(index, outcome), durations=durations
        )
    return Verdict(passed=True, durations=durations)


def _failure(index: int, outcome, expected: str | None = None) -> dict:
    if outcome.status == STATUS_TIMEOUT:
        reason = REASON_TIMEOUT
    elif outcome.status == STATUS_OK:
        reason = REASON_WRONG
    else:
        reason = REASON_EXCEPTION
    failure = {"test": index, "reason": reason}
    if reason == REASON_EXCEPTION and outcome.error_detail:
        failure["detail"] = outcome.error_detail
    if expected is not None and reason == REASON_WRONG:
        failure["expected"] = expected.strip()
        failure["observed"] = outcome.stdout.strip()
    return failure


_JUDGE_CORRECT = "judge: correct"
_JUDGE_WRONG = "judge: wrong"


def judge_math(
    prediction: str,
    label: str,
    gateway: LlmGateway,
    ledger: TokenLedger | None = None,
    retries: int = 2,
) -> bool:
    """LLM-adjudicated equivalence with an exact-match fast path.

    An unparseable judge verdict is retried once, then counted wrong.
    """
    if prediction.strip() == label.strip():
        return True
    for attempt in range(retries):
        req = render_prompt(
            "math-judge", {"ground_truth": label, "model_output": prediction}
        )
        req.sample_offset = attempt
        text = gateway.complete(req, STAGE_JUDGE, ledger)[0].text.lower()
        has_correct = _JUDGE_CORRECT in text
        has_wrong = _JUDGE_WRONG in text
        if has_correct and not has_wrong:
            return True
        if has_wrong and not has_correct:
            return False
    return False


def evaluate_task(
    task: TaskRecord,
    program: str,
    executor: SandboxExecutor,
    gateway: LlmGateway | None = None,
    ledger: TokenLedger | None = None,
    time_limit: float = JUDGE_TIME_LIMIT,
) -> Verdict:
    """Uniform judging across io modes (math runs solution() then adjudicates)."""
    if task.io_mode != IO_MATH:
        return judge(task, program, executor, time_limit=time_limit)
    outcome = executor.run(
        ExecRequest(program=program, call_expr="solution()", time_limit=time_limit)
    )
    if outcome.status != STATUS_OK:
        return Verdict(passed=False, first_failure=_failure(0, outcome), durations=[outcome.duration])
    if gateway is None:
        raise FormatError("math judging needs a gateway")
    label = task.system_tests[0]["label"]
    prediction = value_display(outcome.value)
    if judge_math(prediction, label, gateway, ledger):
        return Verdict(passed=True, durations=[outcome.duration])
    return Verdict(
        passed=False,
        first_failure={"test": 0, "reason": REASON_WRONG, "expected": label, "observed": prediction},
        durations=[outcome.duration],
    )


def pass_at_k(verdict_rows: list[list[bool]], k: int) -> float:
    """Fraction of tasks where any of the first k programs passed."""
    if not verdict_rows:
        return 0.0
    for row in verdict_rows:
        if len(row) < k:
            raise RowTooShort(f"row has {len(row)} entries, need {k}")
    hits = sum(1 for row in verdict_rows if any(row[:k]))
    return hits / len(verdict_rows)


LABEL_FINAL_PASSED = "final-passed"
LABEL_FINAL_FAILED = "final-failed"
LABEL_PROGRAM_WRONG = "program-wrong"
LABEL_UNIT_TEST_WRONG = "unit-test-wrong"
LABEL_BOTH_WRONG = "both-wrong"


def classify_self_test(p_t: bool, p_s: bool, c_t: bool) -> str:
    """Map the (program, self-tests), (program, system), (canonical, self-tests)
    predicates onto the study classes; one combination is impossible."""
    if p_t:
        return LABEL_FINAL_PASSED if p_s else LABEL_FINAL_FAILED
    if p_s and c_t:
        raise IntegrityViolation(
            "self-test failed while both program and tests check out; should never occur"
        )
    if not p_s and c_t:
        return LABEL_PROGRAM_WRONG
    if p_s and not c_t:
        return LABEL_UNIT_TEST_WRONG
    return LABEL_BOTH_WRONG


def self_test_study(
    program: str,
    canonical_solution: str,
    self_tests: list[str],
    system_tests: list[dict],
    executor: SandboxExecutor,
    time_limit: float = JUDGE_TIME_LIMIT,
) -> str:
    def passes_exprs(source: str, exprs: list[str]) -> bool:
        for expr in exprs:
            outcome = executor.run(
                ExecRequest(program=source, call_expr=expr, time_limit=time_limit)
            )
            if not (outcome.status == STATUS_OK and outcome.value is True):
                return False
        return True

    system_exprs = [t["expr"] for t in system_tests]
    p_t = passes_exprs(program, self_tests)
    p_s = passes_exprs(program, system_exprs)
    c_t = passes_exprs(canonical_solution, self_tests)
    return classify_self_test(p_t, p_s, c_t)


def build_report(
    rows: list[dict],
    dataset_kind: str | None = None,
    token_summary: dict | None = None,
) -> dict:
    """Aggregate verdict rows (dicts with id, passed, metadata) into a report."""
    rows = sorted(rows, key=lambda r: r["id"])
    total = len(rows)
    passed = sum(1 for r in rows if r["passed"])
    report: dict = {
        "dataset": dataset_kind,
        "tasks": total,
        "passed": passed,
        "pass_rate": round(passed / total, 4) if total else None,
        "task_ids": [r["id"] for r in rows],
        "results": {r["id"]: bool(r["passed"]) for r in rows},
    }
    for key in ("bucket", "subject", "level"):
        buckets: dict[str, list[bool]] = {}
        for row in rows:
            value = (row.get("metadata") or {}).get(key)
            if value is None:
                continue
            buckets.setdefault(str(value), []).append(bool(row["passed"]))
        if buckets:
            report[f"by_{key}"] = {
                name: {
                    "tasks": len(flags),
                    "pass_rate": round(sum(flags) / len(flags), 4),
                }
                for name, flags in sorted(buckets.items())
            }
    if token_summary is not None:
        report["tokens"] = token_summary
    return report


def render_comparison(reports: list[tuple[str, dict]]) -> str:
    """Plain-text comparison table; deltas are against the first run."""
    if not reports:
        return "(no runs)"
    base_name, base = reports[0]
    base_ids = base.get("task_ids", [])
    for name, report in reports[1:]:
        if report.get("task_ids", []) != base_ids:
            missing = set(base_ids) ^ set(report.get("task_ids", []))
            raise FormatError(
                f"run {name!r} covers a different task set than {base_name!r}: "
                f"divergent ids {sorted(missing)[:10]}"
            )
    headers = ["run", "tasks", "pass_rate", "delta", "avg_tokens"]
    lines = ["  ".join(f"{h:>12}" for h in headers)]
    base_rate = base.get("pass_rate") or 0.0
    for index, (name, report) in enumerate(reports):
        rate = report.get("pass_rate")
        delta = "-" if index == 0 or rate is None else f"{(rate - base_rate) * 100:+.1f}"
        tokens = (report.get("tokens") or {}).get("avg", "-")
        cells = [
            name[:12],
            str(report.get("tasks", 0)),
            "-" if rate is None else f"{rate * 100:.1f}",
            delta,
            str(tokens),
        ]
        lines.append("  ".join(f"{c:>12}" for c in cells))
    return "\n".join(lines)


def summarize_token_totals(totals: list[int]) -> dict:
    totals = sorted(totals)
    if not totals:
        return {"problems": 0}
    return {
        "problems": len(totals),
        "min": totals[0],
        "max": totals[-1],
        "avg": round(statistics.mean(totals), 1),
        "median": statistics.median(totals),
    }
