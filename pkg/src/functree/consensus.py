"""Candidate selection: pairwise-agreement consensus plus the two baseline
rankers (self-test dual agreement, output-vector clustering)."""
from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field

from .errors import NoInputs
from .gateway import STAGE_INPUT_GEN, LlmGateway, TokenLedger
from .prompts import render_prompt
from .sandbox import (
    STATUS_OK,
    ExecOutcome,
    ExecRequest,
    SandboxExecutor,
    outcomes_agree,
    stdout_equal,
)

ORIGIN_DIVIDE = "divide"
ORIGIN_SAMPLED = "sampled"

FAILURE_PENALTY = -100

DEFAULT_INPUT_CAP = 8


@dataclass
class CandidatePool:
    """k standalone candidate programs for one entry function."""

    entry: str
    candidates: list[str]
    origins: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("pool must hold at least one candidate")
        if not self.origins:
            self.origins = [ORIGIN_SAMPLED] * len(self.candidates)

    @property
    def k(self) -> int:
        return len(self.candidates)


@dataclass
class InputBatch:
    entry: str
    calls: list[str]


@dataclass
class OutcomeMatrix:
    """cells[i][j] = outcome of candidate i on input j."""

    cells: list[list[ExecOutcome]]

    def statuses(self) -> list[list[str]]:
        return [[cell.status for cell in row] for row in self.cells]


@dataclass
class ConsensusReport:
    ranker: str
    selected: int
    scores: list[int] | None = None
    statuses: list[list[str]] | None = None
    inputs: list[str] | None = None
    filtered_out: list[int] | None = None
    filter_skipped: bool = False
    penalty: bool = True

    def to_json(self) -> dict:
        return {
            "ranker": self.ranker,
            "selected": self.selected,
            "scores": self.scores,
            "statuses": self.statuses,
            "inputs": self.inputs,
            "filtered_out": self.filtered_out,
            "filter_skipped": self.filter_skipped,
            "penalty": self.penalty,
        }


def parse_calls(text: str, entry: str) -> list[str]:
    """Extract one-liner calls of ``entry`` from a completion.

    Takes the first fenced code block (or the raw text when there is none),
    keeps lines that parse to a bare call of the entry function, strips
    trailing comments via the parser, and dedups preserving order.
    """
    fence = re.search(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", text, re.DOTALL)
    body = fence.group(1) if fence else text
    calls: list[str] = []
    seen: set[str] = set()
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            module = ast.parse(line)
        except SyntaxError:
            continue
        if len(module.body) != 1 or not isinstance(module.body[0], ast.Expr):
            continue
        expr = module.body[0].value
        if not (isinstance(expr, ast.Call) and isinstance(expr.func, ast.Name)):
            continue
        if expr.func.id != entry:
            continue
        canonical = ast.unparse(expr)
        if canonical not in seen:
            seen.add(canonical)
            calls.append(canonical)
    return calls


def parse_assertions(text: str, entry: str) -> list[str]:
    """Extract assertion test expressions mentioning ``entry`` (one per line)."""
    fence = re.search(r"```[ \t]*[A-Za-z0-9_+-]*[ \t]*\r?\n(.*?)```", text, re.DOTALL)
    body = fence.group(1) if fence else text
    tests: list[str] = []
    seen: set[str] = set()
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            module = ast.parse(line)
        except SyntaxError:
            continue
        if len(module.body) != 1 or not isinstance(module.body[0], ast.Assert):
            continue
        test = module.body[0].test
        names = {n.id for n in ast.walk(test) if isinstance(n, ast.Name)}
        if entry not in names:
            continue
        canonical = ast.unparse(test)
        if canonical not in seen:
            seen.add(canonical)
            tests.append(canonical)
    return tests


def generate_inputs(
    context: str,
    entry: str,
    gateway: LlmGateway,
    ledger: TokenLedger | None = None,
    cap: int = DEFAULT_INPUT_CAP,
    retries: int = 3,
    temperature: float | None = None,
) -> InputBatch:
    """Ask the model for entry-function call expressions to probe behavior."""
    for attempt in range(retries):
        req = render_prompt(
            "gen-input",
            {"cur_func_name": entry, "prev_code": context},
            temperature=temperature,
        )
        req.sample_offset = attempt
        completion = gateway.complete(req, STAGE_INPUT_GEN, ledger)[0]
        calls = parse_calls(completion.text, entry)
        if calls:
            return InputBatch(entry=entry, calls=calls[:cap])
    raise NoInputs(f"no parseable calls for {entry!r} after {retries} attempts")


def execute_matrix(
    programs: list[str],
    calls: list[str],
    executor: SandboxExecutor,
    time_limit: float,
) -> OutcomeMatrix:
    reqs = [
        ExecRequest(program=program, call_expr=call, time_limit=time_limit)
        for program in programs
        for call in calls
    ]
    flat = executor.run_many(reqs)
    width = len(calls)
    cells = [flat[i * width : (i + 1) * width] for i in range(len(programs))]
    return OutcomeMatrix(cells=cells)


def score_pairwise(matrix: OutcomeMatrix, penalty: bool) -> list[int]:
    """Agreement points: +1 to both members of every agreeing pair per input;
    with ``penalty``, −100 per failing (candidate, input) cell."""
    k = len(matrix.cells)
    scores = [0] * k
    n_inputs = len(matrix.cells[0]) if k else 0
    for j in range(n_inputs):
        for i in range(k):
            for i2 in range(i + 1, k):
                if outcomes_agree(matrix.cells[i][j], matrix.cells[i2][j]):
                    scores[i] += 1
                    scores[i2] += 1
    if penalty:
        for i in range(k):
            for j in range(n_inputs):
                if matrix.cells[i][j].status != STATUS_OK:
                    scores[i] += FAILURE_PENALTY
    return scores


def select_max(scores: list[int], indices: list[int] | None = None) -> int:
    """Argmax with ties broken by the lowest candidate index."""
    indices = indices if indices is not None else list(range(len(scores)))
    best = 0
    for pos in range(1, len(scores)):
        if scores[pos] > scores[best]:
            best = pos
    return indices[best]


@dataclass
class ExampleTest:
    """One externally supplied check used to filter root candidates."""

    kind: str  # assert | stdio
    expr: str | None = None
    stdin_data: str | None = None
    expected_stdout: str | None = None

    def passes(self, program: str, executor: SandboxExecutor, time_limit: float) -> bool:
        if self.kind == "assert":
            outcome = executor.run(
                ExecRequest(program=program, call_expr=self.expr, time_limit=time_limit)
            )
            return outcome.ok and outcome.value is True
        outcome = executor.run(
            ExecRequest(
                program=program, mode="stdio", stdin_data=self.stdin_data, time_limit=time_limit
            )
        )
        return outcome.ok and stdout_equal(outcome.stdout, self.expected_stdout or "")


def fun_consensus(
    pool: CandidatePool,
    inputs: InputBatch,
    example_tests: list[ExampleTest] | None,
    executor: SandboxExecutor,
    penalty: bool = True,
    time_limit: float = 2.0,
) -> tuple[int, ConsensusReport]:
    """Pick the candidate with maximal aggregated pairwise agreement.

    Example tests (root node only) pre-filter the pool unless they would
    discard everything, in which case the filter is skipped so that selection
    always returns a candidate. Returns the original pool index.
    """
    if pool.k == 1:
        return 0, ConsensusReport(ranker="consensus", selected=0, penalty=penalty)

    survivors = list(range(pool.k))
    filtered_out: list[int] = []
    filter_skipped = False
    if example_tests:
        passing = [
            i
            for i in survivors
            if all(test.passes(pool.candidates[i], executor, time_limit) for test in example_tests)
        ]
        if passing:
            filtered_out = [i for i in survivors if i not in passing]
            survivors = passing
        else:
            filter_skipped = True

    if len(survivors) == 1:
        return survivors[0], ConsensusReport(
            ranker="consensus",
            selected=survivors[0],
            filtered_out=filtered_out,
            filter_skipped=filter_skipped,
            penalty=penalty,
        )

    matrix = execute_matrix(
        [pool.candidates[i] for i in survivors], inputs.calls, executor, time_limit
    )
    scores = score_pairwise(matrix, penalty)
    selected = select_max(scores, survivors)
    report = ConsensusReport(
        ranker="consensus",
        selected=selected,
        scores=scores,
        statuses=matrix.statuses(),
        inputs=list(inputs.calls),
        filtered_out=filtered_out,
        filter_skipped=filter_skipped,
        penalty=penalty,
    )
    return selected, report


def self_test_rank(
    pool: CandidatePool,
    tests: list[str],
    executor: SandboxExecutor,
    time_limit: float = 2.0,
) -> list[int]:
    """CodeT-style dual agreement: group by identical pass/fail vectors,
    score = group size x tests passed by the group, rank groups descending."""
    vectors: list[tuple[bool, ...]] = []
    for program in pool.candidates:
        reqs = [ExecRequest(program=program, call_expr=t, time_limit=time_limit) for t in tests]
        outcomes = executor.run_many(reqs)
        vectors.append(tuple(o.ok and o.value is True for o in outcomes))
    group_sizes: dict[tuple[bool, ...], int] = {}
    for vector in vectors:
        group_sizes[vector] = group_sizes.get(vector, 0) + 1
    scores = [group_sizes[vector] * sum(vector) for vector in vectors]
    return sorted(range(pool.k), key=lambda i: (-scores[i], i))


def cluster_rank(
    pool: CandidatePool,
    inputs: InputBatch,
    executor: SandboxExecutor,
    time_limit: float = 2.0,
) -> tuple[int, ConsensusReport]:
    """AlphaCode-like: cluster by exactly identical output vectors (errors and
    timeouts act as distinguished symbols), pick from the largest cluster."""
    matrix = execute_matrix(pool.candidates, inputs.calls, executor, time_limit)
    signatures: list[str] = []
    for row in matrix.cells:
        symbols = [
            ["ok", json.dumps(cell.value, sort_keys=True, ensure_ascii=False, default=str)]
            if cell.ok
            else [cell.status]
            for cell in row
        ]
        signatures.append(json.dumps(symbols))
    clusters: dict[str, list[int]] = {}
    for i, signature in enumerate(signatures):
        clusters.setdefault(signature, []).append(i)
    # Largest cluster wins; among equal sizes the one holding the smallest index.
    members = sorted(clusters.values(), key=lambda ms: (-len(ms), ms[0]))[0]
    selected = members[0]
    report = ConsensusReport(
        ranker="clustering",
        selected=selected,
        statuses=matrix.statuses(),
        inputs=list(inputs.calls),
    )
    return selected, report
