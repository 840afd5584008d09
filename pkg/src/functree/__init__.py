"""Divide-and-conquer program generation with consensus-based selection."""

from .bench import TaskRecord, Verdict, judge, judge_math, load_dataset, pass_at_k, self_test_study
from .consensus import (
    CandidatePool,
    ConsensusReport,
    InputBatch,
    OutcomeMatrix,
    cluster_rank,
    fun_consensus,
    generate_inputs,
    score_pairwise,
    self_test_rank,
)
from .engine import SolveConfig, SolveResult, Solver, ablation_mode, full_solve, standard_solve
from .funcs import FunctionUnit, ParsedCompletion, build_call_edges, extract_divide_result, parse_completion
from .gateway import ChatRequest, Completion, LlmGateway, LiveBackend, MockBackend, TokenLedger
from .prompts import render_prompt
from .sandbox import ExecOutcome, ExecRequest, SandboxExecutor, outputs_equal, stdout_equal
from .tree import FunctionTree

__version__ = "0.1.0"

__all__ = [
    "CandidatePool",
    "ChatRequest",
    "Completion",
    "ConsensusReport",
    "ExecOutcome",
    "ExecRequest",
    "FunctionTree",
    "FunctionUnit",
    "InputBatch",
    "LiveBackend",
    "LlmGateway",
    "MockBackend",
    "OutcomeMatrix",
    "ParsedCompletion",
    "SandboxExecutor",
    "SolveConfig",
    "SolveResult",
    "Solver",
    "TaskRecord",
    "TokenLedger",
    "Verdict",
    "ablation_mode",
    "build_call_edges",
    "cluster_rank",
    "extract_divide_result",
    "fun_consensus",
    "full_solve",
    "generate_inputs",
    "judge",
    "judge_math",
    "load_dataset",
    "outputs_equal",
    "parse_completion",
    "pass_at_k",
    "render_prompt",
    "score_pairwise",
    "self_test_rank",
    "self_test_study",
    "standard_solve",
    "stdout_equal",
]
