"""Scripted five-function scenario used by engine and acceptance tests.

The task decomposes as a -> {b, c}, b -> {d, e}. The transcript is built by
mirroring the solver's request sequence with the same rendering code, so an
engine that issues any unexpected request fails loudly with MockMiss.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from functree.bench import TaskRecord
from functree.funcs import FunctionUnit, parse_completion
from functree.gateway import TranscriptWriter
from functree.prompts import render_prompt
from functree.tree import CONQUERED, DIVIDED, FunctionTree

PLAN: dict[str, list[str]] = {"a": ["b", "c"], "b": ["d", "e"], "d": [], "e": [], "c": []}

_SOURCES = {
    "a": '''\
def a(x: int) -> int:
    """Blend accumulation and checksum views of x."""
    return b(x) + c(x)''',
    "b": '''\
def b(x: int) -> int:
    """Combine square accumulation with the alternating sum."""
    return d(x) + e(x)''',
    "d": '''\
def d(x: int) -> int:
    """Weighted square accumulation up to x."""
    accumulated_total = 0
    triple_bonus_count = 0
    for current_value in range(1, x + 1):
        squared_value = current_value * current_value
        if current_value % 15 == 0:
            weighted_value = squared_value * 5
            triple_bonus_count = triple_bonus_count + 2
        elif current_value % 3 == 0:
            weighted_value = squared_value * 2
            triple_bonus_count = triple_bonus_count + 1
        elif current_value % 5 == 0:
            weighted_value = squared_value * 3
        else:
            weighted_value = squared_value
        accumulated_total = accumulated_total + weighted_value
    residue_adjust = accumulated_total % 97
    combined_total = accumulated_total * 10 + residue_adjust
    return combined_total + triple_bonus_count''',
    "e": '''\
def e(x: int) -> int:
    """Scaled alternating sum up to x."""
    running_value = 0
    sign_marker = 1
    positive_steps = 0
    negative_steps = 0
    for step_index in range(1, x + 1):
        running_value = running_value + sign_marker * step_index
        if sign_marker > 0:
            positive_steps = positive_steps + 1
        else:
            negative_steps = negative_steps + 1
        sign_marker = -sign_marker
    scaled_result = running_value * 4
    if scaled_result < 0:
        scaled_result = scaled_result - 1
    balance_term = positive_steps - negative_steps
    folded_result = scaled_result + running_value + balance_term
    return folded_result * 2''',
    "c": '''\
def c(x: int) -> int:
    """Positionally weighted digit checksum of x."""
    remaining_value = abs(x)
    position_weight = 1
    digit_checksum = 0
    seen_digit_count = 0
    repeated_digit_bonus = 0
    previous_digit = -1
    while remaining_value > 0:
        current_digit = remaining_value % 10
        digit_checksum = digit_checksum + current_digit * position_weight
        if current_digit == previous_digit:
            repeated_digit_bonus = repeated_digit_bonus + current_digit
        previous_digit = current_digit
        seen_digit_count = seen_digit_count + 1
        position_weight = position_weight + 1
        remaining_value = remaining_value // 10
    if x < 0:
        digit_checksum = digit_checksum + 7
    return digit_checksum + repeated_digit_bonus + seen_digit_count''',
}

_GEN_CALLS = {
    "a": ["a(7)", "a(12)"],
    "b": ["b(4)", "b(9)"],
    "c": ["c(305)", "c(48)"],
    "d": ["d(3)", "d(6)"],
    "e": ["e(5)", "e(8)"],
}


def _unit(name: str) -> FunctionUnit:
    parsed = parse_completion(f"```python\n{_SOURCES[name]}\n```")
    return parsed.units[0]


def _stub(name: str) -> FunctionUnit:
    unit = _unit(name)
    return FunctionUnit(name=unit.name, header=unit.header, docstring=unit.docstring)


def _divide_completion(name: str) -> str:
    parts = [_SOURCES[name]] + [_stub(child).render(as_stub=True) for child in PLAN[name]]
    return "Here is the `%s` function:\n\n```python\n%s\n```" % (name, "\n\n".join(parts))


def _conquer_completion(name: str) -> str:
    return f"```python\n{_SOURCES[name]}\n```"


def _gen_input_completion(name: str) -> str:
    lines = "\n".join(_GEN_CALLS[name])
    return f"Some calls to try:\n\n```python\n{lines}\n```"


@dataclass
class Walkthrough:
    task: TaskRecord
    transcript_path: Path
    final_program: str
    call_order: list[tuple[str, str]]  # (stage, node) for every scripted request


def build_walkthrough(tmp_path: Path, k: int, name: str = "walkthrough") -> Walkthrough:
    """Write a transcript covering a full solve at sample count ``k``."""
    writer = TranscriptWriter(tmp_path / f"{name}-k{k}.jsonl")
    root_stub = _stub("a")
    task = TaskRecord(
        id="walkthrough/a",
        io_mode="functional",
        entry_name="a",
        prompt=root_stub.render(as_stub=True),
        system_tests=[{"kind": "assert", "expr": "a(7) == b(7) + c(7)"}],
    )
    tree = FunctionTree.new(_stub("a"))
    calls: list[tuple[str, str]] = []

    def walk(node: str) -> None:
        req = render_prompt(
            "divide",
            {
                "prev_code": tree.render_context(node, "divide-context"),
                "cur_func_name": node,
                "cur_func_doc": tree.nodes[node].docstring,
            },
        )
        writer.add(req, [_divide_completion(node)])
        calls.append(("divide", node))
        tree.set_unit(node, _unit(node))
        tree.mark(node, DIVIDED)
        for child in PLAN[node]:
            tree.add_child(node, _stub(child))
        for child in PLAN[node]:
            walk(child)
        req = render_prompt(
            "conquer",
            {
                "prev_code": tree.render_context(node, "conquer-context"),
                "cur_func_name": node,
                "cur_func_doc": tree.nodes[node].docstring,
            },
        )
        n_samples = k - 1 if k > 1 else 1
        writer.add(req, [_conquer_completion(node)] * n_samples)
        calls.append(("conquer", node))
        if k > 1:
            gen_req = render_prompt(
                "gen-input", {"cur_func_name": node, "prev_code": tree.nodes[node].render()}
            )
            writer.add(gen_req, [_gen_input_completion(node)])
            calls.append(("input-gen", node))
        tree.mark(node, CONQUERED)

    walk("a")
    final_program = tree.render_context("a", "final-program")
    return Walkthrough(
        task=task,
        transcript_path=writer.path,
        final_program=final_program,
        call_order=calls,
    )


EXPECTED_TEN_CALLS = [
    ("divide", "a"),
    ("divide", "b"),
    ("divide", "d"),
    ("conquer", "d"),
    ("divide", "e"),
    ("conquer", "e"),
    ("conquer", "b"),
    ("divide", "c"),
    ("conquer", "c"),
    ("conquer", "a"),
]
