from __future__ import annotations

import ast

import pytest

from functree.bench import TaskRecord
from functree.engine import _MONOLITH_NOTE, SolveConfig, Solver, standard_solve
from functree.errors import ConfigError, NoCodeBlock
from functree.funcs import parse_completion
from functree.gateway import approx_tokens
from functree.prompts import TEMPLATES, render_prompt
from functree.tree import CONQUERED

from .walkthrough import EXPECTED_TEN_CALLS, build_walkthrough


def llm_calls(trace) -> list[tuple[str, str]]:
    return [(e["stage"], e["node"]) for e in trace if e["event"] == "llm_call"]


def conquer_order(trace) -> list[str]:
    return [e["node"] for e in trace if e["event"] == "conquer"]


def make_solver(gateway, executor, **kwargs) -> Solver:
    cfg = SolveConfig(**kwargs)
    return Solver(gateway, executor, cfg)


# ---- walkthrough -----------------------------------------------------------


def test_walkthrough_k1_issues_exactly_ten_calls(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=1)
    from functree.gateway import LlmGateway, MockBackend

    gateway = LlmGateway(MockBackend(fixture.transcript_path))
    solver = make_solver(gateway, executor, method="full", ranker="consensus", k=1)
    result = solver.solve(fixture.task)
    assert llm_calls(result.trace) == EXPECTED_TEN_CALLS
    assert result.final_program == fixture.final_program


def test_walkthrough_conquer_events_inverse_topological(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=1)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)), executor, k=1
    )
    result = solver.solve(fixture.task)
    order = conquer_order(result.trace)
    assert order == ["d", "e", "b", "c", "a"]
    position = {node: i for i, node in enumerate(order)}
    for parent, children in result.tree.children.items():
        for child in children:
            assert position[child] < position[parent]
    assert max(result.tree.depth.values()) <= 6


def test_walkthrough_k5_consensus_keeps_divide_candidate(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=5)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)), executor, k=5
    )
    result = solver.solve(fixture.task)
    assert result.final_program == fixture.final_program
    ranks = [e for e in result.trace if e["event"] == "rank"]
    assert len(ranks) == 5
    for event in ranks:
        report = event["report"]
        assert report["selected"] == 0
        assert len(report["scores"]) == 5
    pools = [e["pool"] for e in result.trace if e["event"] == "conquer"]
    assert pools == [5] * 5


def test_walkthrough_final_program_executes(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=1)
    namespace: dict = {}
    exec(compile(fixture.final_program, "<program>", "exec"), namespace)
    assert namespace["a"](7) == namespace["b"](7) + namespace["c"](7)


def test_determinism_byte_identical_results(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=5)
    from functree.gateway import LlmGateway, MockBackend

    outputs = []
    for _ in range(2):
        solver = make_solver(
            LlmGateway(MockBackend(fixture.transcript_path)), executor, k=5
        )
        outputs.append(solver.solve(fixture.task).dumps())
    assert outputs[0] == outputs[1]


@pytest.mark.parametrize("k", [1, 5])
def test_token_bound_on_walkthrough(tmp_path, executor, k):
    fixture = build_walkthrough(tmp_path, k=k)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)), executor, k=k
    )
    result = solver.solve(fixture.task)
    n_tokens = approx_tokens(result.final_program)
    assert result.ledger.total() <= (k + 5) * n_tokens
    if k == 1:
        assert result.ledger.total() <= 5 * n_tokens


# ---- leaf and retry behavior -------------------------------------------------


def leaf_task() -> TaskRecord:
    prompt = 'def solo(x: int) -> int:\n    """Scale x by five."""\n    raise NotImplementedError()'
    return TaskRecord(id="leaf", io_mode="functional", entry_name="solo", prompt=prompt)


LEAF_IMPL = 'def solo(x: int) -> int:\n    """Scale x by five."""\n    return x * 5'


def seed_leaf(writer, task, k: int = 1) -> None:
    stub = task.entry_unit()
    divide_req = render_prompt(
        "divide",
        {"prev_code": stub.render(as_stub=True), "cur_func_name": "solo", "cur_func_doc": stub.docstring},
    )
    writer.add(divide_req, [f"```python\n{LEAF_IMPL}\n```"])
    conquer_req = render_prompt(
        "conquer",
        {"prev_code": stub.render(as_stub=True), "cur_func_name": "solo", "cur_func_doc": stub.docstring},
    )
    writer.add(conquer_req, [f"```python\n{LEAF_IMPL}\n```"] * max(1, k - 1))


def test_leaf_task_k1_one_divide_one_conquer(transcript, executor):
    writer, gateway = transcript
    task = leaf_task()
    seed_leaf(writer, task)
    solver = make_solver(gateway(), executor, k=1)
    result = solver.solve(task)
    assert llm_calls(result.trace) == [("divide", "solo"), ("conquer", "solo")]
    assert len(result.tree.nodes) == 1


def test_divide_circular_stub_retried_then_partial(transcript, executor):
    writer, gateway = transcript
    task = leaf_task()
    stub = task.entry_unit()
    # divide(solo) declares a child g
    impl_with_child = (
        'def solo(x: int) -> int:\n    """Scale x by five."""\n    return g(x) * 5\n\n'
        'def g(x: int) -> int:\n    """inner."""\n    raise NotImplementedError()'
    )
    divide_req = render_prompt(
        "divide",
        {"prev_code": stub.render(as_stub=True), "cur_func_name": "solo", "cur_func_doc": stub.docstring},
    )
    writer.add(divide_req, [f"```python\n{impl_with_child}\n```"])
    # divide(g) insists on a stub named solo -> circular, three failures
    from functree.tree import DIVIDED, FunctionTree

    probe = FunctionTree.new(stub)
    probe.set_unit("solo", parse_completion(f"```python\n{impl_with_child}\n```").units[0])
    probe.mark("solo", DIVIDED)
    g_stub = parse_completion(f"```python\n{impl_with_child}\n```").units[1]
    probe.add_child("solo", g_stub)
    g_context = probe.render_context("g", "divide-context")
    bad_completion = (
        "```python\n"
        'def g(x: int) -> int:\n    """inner."""\n    return solo(x) - x\n\n'
        'def solo(x: int) -> int:\n    """Scale x by five."""\n    raise NotImplementedError()\n'
        "```"
    )
    g_req = render_prompt(
        "divide", {"prev_code": g_context, "cur_func_name": "g", "cur_func_doc": g_stub.docstring}
    )
    writer.add(g_req, [bad_completion] * 3)
    # conquer for g and solo (k=1 rewrites adopt as-is)
    g_conquer = render_prompt(
        "conquer", {"prev_code": probe.render_context("g", "conquer-context"), "cur_func_name": "g", "cur_func_doc": g_stub.docstring}
    )
    writer.add(g_conquer, ['```python\ndef g(x: int) -> int:\n    """inner."""\n    return solo(x) - x\n```'])
    probe.set_unit("g", parse_completion(bad_completion).units[0])
    probe.mark("g", CONQUERED)
    solo_conquer = render_prompt(
        "conquer",
        {"prev_code": probe.render_context("solo", "conquer-context"), "cur_func_name": "solo", "cur_func_doc": stub.docstring},
    )
    writer.add(solo_conquer, [f"```python\n{impl_with_child.split(chr(10) * 2)[0]}\n```"])

    solver = make_solver(gateway(), executor, k=1)
    result = solver.solve(task)
    retries = [e for e in result.trace if e["event"] == "divide_retry" and e["node"] == "g"]
    assert len(retries) == 3
    assert any(e["event"] == "divide_failed" and e["node"] == "g" for e in result.trace)
    # partial implementation of g was kept; the circular stub added no node
    assert "return solo(x) - x" in result.tree.nodes["g"].body
    assert result.tree.children["g"] == []
    ast.parse(result.final_program)


def test_max_depth_monolithic_retry_and_inlining(transcript, executor):
    writer, gateway = transcript
    task = leaf_task()
    stub = task.entry_unit()
    impl_with_child = (
        'def solo(x: int) -> int:\n    """Scale x by five."""\n    return mid(x) * 5\n\n'
        'def mid(x: int) -> int:\n    """middle layer."""\n    raise NotImplementedError()'
    )
    divide_req = render_prompt(
        "divide",
        {"prev_code": stub.render(as_stub=True), "cur_func_name": "solo", "cur_func_doc": stub.docstring},
    )
    writer.add(divide_req, [f"```python\n{impl_with_child}\n```"])

    from functree.tree import DIVIDED, FunctionTree

    probe = FunctionTree.new(stub, max_depth=2)
    units = parse_completion(f"```python\n{impl_with_child}\n```").units
    probe.set_unit("solo", units[0])
    probe.mark("solo", DIVIDED)
    probe.add_child("solo", units[1])
    mid_context = probe.render_context("mid", "divide-context")
    stubborn = (
        "```python\n"
        'def mid(x: int) -> int:\n    """middle layer."""\n    return deep(x) + 1\n\n'
        'def deep(x: int) -> int:\n    """too deep."""\n    raise NotImplementedError()\n'
        "```"
    )
    base_req = render_prompt(
        "divide", {"prev_code": mid_context, "cur_func_name": "mid", "cur_func_doc": units[1].docstring}
    )
    writer.add(base_req, [stubborn])
    constrained = render_prompt(
        "divide", {"prev_code": mid_context, "cur_func_name": "mid", "cur_func_doc": units[1].docstring}
    )
    role, content = constrained.messages[-1]
    constrained.messages[-1] = (role, content + _MONOLITH_NOTE.format(name="mid"))
    writer.add(constrained, [stubborn, stubborn], offset=1)

    # one-pass keeps divide-stage bodies, exposing the fallback inlining
    solver = make_solver(gateway(), executor, method="one-pass", k=1, max_depth=2)
    result = solver.solve(task)
    assert "deep" not in result.tree.nodes
    assert max(result.tree.depth.values()) <= 2
    mid_unit = result.tree.nodes["mid"]
    # the undeclarable stub was inlined as a nested not-implemented function
    assert "def deep" in mid_unit.body and "NotImplementedError" in mid_unit.body
    ast.parse(result.final_program)


# ---- ablation modes -----------------------------------------------------------


def test_one_pass_has_no_conquer_calls(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=1)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)), executor, method="one-pass", k=1
    )
    result = solver.solve(fixture.task)
    stages = [stage for stage, _ in llm_calls(result.trace)]
    assert "conquer" not in stages
    assert stages.count("divide") == 5
    assert conquer_order(result.trace) == []


def test_two_pass_conquers_without_ranker(tmp_path, executor):
    fixture = build_walkthrough(tmp_path, k=1)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)), executor, method="two-pass", k=1
    )
    result = solver.solve(fixture.task)
    stages = [stage for stage, _ in llm_calls(result.trace)]
    assert stages.count("conquer") == 5
    assert not [e for e in result.trace if e["event"] == "rank"]


@pytest.mark.parametrize("k", [5, 11])
def test_two_pass_clustering_pools_of_k(tmp_path, executor, k):
    fixture = build_walkthrough(tmp_path, k=k)
    from functree.gateway import LlmGateway, MockBackend

    solver = make_solver(
        LlmGateway(MockBackend(fixture.transcript_path)),
        executor,
        method="full",
        ranker="clustering",
        k=k,
    )
    result = solver.solve(fixture.task)
    pools = [e["pool"] for e in result.trace if e["event"] == "conquer"]
    assert pools == [k] * 5
    ranks = [e["report"]["ranker"] for e in result.trace if e["event"] == "rank"]
    assert ranks == ["clustering"] * 5


def test_redeclared_sibling_newest_definition_wins(transcript, executor):
    writer, gateway = transcript
    prompt = 'def top(x: int) -> int:\n    """Pipe x through both helpers."""\n    raise NotImplementedError()'
    task = TaskRecord(id="redecl", io_mode="functional", entry_name="top", prompt=prompt)
    stub = task.entry_unit()

    top_impl = 'def top(x: int) -> int:\n    """Pipe x through both helpers."""\n    return g(x) + h(x)'
    g_stub = 'def g(x: int) -> int:\n    """first helper."""\n    raise NotImplementedError()'
    h_stub = 'def h(x: int) -> int:\n    """second helper."""\n    raise NotImplementedError()'
    g_first = 'def g(x: int) -> int:\n    """first helper."""\n    return x + 1'
    g_newer = 'def g(x: int) -> int:\n    """first helper."""\n    return x + 100'
    h_impl = 'def h(x: int) -> int:\n    """second helper."""\n    return g(x) * 2'

    from functree.tree import DIVIDED, FunctionTree

    probe = FunctionTree.new(stub)

    def divide_req(node, context, doc):
        return render_prompt(
            "divide", {"prev_code": context, "cur_func_name": node, "cur_func_doc": doc}
        )

    def conquer_req(node, context, doc):
        return render_prompt(
            "conquer", {"prev_code": context, "cur_func_name": node, "cur_func_doc": doc}
        )

    writer.add(
        divide_req("top", probe.render_context("top", "divide-context"), stub.docstring),
        [f"```python\n{top_impl}\n\n{g_stub}\n\n{h_stub}\n```"],
    )
    units = parse_completion(f"```python\n{top_impl}\n\n{g_stub}\n\n{h_stub}\n```").units
    probe.set_unit("top", units[0])
    probe.mark("top", DIVIDED)
    probe.add_child("top", units[1])
    probe.add_child("top", units[2])

    writer.add(
        divide_req("g", probe.render_context("g", "divide-context"), "first helper."),
        [f"```python\n{g_first}\n```"],
    )
    probe.set_unit("g", parse_completion(f"```python\n{g_first}\n```").units[0])
    probe.mark("g", DIVIDED)
    writer.add(
        conquer_req("g", probe.render_context("g", "conquer-context"), "first helper."),
        [f"```python\n{g_first}\n```"],
    )
    probe.mark("g", CONQUERED)

    # h's divide re-declares g, implemented, with a different body
    writer.add(
        divide_req("h", probe.render_context("h", "divide-context"), "second helper."),
        [f"```python\n{h_impl}\n\n{g_newer}\n```"],
    )
    probe.set_unit("h", parse_completion(f"```python\n{h_impl}\n```").units[0])
    probe.mark("h", DIVIDED)
    newer_unit = parse_completion(f"```python\n{g_newer}\n```").units[0]
    probe.set_unit("g", newer_unit)
    probe.add_child("h", newer_unit)  # dedup edge, mirrors the engine
    writer.add(
        conquer_req("h", probe.render_context("h", "conquer-context"), "second helper."),
        [f"```python\n{h_impl}\n```"],
    )
    probe.mark("h", CONQUERED)
    writer.add(
        conquer_req("top", probe.render_context("top", "conquer-context"), stub.docstring),
        [f"```python\n{top_impl}\n```"],
    )

    solver = make_solver(gateway(), executor, k=1)
    result = solver.solve(task)
    divide_events = [e for e in result.trace if e["event"] == "divide" and e["node"] == "h"]
    assert divide_events[0]["redeclared"] == ["g"]
    assert "return x + 100" in result.final_program
    assert "return x + 1\n" not in result.final_program
    assert result.final_program.count("def g(") == 1
    assert result.tree.children["h"] == ["g"]


def test_config_validation():
    with pytest.raises(ConfigError):
        SolveConfig(method="full", ranker="none")
    with pytest.raises(ConfigError):
        SolveConfig(k=0)
    with pytest.raises(ConfigError):
        SolveConfig(method="mystery")


# ---- standard prompting ---------------------------------------------------------


def standard_task() -> TaskRecord:
    prompt = (
        "def sum_factor(a: int, b: int) -> int:\n"
        '    """Return the sum of all common prime factors of $a$ and $b$"""\n'
        "    raise NotImplementedError()"
    )
    return TaskRecord(id="std", io_mode="functional", entry_name="sum_factor", prompt=prompt)


def standard_request(task: TaskRecord):
    stub = task.entry_unit()
    return render_prompt(
        "standard", {"cur_func_name": "sum_factor", "cur_func": stub.render(as_stub=True)}
    )


def test_standard_adopts_whole_block(transcript, executor):
    writer, gateway = transcript
    task = standard_task()
    writer.add(standard_request(task), [TEMPLATES["standard"].shots[0][1]])
    result = standard_solve(task, gateway())
    functions = [
        node.name for node in ast.parse(result.final_program).body if isinstance(node, ast.FunctionDef)
    ]
    assert sorted(functions) == ["get_common", "is_prime", "prime_factor", "sum_factor"]
    assert llm_calls(result.trace) == [("standard", "sum_factor")]


def test_standard_retries_empty_then_fails(transcript, executor):
    writer, gateway = transcript
    task = standard_task()
    writer.add(standard_request(task), ["", "", ""])
    with pytest.raises(NoCodeBlock):
        standard_solve(task, gateway())


def test_standard_prose_with_block_takes_block(transcript, executor):
    writer, gateway = transcript
    task = standard_task()
    text = (
        "Sure! Here you go.\n\n```python\n"
        "def sum_factor(a: int, b: int) -> int:\n    return 0\n```\nHope that helps!"
    )
    writer.add(standard_request(task), [text])
    result = standard_solve(task, gateway())
    assert "Hope that helps" not in result.final_program
    assert "return 0" in result.final_program
