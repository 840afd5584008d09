from __future__ import annotations

import pytest

from functree.errors import MissingCurrentFunction, NoCodeBlock, NoValidFunction
from functree.funcs import (
    FunctionUnit,
    build_call_edges,
    extract_divide_result,
    parse_completion,
)

DIVIDE_EXAMPLE = '''\
First, I need to get the prime factors of $a$ and $b$.
Here is the `sum_common_factors` function:

```python
def sum_common_factors(a: int, b: int) -> int:
    """Compute the sum of all common prime factors of $a$ and $b$"""
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)

def prime_factor(x: int) -> list:
    """get a list of prime factors of number $x$"""
    raise NotImplementedError()

def get_common(a: list, b: list) -> list:
    """get common element in two list $a$ and $b$"""
    raise NotImplementedError()
```
'''


def test_parse_divide_example_yields_three_units_two_stubs():
    parsed = parse_completion(DIVIDE_EXAMPLE)
    assert [u.name for u in parsed.units] == ["sum_common_factors", "prime_factor", "get_common"]
    assert [u.is_stub for u in parsed.units] == [False, True, True]


def test_parse_prose_only_raises_no_code_block():
    with pytest.raises(NoCodeBlock):
        parse_completion("I am sorry, I cannot help with that request.")


def test_parse_skips_invalid_first_block():
    text = (
        "```python\ndef broken(:\n```\n\n"
        "```python\ndef ok(x):\n    return x\n```\n"
    )
    parsed = parse_completion(text)
    assert [u.name for u in parsed.units] == ["ok"]
    assert len(parsed.code_blocks) == 2


def test_parse_block_without_functions_raises_no_valid_function():
    with pytest.raises(NoValidFunction):
        parse_completion("```python\nx = 1 + 1\n```")


def test_parse_bare_code_without_fence():
    parsed = parse_completion("def f(x):\n    return x * 2\n")
    assert parsed.units[0].name == "f"


def test_imports_hoisted_to_units_and_free_imports():
    text = "```python\nimport math\nfrom typing import List\n\ndef f(x):\n    return math.sqrt(x)\n```"
    parsed = parse_completion(text)
    assert parsed.free_imports == ["import math", "from typing import List"]
    assert parsed.units[0].imports == parsed.free_imports


@pytest.mark.parametrize(
    "body",
    ["raise NotImplementedError()", "raise NotImplementedError('todo')", "pass", "..."],
)
def test_stub_markers(body):
    parsed = parse_completion(f"```python\ndef f(x):\n    {body}\n```")
    assert parsed.units[0].is_stub


def test_docstring_only_function_is_stub():
    parsed = parse_completion('```python\ndef f(x):\n    """doc"""\n```')
    unit = parsed.units[0]
    assert unit.is_stub and unit.docstring == "doc"


def test_extract_divide_result_splits_current_and_stubs():
    parsed = parse_completion(DIVIDE_EXAMPLE)
    current, rest = extract_divide_result(parsed, "sum_common_factors")
    assert current.name == "sum_common_factors" and not current.is_stub
    assert [u.name for u in rest] == ["prime_factor", "get_common"]


def test_extract_divide_result_leaf_case():
    parsed = parse_completion("```python\ndef leaf(x):\n    return x\n```")
    current, rest = extract_divide_result(parsed, "leaf")
    assert current.name == "leaf" and rest == []


def test_extract_divide_result_rejects_stub_current():
    parsed = parse_completion("```python\ndef f(x):\n    raise NotImplementedError()\n```")
    with pytest.raises(MissingCurrentFunction):
        extract_divide_result(parsed, "f")


def test_extract_keeps_implemented_siblings():
    text = "```python\ndef f(x):\n    return g(x)\n\ndef g(x):\n    return x + 1\n```"
    current, rest = extract_divide_result(parse_completion(text), "f")
    assert [u.name for u in rest] == ["g"]
    assert not rest[0].is_stub


def test_build_call_edges_matches_known_names():
    parsed = parse_completion(DIVIDE_EXAMPLE)
    current, _ = extract_divide_result(parsed, "sum_common_factors")
    edges = build_call_edges(current, {"prime_factor", "get_common", "is_prime"})
    assert edges == {"prime_factor", "get_common"}


def test_build_call_edges_excludes_self_and_unknown():
    parsed = parse_completion(
        "```python\ndef f(x):\n    if x:\n        return f(x - 1) + mystery(x)\n    return 0\n```"
    )
    assert build_call_edges(parsed.units[0], {"f"}) == set()


def test_build_call_edges_no_calls():
    parsed = parse_completion("```python\ndef f(x):\n    return x\n```")
    assert build_call_edges(parsed.units[0], {"g"}) == set()


@pytest.mark.parametrize(
    "source",
    [
        "def f(x: int) -> int:\n    return x + 1",
        'def g(a, b=2, *args, **kwargs):\n    """doc with $math$"""\n    return a',
        "async def h() -> None:\n    pass",
        "def k(x):\n    raise NotImplementedError()",
    ],
)
def test_render_parse_round_trip_preserves_identity(source):
    first = parse_completion(f"```python\n{source}\n```").units[0]
    second = parse_completion(f"```python\n{first.render()}\n```").units[0]
    assert (second.name, second.header, second.is_stub) == (
        first.name,
        first.header,
        first.is_stub,
    )


def test_latex_docstring_renders_verbatim_as_raw_string():
    problem = "What is $\\frac{1}{2}$ of the sum $27a\\equiv 17 \\pmod{40}$?"
    unit = FunctionUnit(name="solution", header="def solution():", docstring=problem)
    rendered = unit.render(as_stub=True)
    assert 'r"""What is $\\frac{1}{2}$' in rendered
    reparsed = parse_completion(f"```python\n{rendered}\n```").units[0]
    assert reparsed.docstring == problem


def test_docstring_with_embedded_triple_quotes_still_parses():
    unit = FunctionUnit(name="f", header="def f():", docstring='has """ inside')
    reparsed = parse_completion(f"```python\n{unit.render()}\n```").units[0]
    assert reparsed.name == "f" and reparsed.is_stub


def test_render_stub_mode_forces_marker():
    unit = FunctionUnit(name="f", header="def f(x):", docstring="doc", body="return x", is_stub=False)
    rendered = unit.render(as_stub=True)
    assert "raise NotImplementedError()" in rendered and "return x" not in rendered
