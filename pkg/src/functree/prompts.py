"""Prompt templates and rendering.

Each template is a system message, a fixed list of few-shot (user, assistant)
pairs, and a final user turn with named slots. Slot substitution is explicit
(only declared slot markers are replaced) because the templates themselves
contain literal braces in code.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MissingSlot
from .gateway import ChatRequest, approx_tokens

_SLOT_RE = re.compile(r"\{(prev_code|cur_func|cur_func_name|cur_func_doc|ground_truth|model_output)\}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    system: str
    shots: tuple[tuple[str, str], ...]
    user: str
    slots: tuple[str, ...]
    temperature: float


_STANDARD_SYSTEM = """\
You are a programming copilot, you can solve a problem by writing Python functions. Your task is to:

  - You need to write a Python function that returns the answer.
  - You can import libraries to better solve the problem.
  - Do not write any code outside the function (importing is accepted)."""

_STANDARD_SHOT_USER = """\
Let's think step by step and complete the following Python function `sum_factor` that solves:

```python
def sum_factor(a: int, b: int) -> int:
    \"\"\"Return the sum of all common prime factors of $a$ and $b$\"\"\"

    raise NotImplementedError()
```"""

_STANDARD_SHOT_ASSISTANT = """\
First, I need to get the prime factors of $a$ and $b$.
Second, I can use `for` loop to find common element in two factors list.
Here is the `sum_factor` function:

```python
def sum_factor(a: int, b: int) -> int:
    \"\"\"Return the sum of all common prime factors of $a$ and $b$\"\"\"
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)

def prime_factor(x: int) -> list:
    \"\"\"get a list of prime factors of number $x$\"\"\"
    ret = []
    i = 1
    while i * i <= x:
        i += 1
        if x % i == 0:
            ret.append(i)
    return ret

def is_prime(x: int) -> bool:
    \"\"\"determine $x$ is a prime number or not\"\"\"
    if x < 2:
        return False
    for i in range(2, int(x**0.5) + 1):
        if x % i == 0:
            return False
    return True

def get_common(a: list, b: list) -> list:
    \"\"\"get common element in two list $a$ and $b$\"\"\"
    ret = []
    for item in a:
        if item in b:
            ret.append(item)
    return ret
```"""

_STANDARD_USER = """\
Let's think step by step and complete the following Python function `{cur_func_name}` that solves:

```python
{cur_func}
```"""

_DIVIDE_SYSTEM = """\
You are a programming copilot, you can solve a problem by writing Python functions. Your task is to:

  - For every turn, you need to write a Python function that returns the answer based on Current Code (not code in chat history).
  - Do not modify function name, arg names, docstring in given functions.
  - You can import libraries to better solve the problem.
  - If a single function is too hard to solve, you can decompose it into multiple smaller functions.
  - You can leave new function unimplemented for now, but write the function at the end of the code and comment what the function does.\""""

_DIVIDE_SHOT1_USER = """\
Current Code:
```python
def sum_common_factors(a: int, b: int) -> int:
    \"\"\"Compute the sum of all common prime factors of $a$ and $b$\"\"\"
    raise NotImplementedError()
```

Let's think step by step and complete the following Python function `sum_common_factors` that solves:
"Compute the sum of all common prime factors of $a$ and $b$\""""

_DIVIDE_SHOT1_ASSISTANT = """\
First, I need to get the prime factors of $a$ and $b$.
Second, I can use `for` loop to find common element in two factors list.
Finally, sum the common factor list and return the answer.
Here is the `sum_common_factors` function:

```python
def sum_common_factors(a: int, b: int) -> int:
    \"\"\"Compute the sum of all common prime factors of $a$ and $b$\"\"\"
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)

def prime_factor(x: int) -> list:
    \"\"\"get a list of prime factors of number $x$\"\"\"
    raise NotImplementedError()

def get_common(a: list, b: list) -> list:
    \"\"\"get common element in two list $a$ and $b$\"\"\"
    raise NotImplementedError()
```"""

_DIVIDE_SHOT2_USER = """\
Current Code:
```python
def sum_common_factors(a: int, b: int) -> int:
    \"\"\"Compute the sum of all common prime factors of $a$ and $b$\"\"\"
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)

def get_common(a: list, b: list) -> list:
    \"\"\"get common element in two list $a$ and $b$\"\"\"
    raise NotImplementedError()
```

Let's think step by step and complete the following Python function `get_common` that solves:
"get common element in two list $a$ and $b$\""""

_DIVIDE_SHOT2_ASSISTANT = """\
Here is the `get_common` function:

```python
def get_common(a: list, b: list) -> list:
    \"\"\"get common element in two list $a$ and $b$\"\"\"
    ret = []
    for item in a:
        if item in b:
            ret.append(item)
    return ret
```"""

_DIVIDE_USER = """\
Current Code:
```python
{prev_code}
```

Let's think step by step and complete the following Python function `{cur_func_name}` that solves:
"{cur_func_doc}\""""

_CONQUER_SYSTEM = """\
You are a programming copilot, you can solve a problem by writing Python functions. Your task is to:

  - For every turn, you need to write a Python function that returns the answer, based on current code (not code in chat history) and problem description.
  - Do not modify function name, arg names, docstring in given functions.
  - Consider reusing existing functions that are already implemented.
  - You can import libraries to better solve the problem."""

_CONQUER_SHOT_USER = """\
Current Code:

```python
def prime_factor(x: int) -> list:
    \"\"\"get a list of prime factors of number $x$\"\"\"
    ret = []
    i = 1
    while i * i <= x:
        i += 1
        if x % i == 0:
            ret.append(i)
    return ret

def is_prime(x: int) -> bool:
    \"\"\"determine $x$ is a prime number or not\"\"\"
    if x < 2:
        return False
    for i in range(2, int(x**0.5) + 1):
        if x % i == 0:
            return False
    return True

def get_common(a: list, b: list) -> list:
    \"\"\"get common element in two list $a$ and $b$\"\"\"
    ret = []
    for item in a:
        if item in b:
            ret.append(item)
    return ret

def sum_common_factors(a: int, b: int) -> int:
    \"\"\"Return the sum of all common prime factors of $a$ and $b$\"\"\"

    raise NotImplementedError()
```

Let's think step by step and implement the following method `sum_common_factors` using existing functions to solve:
"Return the sum of all common prime factors of $a$ and $b$\""""

_CONQUER_SHOT_ASSISTANT = """\
First, I need to get the prime factors of $a$ and $b$.
Second, I can use `for` loop to find common element in two factors list.
Finally, sum the common factor list and return the answer.
Here is the `sum_common_factors` function:

```python
def sum_common_factors(a: int, b: int) -> int:
    \"\"\"Compute the sum of all common prime factors of $a$ and $b$\"\"\"
    factors_a = prime_factor(a)
    factors_b = prime_factor(b)
    common_factors = get_common(factors_a, factors_b)
    return sum(common_factors)
```"""

_CONQUER_USER = """\
Current Code:

```python
{prev_code}
```

Let's think step by step and implement the following method `{cur_func_name}` using existing functions to solve:
"{cur_func_doc}\""""

_GEN_INPUT_SYSTEM = """\
You are a proficient software engineer and architect, specialized in testing, capable of observing and finding security holes and logical issues in code that spans across multiple computer science fields and mathematics. You are given a piece of Python function, and are expected to produce some function calls for that function. Specifically:

  - You should invoke the function in a one-liner fashion.
  - Do not bring in imports other than what's already imported. Use the pre-declared imports in the original function only.
  - The callee may have multiple arguments, treat them with care.
  - You **must** respect the function signature and docstring, and be aware so you don't generate illegal inputs.
  - Keep the inputs simple but general, and that either edge cases or common cases are meaningful.

Here follows a series of mutually uncorrelated functions to test, one per conversation."""

_GEN_INPUT_SHOT_USER = """\
Let's think step by step and create some tests for the following function `check_valid_brackets(...)` in Python.

```python
def check_valid_brackets(seq: str) -> bool:
    \"\"\"Determine if a bracket sequence consisting of '(', ')', '{', '}', '['
    and ']' is valid.\"\"\"

    mapping = {')': '(', '}': '{', ']': '['}
    stack = []
    for c in seq:
        if c in mapping:
            if not stack or stack[-1] != mapping[c]:
                return False
            stack.pop()
        else:
            stack.append(c)
    return not stack
```

Store your function calls for `check_valid_brackets(...)` as function callss, one per line. They will be called later."""

_GEN_INPUT_SHOT_ASSISTANT = """\
Sure, I can create some function calls for the `check_valid_brackets` function. We can either choose to test it with a valid bracket sequence or an invalid one. Empty strings are also considerable. Here are some function calls for the function:

```python
check_valid_brackets("()")  # True
check_valid_brackets("(([[]]))")  # True
check_valid_brackets("((())")  # False
check_valid_brackets("()[]{}")  # True
check_valid_brackets("([)]")  # False
check_valid_brackets("")  # True
check_valid_brackets(")(")  # False
```"""

_GEN_INPUT_USER = """\
Let's think step by step and create some tests for the following function `{cur_func_name}(...)` in Python.

```python
{prev_code}
```

Store your function calls for `{cur_func_name}(...)` as function callss, one per line. They will be called later."""

_SELF_TEST_SYSTEM = """\
You are a proficient software engineer and architect, specialized in testing, capable of observing and finding security holes and logical issues in code that spans across multiple computer science fields and mathematics. You are given a piece of Python function, and are expected to produce some test cases for that function. Specifically:

  - You should invoke the function and assert its results in a one-liner fashion.
  - Do not bring in imports other than what's already imported. Use the pre-declared imports in the original function only.
  - The callee may have multiple arguments, treat them with care.
  - You **must** respect the function signature and docstring, and be aware so you don't generate illegal inputs.
  - Keep the inputs & outputs simple but general, and that either edge cases or common cases are meaningful.

Here follows a series of mutually uncorrelated functions to test, one per conversation."""

_SELF_TEST_SHOT_USER = """\
Let's think step by step and create some tests for the following function `lcm(...)` in Python.

```python
def lcm(a: int, b: int) -> int:
    \"\"\"Find the least common multiple of `a` and `b`. Samples:

    >>> lcm(3, 5)
    15
    >>> lcm(4, 6)
    12
    \"\"\"

    return round(a * b / gcd(a, b))
```

Store your test cases for `lcm(...)` as assertions, one per line. They will be called later."""

_SELF_TEST_SHOT_ASSISTANT = """\
Sure, I can create some test cases for the `check_valid_brackets` function. We consider the following cases: 1. the two operands are not co-prime and has common factors; 2. the two operands are equal; 3. one of them is 1; 4. two of them is 1; 5. both operands are primes. Here is an example of these test cases in Python:

```python
assert lcm(15, 25) == 75
assert lcm(32, 32) == 32
assert lcm(1, 5) == 5
assert lcm(1, 1) == 1
assert lcm(17, 19) == 17 * 19
```"""

_SELF_TEST_USER = """\
Extract tests for the following function `{cur_func_name}(...)` in Python.

```python
{prev_code}
```

Store your test cases for `{cur_func_name}(...)` as assertions, one per line. They will be called later."""

_MATH_JUDGE_SYSTEM = r"""You are a mathematical teacher, your task is to:

    - Judge whether the prediction is matching the answer
    - Output "Judge: Correct." or "Judge: Wrong.", please do not output redundant words
    - Numerical errors should be ignored ($1$ is equal to $0.99999998$)
    - Some answer might be represent in latex format, and some might be float number, this should be consider as correct ($\frac{1}{2}$ is equal to $0.5$, $3$ $\sqrt{66}$ is equal to $24.37211$)
    - Unit in answer should be ignored, and should be consider as correct ($13 cm^2$ is equal to $13.0$, $\$13$ is equal to $13$)"""

_MATH_JUDGE_USER = """\
Now, the answer and prediction is:
Answer: {ground_truth}
Prediction: {model_output}
Please output "Judge: Correct." if two answers are literally the same, or "Judge: Wrong." for not same, please do not output redundant words."""


TEMPLATES: dict[str, PromptTemplate] = {
    t.id: t
    for t in (
        PromptTemplate(
            id="standard",
            system=_STANDARD_SYSTEM,
            shots=((_STANDARD_SHOT_USER, _STANDARD_SHOT_ASSISTANT),),
            user=_STANDARD_USER,
            slots=("cur_func_name", "cur_func"),
            temperature=0.3,
        ),
        PromptTemplate(
            id="divide",
            system=_DIVIDE_SYSTEM,
            shots=(
                (_DIVIDE_SHOT1_USER, _DIVIDE_SHOT1_ASSISTANT),
                (_DIVIDE_SHOT2_USER, _DIVIDE_SHOT2_ASSISTANT),
            ),
            user=_DIVIDE_USER,
            slots=("prev_code", "cur_func_name", "cur_func_doc"),
            temperature=0.2,
        ),
        PromptTemplate(
            id="conquer",
            system=_CONQUER_SYSTEM,
            shots=((_CONQUER_SHOT_USER, _CONQUER_SHOT_ASSISTANT),),
            user=_CONQUER_USER,
            slots=("prev_code", "cur_func_name", "cur_func_doc"),
            temperature=0.8,
        ),
        PromptTemplate(
            id="gen-input",
            system=_GEN_INPUT_SYSTEM,
            shots=((_GEN_INPUT_SHOT_USER, _GEN_INPUT_SHOT_ASSISTANT),),
            user=_GEN_INPUT_USER,
            slots=("cur_func_name", "prev_code"),
            temperature=0.8,
        ),
        PromptTemplate(
            id="self-test",
            system=_SELF_TEST_SYSTEM,
            shots=((_SELF_TEST_SHOT_USER, _SELF_TEST_SHOT_ASSISTANT),),
            user=_SELF_TEST_USER,
            slots=("cur_func_name", "prev_code"),
            temperature=0.8,
        ),
        PromptTemplate(
            id="math-judge",
            system=_MATH_JUDGE_SYSTEM,
            shots=(),
            user=_MATH_JUDGE_USER,
            slots=("ground_truth", "model_output"),
            temperature=0.0,
        ),
    )
}

_scaffold_cache: dict[str, int] = {}


def _substitute(text: str, slots: dict[str, str]) -> str:
    def repl(match: re.Match) -> str:
        name = match.group(1)
        if name not in slots:
            raise MissingSlot(f"slot {name!r} is required but was not provided")
        return slots[name]

    return _SLOT_RE.sub(repl, text)


def scaffold_tokens(template_id: str) -> int:
    """Approximate token size of a template's fixed part (empty slots)."""
    if template_id not in _scaffold_cache:
        template = TEMPLATES[template_id]
        empty = {name: "" for name in template.slots}
        fixed = [template.system]
        for shot_user, shot_assistant in template.shots:
            fixed.extend((shot_user, shot_assistant))
        fixed.append(_substitute(template.user, empty))
        _scaffold_cache[template_id] = sum(approx_tokens(part) for part in fixed)
    return _scaffold_cache[template_id]


def render_prompt(
    template_id: str,
    slots: dict[str, str],
    n_samples: int = 1,
    temperature: float | None = None,
    max_tokens: int | None = None,
) -> ChatRequest:
    """Build a ChatRequest for one of the known templates.

    Raises MissingSlot when a declared slot is absent from ``slots``.
    """
    if template_id not in TEMPLATES:
        raise KeyError(f"unknown template {template_id!r}")
    template = TEMPLATES[template_id]
    for name in template.slots:
        if name not in slots:
            raise MissingSlot(f"template {template_id!r} requires slot {name!r}")
    messages: list[tuple[str, str]] = [("system", template.system)]
    for shot_user, shot_assistant in template.shots:
        messages.append(("user", shot_user))
        messages.append(("assistant", shot_assistant))
    messages.append(("user", _substitute(template.user, slots)))
    return ChatRequest(
        messages=messages,
        temperature=template.temperature if temperature is None else temperature,
        n_samples=n_samples,
        max_tokens=max_tokens,
        scaffold_tokens=scaffold_tokens(template_id),
    )
