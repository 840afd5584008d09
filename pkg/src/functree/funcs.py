"""Parse model completions into function units.

All knowledge of the target code language (Python) lives in this module and
in :mod:`functree.tree`; the rest of the package treats function sources as
opaque text.
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field

from .errors import MissingCurrentFunction, NoCodeBlock, NoValidFunction

STUB_MARKER = "raise NotImplementedError()"

_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)


@dataclass
class FunctionUnit:
    """One function extracted from a completion: header, docstring and body.

    ``header`` is canonical (one line, ``def name(args) -> ret:``), ``body``
    is dedented source without the docstring.
    """

    name: str
    header: str
    docstring: str = ""
    body: str = STUB_MARKER
    is_stub: bool = True
    imports: list[str] = field(default_factory=list)

    def render(self, as_stub: bool = False) -> str:
        """Source text for this unit; ``as_stub`` forces a stub body."""
        lines = [self.header]
        if self.docstring:
            lines.append(_indent(_docstring_block(self.docstring)))
        body = STUB_MARKER if (as_stub or self.is_stub) else self.body
        lines.append(_indent(body))
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "header": self.header,
            "docstring": self.docstring,
            "body": self.body,
            "is_stub": self.is_stub,
            "imports": list(self.imports),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FunctionUnit":
        return cls(
            name=doc["name"],
            header=doc["header"],
            docstring=doc.get("docstring", ""),
            body=doc.get("body", STUB_MARKER),
            is_stub=doc.get("is_stub", True),
            imports=list(doc.get("imports", [])),
        )


@dataclass
class ParsedCompletion:
    """Functions and imports extracted from one model completion."""

    code_blocks: list[str]
    units: list[FunctionUnit]
    free_imports: list[str]


def _indent(text: str, prefix: str = "    ") -> str:
    return "\n".join(prefix + line if line.strip() else line for line in text.split("\n"))


def _docstring_block(text: str) -> str:
    # Prefer verbatim emission (raw string when backslashes are present, as
    # LaTeX-heavy problem statements need); escape only when the text itself
    # would break the quoting.
    if '"""' not in text and not text.endswith(('"', "\\")):
        prefix = "r" if "\\" in text else ""
        return f'{prefix}"""{text}"""'
    safe = text.replace("\\", "\\\\").replace('"""', '\\"\\"\\"')
    if safe.endswith('"'):
        safe += " "
    return f'"""{safe}"""'


def _canonical_header(node: ast.FunctionDef | ast.AsyncFunctionDef) -> str:
    prefix = "async def" if isinstance(node, ast.AsyncFunctionDef) else "def"
    args = ast.unparse(node.args)
    returns = f" -> {ast.unparse(node.returns)}" if node.returns is not None else ""
    return f"{prefix} {node.name}({args}){returns}:"


def _is_stub_stmt(stmt: ast.stmt) -> bool:
    if isinstance(stmt, ast.Pass):
        return True
    if isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Constant):
        return stmt.value.value is Ellipsis
    if isinstance(stmt, ast.Raise) and stmt.exc is not None:
        exc = stmt.exc
        name = exc.func if isinstance(exc, ast.Call) else exc
        return isinstance(name, ast.Name) and name.id in ("NotImplementedError", "NotImplemented")
    return False


def unit_from_ast(node: ast.FunctionDef | ast.AsyncFunctionDef, imports: list[str] | None = None) -> FunctionUnit:
    """Build a canonical FunctionUnit from a parsed function definition.

    Docstrings are stored cleaned (dedented) so render/parse is idempotent.
    """
    docstring = ast.get_docstring(node, clean=True) or ""
    body_stmts = list(node.body)
    if (
        body_stmts
        and isinstance(body_stmts[0], ast.Expr)
        and isinstance(body_stmts[0].value, ast.Constant)
        and isinstance(body_stmts[0].value.value, str)
    ):
        body_stmts = body_stmts[1:]
    is_stub = not body_stmts or (len(body_stmts) == 1 and _is_stub_stmt(body_stmts[0]))
    if is_stub:
        body = STUB_MARKER
    else:
        body = "\n".join(ast.unparse(stmt) for stmt in body_stmts)
    return FunctionUnit(
        name=node.name,
        header=_canonical_header(node),
        docstring=docstring,
        body=body,
        is_stub=is_stub,
        imports=list(imports or []),
    )


def _extract_from_source(source: str) -> tuple[list[FunctionUnit], list[str]] | None:
    """Top-level functions and imports of ``source``, or None if unparseable."""
    try:
        module = ast.parse(source)
    except SyntaxError:
        return None
    imports = [
        ast.unparse(stmt)
        for stmt in module.body
        if isinstance(stmt, (ast.Import, ast.ImportFrom))
    ]
    funcs = [stmt for stmt in module.body if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if not funcs:
        return None
    return [unit_from_ast(node, imports) for node in funcs], imports


def parse_completion(text: str) -> ParsedCompletion:
    """Extract function units from the first usable code block of ``text``.

    Raises NoCodeBlock when no fenced block exists (and the completion is not
    bare code), NoValidFunction when blocks exist but none parses to at least
    one top-level function. Both signal a retry to the caller.
    """
    blocks = [match.group(2) for match in _FENCE_RE.finditer(text)]
    candidates = blocks if blocks else [text]
    for block in candidates:
        extracted = _extract_from_source(block)
        if extracted is not None:
            units, imports = extracted
            return ParsedCompletion(code_blocks=blocks, units=units, free_imports=imports)
    if not blocks:
        raise NoCodeBlock("completion contains no code block")
    raise NoValidFunction("no code block parses to a top-level function")


def extract_divide_result(
    parsed: ParsedCompletion, current_name: str
) -> tuple[FunctionUnit, list[FunctionUnit]]:
    """Split a divide completion into the implemented current function and the rest.

    Non-stub siblings are kept: they count as already-implemented children.
    """
    current = None
    rest: list[FunctionUnit] = []
    for unit in parsed.units:
        if unit.name == current_name and not unit.is_stub and current is None:
            current = unit
        else:
            rest.append(unit)
    if current is None:
        raise MissingCurrentFunction(f"no implementation of {current_name!r} in completion")
    return current, rest


def build_call_edges(unit: FunctionUnit, known_names: set[str]) -> set[str]:
    """Names from ``known_names`` that appear as call targets in the unit body.

    Purely syntactic (no alias or dataflow analysis); self-recursion excluded.
    """
    try:
        module = ast.parse(unit.render())
    except SyntaxError:
        return set()
    called: set[str] = set()
    for node in ast.walk(module):
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            called.add(node.func.id)
    called.discard(unit.name)
    return called & known_names
