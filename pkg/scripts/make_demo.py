#!/usr/bin/env python3
"""Write a tiny offline demo: one problem plus a mock transcript that covers
a full divide/conquer solve at k=1 and a standard-prompting solve.

Usage: python3 scripts/make_demo.py [demo_dir]
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from functree.bench import TaskRecord
from functree.gateway import TranscriptWriter
from functree.prompts import render_prompt

PROMPT = (
    "def running_peak(values: list) -> list:\n"
    '    """Return the running maximum of a list of numbers."""\n'
    "    raise NotImplementedError()"
)

IMPL = (
    "def running_peak(values: list) -> list:\n"
    '    """Return the running maximum of a list of numbers."""\n'
    "    peaks = []\n"
    "    best = None\n"
    "    for value in values:\n"
    "        if best is None or value > best:\n"
    "            best = value\n"
    "        peaks.append(best)\n"
    "    return peaks"
)


def main() -> None:
    demo_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo")
    demo_dir.mkdir(parents=True, exist_ok=True)

    task = TaskRecord(
        id="demo/running-peak",
        io_mode="functional",
        entry_name="running_peak",
        prompt=PROMPT,
        system_tests=[
            {"kind": "assert", "expr": "running_peak([3, 1, 4, 1, 5]) == [3, 3, 4, 4, 5]"},
            {"kind": "assert", "expr": "running_peak([]) == []"},
        ],
    )
    (demo_dir / "problem.json").write_text(json.dumps(task.to_json(), indent=2))

    writer = TranscriptWriter(demo_dir / "transcript.jsonl")
    stub = task.entry_unit()
    completion = f"Here is the implementation:\n\n```python\n{IMPL}\n```"
    divide = render_prompt(
        "divide",
        {
            "prev_code": stub.render(as_stub=True),
            "cur_func_name": task.entry_name,
            "cur_func_doc": stub.docstring,
        },
    )
    writer.add(divide, [completion])
    conquer = render_prompt(
        "conquer",
        {
            "prev_code": stub.render(as_stub=True),
            "cur_func_name": task.entry_name,
            "cur_func_doc": stub.docstring,
        },
    )
    writer.add(conquer, [completion])
    standard = render_prompt(
        "standard",
        {"cur_func_name": task.entry_name, "cur_func": stub.render(as_stub=True)},
    )
    writer.add(standard, [completion])

    print(f"wrote {demo_dir}/problem.json and {demo_dir}/transcript.jsonl")
    print("try:")
    print(f"  functree solve {demo_dir}/problem.json --mock {demo_dir}/transcript.jsonl --k 1 --out {demo_dir}/out")


if __name__ == "__main__":
    main()
