"""Refine the case-study sum one stage at a time, as in an interactive session.

Starts from the stage-1 problem and adds the constraints each later stage
introduces, re-running the verdict after every step.  The session script is
built from the bundled stage files, then fed to the REPL.

    python demos/staircase.py
"""

from __future__ import annotations

import io
import sys
from importlib import resources

from dyadsum.cli import main
from dyadsum.dsl import format_constraint, parse_problem


def stage(k: int):
    text = (resources.files("dyadsum") / "data" / f"stage{k}.dsum").read_text(encoding="utf-8")
    return parse_problem(text)


def session() -> str:
    lines = ["run"]
    prev = stage(1)
    for k in (2, 3, 4):
        cur = stage(k)
        lines += [f"add where {format_constraint(c)}" for c in cur.constraints[len(prev.constraints):]]
        lines.append("run")
        prev = cur
    lines.append("history")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    code = main(["repl", "stage1"], io.StringIO(session()), sys.stdout)
    print(f"exit code {code}")
