"""Command line: batch verification, the refinement REPL, and estimate sweeps.

Reports are plain text in which every line except the problem echo is a
``#`` comment, so a saved report is itself a valid problem file; running
``verify`` on it reproduces the report byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, TextIO, Union

from . import __version__
from .cases import (
    EstimateKind,
    SweepRow,
    Triple,
    VerifyResult,
    exact_exponent,
    rational_range,
    sweep,
    verify_estimate,
)
from .constraints import SlackConfig
from .dsl import DslError, format_constraint, format_problem, parse_constraint, parse_problem_file, parse_rational
from .engine import Classification, CostGuardError, EngineConfig, GrowthVerdict, Problem, verdict

__all__ = ["main", "render_report", "run_paper", "run_sweep", "run_verify", "Repl"]

EX_USAGE = 64
EX_DATAERR = 65
EX_NOINPUT = 66
EX_SOFTWARE = 70

CSV_HEADER = ["n", "s", "theta", "kind", "verdict", "exponent", "log_degree", "reference", "match"]


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- formatting


def fmt_q(x: Union[Fraction, int, float]) -> str:
    """Rationals as ``p/q`` (integers plain); non-finite floats as ``inf``/``-inf``/``nan``; other floats by repr."""
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        return str(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return repr(x)


def _fmt_exponent(v: GrowthVerdict) -> str:
    e = exact_exponent(v)
    if isinstance(e, Fraction):
        return f"{e} ({float(e):.6g})"
    return fmt_q(e)


def config_lines(config: EngineConfig, slack: SlackConfig) -> list[str]:
    """The configuration as ``set`` directives, in a fixed order."""
    return [
        f"set engine = {config.engine}",
        f"set ladder = {config.ladder[0]}:{config.ladder[1]}",
        f"set cutoff = {config.cutoff}",
        f"set tol = {config.tol}",
        f"set slack_sim = {slack.c_sim}",
        f"set slack_lesssim = {slack.c_lesssim}",
        f"set gap_ll = {slack.gap_ll}",
    ]


def echo(p: Problem, config: EngineConfig) -> str:
    """Problem text that, parsed with no flags, gives back ``p`` and ``config``."""
    body = format_problem(replace(p, slack=SlackConfig()))
    return body + "\n".join(config_lines(config, p.slack)) + "\n"


def verdict_lines(v: GrowthVerdict) -> list[str]:
    out = []
    if v.symbolic is not None:
        g = v.symbolic
        if g.divergent:
            out.append(f"symbolic: divergent at fixed parameter; {g.detail}")
        elif g.empty:
            out.append("symbolic: empty region")
        else:
            out.append(f"symbolic: exponent {g.exponent}, log degree {g.log_degree}")
            if g.detail:
                out.append(f"symbolic: dominant branch {g.detail}")
        out.append(f"branches: {g.branches}")
    if v.ladder is not None:
        lr = v.ladder
        out.append("ladder: kN sum")
        out += [f"ladder: {kn} {val!r}" for kn, val in lr.points]
        if lr.divergent_at:
            out.append(f"ladder: cutoff not converged at kN = {', '.join(map(str, lr.divergent_at))}")
        out.append(
            f"fit: exponent {lr.fitted_exponent!r}, log degree {lr.log_degree_estimate}, "
            f"quality {lr.fit_quality!r}"
        )
    out.append(f"classification: {v.classification.value}")
    out.append(f"exponent: {_fmt_exponent(v)}")
    out.append(f"log degree: {v.log_degree}")
    out.append(f"evidence: {v.evidence}")
    out += [f"note: {n}" for n in v.notes]
    return out


def render_report(
    p: Problem, config: EngineConfig, v: GrowthVerdict, history: Sequence[tuple[list[str], Classification]] = ()
) -> str:
    lines = [f"# dyadsum {__version__} report", "#"]
    body = echo(p, config)
    out = "\n".join(lines) + "\n" + body + "#\n"
    for i, (cs, cls) in enumerate(history, start=1):
        out += f"# stage {i}: {cls.value}\n"
        out += "".join(f"#   where {c}\n" for c in cs)
    out += "".join(f"# {l}\n" for l in verdict_lines(v))
    return out


def report_json(p: Problem, config: EngineConfig, v: GrowthVerdict, history=()) -> dict:
    g = v.symbolic
    lr = v.ladder
    e = exact_exponent(v)
    return {
        "version": __version__,
        "problem": format_problem(replace(p, slack=SlackConfig())),
        "config": {
            "engine": config.engine,
            "ladder": list(config.ladder),
            "cutoff": config.cutoff,
            "tol": fmt_q(config.tol),
            "slack_sim": p.slack.c_sim,
            "slack_lesssim": p.slack.c_lesssim,
            "gap_ll": p.slack.gap_ll,
        },
        "classification": v.classification.value,
        "exponent": fmt_q(e),
        "log_degree": v.log_degree,
        "evidence": v.evidence,
        "notes": list(v.notes),
        "symbolic": None if g is None else {
            "exponent": None if g.exponent is None else fmt_q(g.exponent),
            "log_degree": g.log_degree,
            "divergent": g.divergent,
            "empty": g.empty,
            "detail": g.detail,
            "branches": g.branches,
        },
        "ladder": None if lr is None else {
            "points": [[kn, val] for kn, val in lr.points],
            "fitted_exponent": lr.fitted_exponent,
            "log_degree_estimate": lr.log_degree_estimate,
            "fit_quality": lr.fit_quality,
            "divergent_at": list(lr.divergent_at),
        },
        "history": [{"constraints": cs, "classification": cls.value} for cs, cls in history],
    }


# --------------------------------------------------------------------------- configuration


def parse_ladder(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"ladder must be lo:hi, got {text!r}") from None
    return lo, hi


def build_config(settings: dict[str, str], args: argparse.Namespace, default_engine: str = "both"):
    """Defaults, then ``set`` lines from the file, then command-line flags."""
    vals = {"engine": default_engine, "ladder": "4:12", "cutoff": "64", "tol": "1/20",
            "slack_sim": "1", "slack_lesssim": "2", "gap_ll": "3"}
    vals.update(settings)
    for key in vals:
        flag = getattr(args, key, None)
        if flag is not None:
            vals[key] = str(flag)
    try:
        config = EngineConfig(
            ladder=parse_ladder(vals["ladder"]),
            cutoff=int(vals["cutoff"]),
            tol=parse_rational(vals["tol"]),
            engine=vals["engine"],
        )
        slack = SlackConfig(c_sim=int(vals["slack_sim"]), c_lesssim=int(vals["slack_lesssim"]),
                            gap_ll=int(vals["gap_ll"]))
    except (ValueError, DslError) as e:
        raise UsageError(str(e)) from None
    return config, slack


def read_problem_file(path: str):
    text = _read_text(path)
    return parse_problem_file(text)


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists() and not any(sep in path for sep in "/\\"):
        # bundled case-study files by name, e.g. ``stage4`` or ``stage4.dsum``
        name = path if path.endswith(".dsum") else path + ".dsum"
        res = resources.files("dyadsum") / "data" / name
        if res.is_file():
            return res.read_text(encoding="utf-8")
    return p.read_text(encoding="utf-8")


# --------------------------------------------------------------------------- commands


def run_verify(path: str, args: argparse.Namespace, out: TextIO) -> int:
    pf = read_problem_file(path)
    config, slack = build_config(pf.settings, args)
    p = pf.problem.with_slack(slack)
    v = verdict(p, config)
    out.write(render_report(p, config, v))
    if args.json:
        _write_json(args.json, report_json(p, config, v))
    return v.classification.exit_code


def _write_json(path: str, data: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


REPL_HELP = """commands:
  run                      classify the current problem (one stage)
  add where <constraint>   add a relation
  drop <k>                 remove relation k (numbered as in show)
  show                     print the current problem
  history                  list the stages run so far
  save <path>              write the final report with the stage history
  help                     this text
  quit                     leave the session
"""


@dataclass
class Repl:
    """Step-by-step refinement of one Problem.

    Commands: ``run``, ``add where <constraint>``, ``drop <k>``, ``show``,
    ``history``, ``save <path>``, ``help``, ``quit``.
    """

    problem: Problem
    config: EngineConfig
    out: TextIO
    stages: list[tuple[list[str], Classification]] = field(default_factory=list)
    last: Optional[GrowthVerdict] = None

    def constraint_texts(self) -> list[str]:
        return [format_constraint(c) for c in self.problem.constraints]

    def handle(self, line: str) -> bool:
        """Run one command; returns False on ``quit``.  Errors leave the state unchanged."""
        words = line.split(None, 1)
        if not words or words[0].startswith("#"):
            return True
        cmd, rest = words[0], (words[1] if len(words) > 1 else "")
        try:
            if cmd == "run":
                self.run()
            elif cmd == "add":
                self.add(rest)
            elif cmd == "drop":
                self.drop(rest)
            elif cmd == "show":
                self.out.write(echo(self.problem, self.config))
            elif cmd == "history":
                self.history()
            elif cmd == "save":
                self.save(rest.strip())
            elif cmd == "help":
                self.out.write(REPL_HELP)
            elif cmd in ("quit", "exit"):
                return False
            else:
                raise UsageError(f"unknown command {cmd!r} (try 'help')")
        except (UsageError, DslError, ValueError, OSError, CostGuardError) as e:
            self.out.write(f"error: {e}\n")
        return True

    def run(self) -> None:
        v = verdict(self.problem, self.config)
        self.last = v
        self.stages.append((self.constraint_texts(), v.classification))
        self.out.write(f"stage {len(self.stages)}: {v.classification.value}, exponent {_fmt_exponent(v)}, "
                       f"{v.evidence}\n")
        for n in v.notes:
            self.out.write(f"  note: {n}\n")

    def add(self, rest: str) -> None:
        head, _, text = rest.partition(" ")
        if head != "where" or not text.strip():
            raise UsageError("expected 'add where <constraint>'")
        names = [v.name for v in self.problem.variables] + [self.problem.param.name]
        c = parse_constraint(text, names)
        self.problem = self.problem.with_constraints(self.problem.constraints + (c,))
        self.out.write(f"added [{len(self.problem.constraints)}] {format_constraint(c)}\n")

    def drop(self, rest: str) -> None:
        try:
            k = int(rest)
        except ValueError:
            raise UsageError("expected 'drop <k>' with k a constraint number from 'show'") from None
        cs = list(self.problem.constraints)
        if not 1 <= k <= len(cs):
            raise UsageError(f"no constraint {k}; there are {len(cs)}")
        removed = cs.pop(k - 1)
        # raises (leaving the state alone) if the parameter would no longer appear
        self.problem = self.problem.with_constraints(tuple(cs))
        self.out.write(f"dropped {format_constraint(removed)}\n")

    def history(self) -> None:
        if not self.stages:
            self.out.write("no stages yet\n")
        for i, (cs, cls) in enumerate(self.stages, start=1):
            self.out.write(f"stage {i}: {cls.value} ({len(cs)} constraint{'' if len(cs) == 1 else 's'})\n")

    def save(self, path: str) -> None:
        if not path:
            raise UsageError("expected 'save <path>'")
        v = self.last if self.last is not None else verdict(self.problem, self.config)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_report(self.problem, self.config, v, self.stages))
        self.out.write(f"saved {path}\n")


def run_repl(path: str, args: argparse.Namespace, inp: TextIO, out: TextIO) -> int:
    pf = read_problem_file(path)
    config, slack = build_config(pf.settings, args)
    repl = Repl(pf.problem.with_slack(slack), config, out)
    interactive = inp.isatty()
    while True:
        if interactive:
            out.write("dyadsum> ")
            out.flush()
        line = inp.readline()
        if not line:
            break
        if not interactive:
            out.write(f"> {line.rstrip()}\n")
        if not repl.handle(line.strip()):
            break
    return repl.last.classification.exit_code if repl.last else 0


def _kind(text: str) -> EstimateKind:
    try:
        return EstimateKind(text.lower())
    except ValueError:
        raise UsageError(f"unknown kind {text!r}; use one of {[k.value for k in EstimateKind]}") from None


def _dimension(text: str) -> int:
    if text not in ("2", "3"):
        raise UsageError(f"n must be 2 or 3, got {text!r}")
    return int(text)


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except DslError as e:
        raise UsageError(str(e)) from None


def _grid(text: str) -> list[Fraction]:
    """``v`` or ``lo:hi:step`` (inclusive)."""
    parts = text.split(":")
    if len(parts) == 1:
        return [_rational(parts[0])]
    if len(parts) != 3:
        raise UsageError(f"expected a value or lo:hi:step, got {text!r}")
    try:
        return rational_range(*(_rational(x) for x in parts))
    except ValueError as e:
        raise UsageError(str(e)) from None


def run_paper(args: argparse.Namespace, out: TextIO) -> int:
    kind, n = _kind(args.kind), _dimension(args.n)
    t = Triple(n, _rational(args.s), _rational(args.theta))
    config, slack = build_config({}, args, default_engine="symbolic")
    r = verify_estimate(kind, t, config, slack)
    out.write(format_paper(r, config, slack))
    if args.json:
        _write_json(args.json, paper_json(r))
    return r.classification.exit_code


def format_paper(r: VerifyResult, config: EngineConfig, slack: SlackConfig) -> str:
    lines = [f"# dyadsum {__version__} estimate check", f"# kind {r.kind.value}, triple {r.triple}"]
    lines += [f"# {l}" for l in config_lines(config, slack)]
    lines.append("# modulation subcase pattern roles | verdict exponent log_degree")
    for cases, v in r.per_problem:
        c0 = cases[0]
        extra = f" (+{len(cases) - 1} equivalent)" if len(cases) > 1 else ""
        lines.append(f"{c0.label()}{extra} | {v.classification.value} {fmt_q(exact_exponent(v))} {v.log_degree}")
    ref = "admissible" if r.kind in (EstimateKind.CUCV, EstimateKind.UV) else "23ts"
    lines.append(f"overall: {r.classification.value}, exponent {fmt_q(r.exponent)}, log degree {r.log_degree}")
    failing = sorted({(cs[0].modulation.value, cs[0].subcase.value, v.classification.value)
                      for cs, v in r.failing()})
    for mod, sc, cls in failing:
        lines.append(f"not bounded: {mod} modulation, subcase {sc} ({cls})")
    lines.append(f"reference: {ref}={'true' if r.reference else 'false'}")
    lines.append(f"match: {'true' if r.match else 'false'}")
    return "\n".join(lines) + "\n"


def paper_json(r: VerifyResult) -> dict:
    return {
        "version": __version__,
        "kind": r.kind.value,
        "triple": {"n": r.triple.n, "s": fmt_q(r.triple.s), "theta": fmt_q(r.triple.theta)},
        "classification": r.classification.value,
        "exponent": fmt_q(r.exponent),
        "log_degree": r.log_degree,
        "reference": r.reference,
        "match": r.match,
        "cases": [
            {"labels": [c.label() for c in cases], "classification": v.classification.value,
             "exponent": fmt_q(exact_exponent(v)), "log_degree": v.log_degree}
            for cases, v in r.per_problem
        ],
    }


def write_csv(rows: Sequence[SweepRow], f: TextIO) -> None:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        match = "boundary" if r.boundary else ("true" if r.match else "false")
        w.writerow([r.n, fmt_q(r.s), fmt_q(r.theta), r.kind.value, r.verdict.value, fmt_q(r.exponent),
                    r.log_degree, "true" if r.reference else "false", match])


def run_sweep(args: argparse.Namespace, out: TextIO) -> int:
    kind = _kind(args.kind)
    ns = [_dimension(x) for x in args.n.split(",")]
    s_grid, theta_grid = _grid(args.s), _grid(args.theta)
    config, _ = build_config({}, args, default_engine="symbolic")
    rows: list[SweepRow] = []
    for n in ns:
        rows += sweep(kind, n, s_grid, theta_grid, config)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as f:
            write_csv(rows, f)
    else:
        write_csv(rows, out)
    out.flush()
    interior = [r for r in rows if not r.boundary]
    hits = sum(r.match for r in interior)
    sys.stderr.write(f"{hits}/{len(interior)} interior points match; {len(rows) - len(interior)} boundary\n")
    return 0


# --------------------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EX_USAGE)


def _engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ladder", help="parameter ladder lo:hi for kN (default 4:12)")
    p.add_argument("--cutoff", type=int, help="cutoff K on every variable (default 64)")
    p.add_argument("--slack-sim", dest="slack_sim", type=int, help="slack c for ~ (default 1)")
    p.add_argument("--slack-lesssim", dest="slack_lesssim", type=int, help="slack c for <~ (default 2)")
    p.add_argument("--gap-ll", dest="gap_ll", type=int, help="gap g for << (default 3)")
    p.add_argument("--tol", help="classification tolerance (default 1/20)")
    p.add_argument("--engine", choices=["symbolic", "numeric", "both"])
    p.add_argument("--json", help="also write the result as JSON to this path")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dyadsum", description="Growth of constrained dyadic sums.")
    ap.add_argument("--version", action="version", version=f"dyadsum {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("verify", help="classify the sum in a problem file")
    p.add_argument("file", help="a .dsum file, or the name of a bundled one (e.g. stage4)")
    _engine_flags(p)

    p = sub.add_parser("repl", help="refine a problem interactively (commands on stdin)")
    p.add_argument("file")
    _engine_flags(p)

    p = sub.add_parser("paper", help="check one bilinear estimate at one triple")
    p.add_argument("--kind", required=True, help="cucv, uv, cuv or omegacuv")
    p.add_argument("--n", required=True)
    p.add_argument("--s", required=True, type=str)
    p.add_argument("--theta", required=True)
    _engine_flags(p)

    p = sub.add_parser("sweep", help="check an estimate over a grid, as CSV")
    p.add_argument("--kind", required=True)
    p.add_argument("--n", required=True, help="2, 3 or 2,3")
    p.add_argument("--s", required=True, help="value or lo:hi:step")
    p.add_argument("--theta", required=True, help="value or lo:hi:step")
    p.add_argument("--csv", help="write CSV here instead of stdout")
    _engine_flags(p)
    return ap


def _fix_negative_values(argv: list[str]) -> list[str]:
    """Let ``--s -1/2`` through: argparse would read ``-1/2`` as an option."""
    out = []
    for i, a in enumerate(argv):
        if out and out[-1] in ("--s", "--theta") and a.startswith("-"):
            out[-1] = f"{out[-1]}={a}"
            continue
        out.append(a)
    return out


def main(argv: Optional[Sequence[str]] = None, stdin: TextIO = None, stdout: TextIO = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    argv = _fix_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EX_USAGE if e.code not in (0, None) else 0
    try:
        if args.command == "verify":
            return run_verify(args.file, args, stdout)
        if args.command == "repl":
            return run_repl(args.file, args, stdin, stdout)
        if args.command == "paper":
            return run_paper(args, stdout)
        return run_sweep(args, stdout)
    except UsageError as e:
        sys.stderr.write(f"dyadsum: {e}\n")
        return EX_USAGE
    except DslError as e:
        sys.stderr.write(f"dyadsum: parse error: {e}\n")
        return EX_DATAERR
    except (FileNotFoundError, IsADirectoryError) as e:
        sys.stderr.write(f"dyadsum: {e}\n")
        return EX_NOINPUT
    except ValueError as e:
        sys.stderr.write(f"dyadsum: invalid problem: {e}\n")
        return EX_DATAERR
    except CostGuardError as e:
        sys.stderr.write(f"dyadsum: {e}\n")
        return EX_SOFTWARE


if __name__ == "__main__":
    raise SystemExit(main())
