"""Text syntax for summation problems (``.dsum`` files).

::

    # comments run to end of line
    param N
    var Nmax Nmed Nmin
    let s = -1/2                      # exponent symbol
    sum <Nmin>^(s) * Nmin^(1/2) * min{Nmax*Nmin, Lmed}^(1/2)
    where Nmax ~ N
    where Lmed <~ Nmax*Nmin
    set cutoff = 64

Relations: ``~ <~ >~ << >> <= >=``.  Exponents are ``^2``, ``^(-1/2)``,
``^(0.5)`` or ``^(1/2 - theta)`` (affine in ``let`` symbols).  Numbers used
as factors must be powers of two.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

from .constraints import Constraint, Relation, SlackConfig
from .expr import (
    Affine,
    Bracket,
    DyadicVar,
    Exponent,
    Max,
    Min,
    Mono,
    Monomial,
    Role,
    Summand,
    substitute_params,
)

__all__ = [
    "DslError",
    "ProblemFile",
    "format_constraint",
    "format_monomial",
    "format_problem",
    "format_summand",
    "parse_constraint",
    "parse_problem",
    "parse_problem_file",
    "parse_rational",
    "parse_summand",
]

SETTINGS = ("ladder", "cutoff", "slack_sim", "slack_lesssim", "gap_ll", "tol", "engine")

if TYPE_CHECKING:
    from .engine import Problem


class DslError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.msg, self.line, self.col = msg, line, col
        where = f"line {line}, column {col}: " if line else (f"column {col}: " if col else "")
        super().__init__(where + msg)


def parse_rational(text: str) -> Fraction:
    """``-3/10``, ``0.55`` or ``2`` as an exact fraction."""
    t = text.strip()
    try:
        return Fraction(t)
    except (ValueError, ZeroDivisionError):
        raise DslError(f"not a rational number: {text!r}") from None


# --------------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><~|>~|<<|>>|<=|>=|[~<>{}(),*/^+\-=:])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _lex(text: str, line: int, col0: int = 1) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DslError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), col0 + pos))
        pos = m.end()
    out.append(_Tok("end", "", col0 + len(text)))
    return out


class _Parser:
    def __init__(self, text: str, line: int, variables, symbols, col0: int = 1):
        self.toks = _lex(text, line, col0)
        self.i = 0
        self.line = line
        self.variables = variables
        self.symbols = symbols

    # helpers
    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[_Tok] = None) -> DslError:
        tok = tok or self.cur
        return DslError(msg, self.line, tok.col)

    def accept(self, text: str) -> Optional[_Tok]:
        if self.cur.kind in ("op", "id") and self.cur.text == text:
            tok = self.cur
            self.i += 1
            return tok
        return None

    def expect(self, text: str, opener: Optional[_Tok] = None) -> _Tok:
        tok = self.accept(text)
        if tok is None:
            if opener is not None and self.cur.kind == "end":
                raise self.error(f"unclosed {opener.text!r}", opener)
            found = self.cur.text or "end of line"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def at_end(self) -> bool:
        return self.cur.kind == "end"

    def finish(self):
        if not self.at_end():
            raise self.error(f"unexpected {self.cur.text!r}")

    # exponents: affine expressions over let-symbols
    def exponent(self) -> Exponent:
        if self.cur.text == "(":
            opener = self.cur
            self.i += 1
            e = self.affine()
            self.expect(")", opener)
            return e
        neg = bool(self.accept("-"))
        tok = self.cur
        if tok.kind == "num":
            self.i += 1
            v = Fraction(tok.text)
            return -v if neg else v
        if tok.kind == "id":
            self.i += 1
            e = self._symbol(tok)
            return -e if neg else e
        raise self.error("expected an exponent")

    def _symbol(self, tok: _Tok) -> Exponent:
        if tok.text not in self.symbols:
            raise self.error(f"unknown symbol {tok.text!r} in exponent", tok)
        return Affine.symbol(tok.text)

    def affine(self):
        e = self.aterm()
        while self.cur.text in ("+", "-"):
            op = self.cur.text
            self.i += 1
            t = self.aterm()
            e = e + t if op == "+" else e - t
        return e

    def aterm(self):
        if self.accept("-"):
            return -self.aterm()
        e = self.aprimary()
        while self.cur.text in ("*", "/"):
            op = self.cur
            self.i += 1
            r = self.aprimary()
            if op.text == "*":
                if isinstance(e, Affine) and isinstance(r, Affine):
                    raise self.error("exponent must be affine in symbols", op)
                e = e * r if not isinstance(r, Affine) else r * e
            else:
                if isinstance(r, Affine):
                    raise self.error("cannot divide by a symbol", op)
                if r == 0:
                    raise self.error("division by zero", op)
                e = e / r if isinstance(e, Affine) else Fraction(e) / r
        return e

    def aprimary(self):
        tok = self.cur
        if tok.text == "(":
            self.i += 1
            e = self.affine()
            self.expect(")", tok)
            return e
        if tok.kind == "num":
            self.i += 1
            return Fraction(tok.text)
        if tok.kind == "id":
            self.i += 1
            return self._symbol(tok)
        raise self.error("expected a number or symbol")

    def maybe_power(self) -> Exponent:
        if self.accept("^"):
            return self.exponent()
        return Fraction(1)

    # monomials
    def atom(self) -> Monomial:
        tok = self.cur
        if tok.kind == "id":
            self.i += 1
            if tok.text not in self.variables:
                raise self.error(f"undeclared variable {tok.text!r}", tok)
            base = Monomial.var(tok.text)
        elif tok.kind == "num":
            self.i += 1
            v = Fraction(tok.text)
            lg = _log2_exact(v)
            if lg is None:
                raise self.error(f"numeric factor {tok.text} is not a power of two", tok)
            base = Monomial.const(lg)
        else:
            raise self.error("expected a variable or number")
        p = self.maybe_power()
        return base ** p if p != 1 else base

    def monomial(self) -> Monomial:
        m = self.atom()
        while self.cur.text in ("*", "/"):
            op = self.cur.text
            self.i += 1
            a = self.atom()
            m = m * a if op == "*" else m / a
        return m

    def minmax(self, kind: str):
        opener = self.expect("{")
        args = [self.monomial()]
        while self.accept(","):
            args.append(self.monomial())
        self.expect("}", opener)
        if len(args) < 2:
            raise self.error(f"{kind} needs at least two arguments", opener)
        if len(set(args)) != len(args):
            raise self.error(f"{kind} arguments must be distinct", opener)
        return (Min if kind == "min" else Max)(tuple(args))

    def side(self):
        if self.cur.kind == "id" and self.cur.text in ("min", "max") and self.toks[self.i + 1].text == "{":
            kind = self.cur.text
            self.i += 1
            mm = self.minmax(kind)
            return type(mm)(mm.args, self.maybe_power())
        return self.monomial()

    # summands
    def factor(self):
        tok = self.cur
        if tok.text == "<":
            self.i += 1
            arg = self.monomial()
            self.expect(">", tok)
            return Bracket(arg, self.maybe_power())
        if tok.kind == "id" and tok.text in ("min", "max") and self.toks[self.i + 1].text == "{":
            self.i += 1
            mm = self.minmax(tok.text)
            return type(mm)(mm.args, self.maybe_power())
        return Mono(self.atom())

    def summand(self) -> Summand:
        fs = [self.factor()]
        while self.cur.text in ("*", "/"):
            op = self.cur.text
            self.i += 1
            f = self.factor()
            fs.append(f if op == "*" else _invert(f))
        return Summand(fs)


def _invert(f):
    if isinstance(f, Mono):
        return Mono(f.mono ** -1)
    if isinstance(f, Bracket):
        return Bracket(f.arg, -f.power)
    return type(f)(f.args, -f.power)


def _log2_exact(v: Fraction) -> Optional[int]:
    if v <= 0:
        return None
    n, d = v.numerator, v.denominator
    if n & (n - 1) or d & (d - 1):
        return None
    return n.bit_length() - d.bit_length()


_REL = {r.value: r for r in Relation}


def _constraint(p: _Parser) -> Constraint:
    lhs = p.side()
    tok = p.cur
    if tok.text not in _REL:
        raise p.error(f"expected a relation (one of {' '.join(_REL)})")
    p.i += 1
    rhs = p.side()
    p.finish()
    return Constraint(lhs, _REL[tok.text], rhs)


def parse_summand(text: str, variables, symbols=()) -> Summand:
    p = _Parser(text, 0, set(variables), set(symbols))
    s = p.summand()
    p.finish()
    return s


def parse_constraint(text: str, variables, symbols=()) -> Constraint:
    return _constraint(_Parser(text, 0, set(variables), set(symbols)))


# --------------------------------------------------------------------------- files


@dataclass
class ProblemFile:
    problem: "Problem"
    settings: dict[str, str] = field(default_factory=dict)
    bindings: dict[str, Fraction] = field(default_factory=dict)


def parse_problem_file(text: str) -> ProblemFile:
    from .engine import Problem

    param: Optional[str] = None
    names: list[str] = []
    bindings: dict[str, Fraction] = {}
    summand: Optional[Summand] = None
    constraints: list[Constraint] = []
    settings: dict[str, str] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        stripped = body.strip()
        if not stripped:
            continue
        col0 = len(body) - len(body.lstrip()) + 1
        word = stripped.split(None, 1)[0]
        rest = stripped[len(word):]
        rest_col = col0 + len(word)
        declared = set(names) | ({param} if param else set())

        if word == "param":
            ids = rest.split()
            if param is not None:
                raise DslError("second 'param' line", lineno, col0)
            if len(ids) != 1 or not re.fullmatch(r"[A-Za-z_]\w*", ids[0]):
                raise DslError("'param' takes exactly one name", lineno, col0)
            if ids[0] in declared:
                raise DslError(f"{ids[0]!r} declared twice", lineno, col0)
            param = ids[0]
        elif word == "var":
            ids = rest.split()
            if not ids:
                raise DslError("'var' needs at least one name", lineno, col0)
            for name in ids:
                if not re.fullmatch(r"[A-Za-z_]\w*", name) or name in ("min", "max"):
                    raise DslError(f"bad variable name {name!r}", lineno, col0)
                if name in declared or name in names or name in bindings:
                    raise DslError(f"{name!r} declared twice", lineno, col0)
                names.append(name)
        elif word == "let":
            m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*=\s*(.+?)\s*", rest)
            if not m:
                raise DslError("expected 'let <symbol> = <rational>'", lineno, col0)
            if m.group(1) in declared:
                raise DslError(f"{m.group(1)!r} is already a variable", lineno, col0)
            try:
                bindings[m.group(1)] = parse_rational(m.group(2))
            except DslError as e:
                raise DslError(e.msg, lineno, col0) from None
        elif word == "sum":
            if summand is not None:
                raise DslError("second 'sum' line", lineno, col0)
            p = _Parser(rest, lineno, declared, set(bindings), rest_col)
            summand = p.summand()
            p.finish()
        elif word == "where":
            p = _Parser(rest, lineno, declared, set(bindings), rest_col)
            constraints.append(_constraint(p))
        elif word == "set":
            m = re.fullmatch(r"\s*([a-z_]+)\s*=?\s*(\S+)\s*", rest)
            if not m or m.group(1) not in SETTINGS:
                raise DslError(f"expected 'set <key> = <value>' with key in {SETTINGS}", lineno, col0)
            settings[m.group(1)] = m.group(2)
        else:
            raise DslError(f"unknown directive {word!r}", lineno, col0)

    if param is None:
        raise DslError("missing 'param' line")
    if summand is None:
        raise DslError("missing 'sum' line")
    if bindings:
        summand = substitute_params(summand, bindings)
        constraints = [_subs_constraint(c, bindings) for c in constraints]
    slack = SlackConfig(
        c_lesssim=int(settings.get("slack_lesssim", 2)),
        c_sim=int(settings.get("slack_sim", 1)),
        gap_ll=int(settings.get("gap_ll", 3)),
    )
    problem = Problem(
        summand=summand,
        constraints=tuple(constraints),
        variables=tuple(DyadicVar(n) for n in names),
        param=DyadicVar(param, Role.PARAM),
        slack=slack,
    )
    return ProblemFile(problem, settings, bindings)


def _subs_side(side, bindings):
    if isinstance(side, Monomial):
        return side.subs(bindings)
    args = tuple(a.subs(bindings) for a in side.args)
    p = side.power.subs(bindings) if isinstance(side.power, Affine) else side.power
    return type(side)(args, p)


def _subs_constraint(c: Constraint, bindings) -> Constraint:
    return Constraint(_subs_side(c.lhs, bindings), c.rel, _subs_side(c.rhs, bindings))


def parse_problem(text: str) -> "Problem":
    return parse_problem_file(text).problem


# --------------------------------------------------------------------------- printing


def _fmt_exp(e: Exponent) -> str:
    if isinstance(e, Affine):
        return f"^({e})"
    if e == 1:
        return ""
    if e.denominator == 1 and e > 0:
        return f"^{e}"
    return f"^({e})"


def format_monomial(m: Monomial) -> str:
    parts = []
    c = m.coef
    if isinstance(c, Affine) or c != 0:
        if not isinstance(c, Affine) and c.denominator == 1 and c > 0:
            parts.append(str(2 ** int(c)))
        else:
            parts.append("2" + _fmt_exp(c) if c != 1 else "2")
    for k, v in m.powers:
        parts.append(k + _fmt_exp(v))
    return "*".join(parts) if parts else "1"


def format_side(side) -> str:
    if isinstance(side, Monomial):
        return format_monomial(side)
    kind = "min" if isinstance(side, Min) else "max"
    inner = ", ".join(format_monomial(a) for a in side.args)
    return f"{kind}{{{inner}}}" + _fmt_exp(side.power)


def format_summand(s: Summand) -> str:
    out = []
    for f in s.factors:
        if isinstance(f, Mono):
            out.append(format_monomial(f.mono))
        elif isinstance(f, Bracket):
            out.append(f"<{format_monomial(f.arg)}>" + _fmt_exp(f.power))
        else:
            out.append(format_side(f))
    return " * ".join(out) if out else "1"


def format_constraint(c: Constraint) -> str:
    return f"{format_side(c.lhs)} {c.rel.value} {format_side(c.rhs)}"


def format_problem(p: "Problem", settings: Optional[dict] = None) -> str:
    lines = [f"param {p.param.name}"]
    if p.variables:
        lines.append("var " + " ".join(v.name for v in p.variables))
    lines.append(f"sum {format_summand(p.summand)}")
    lines.extend(f"where {format_constraint(c)}" for c in p.constraints)
    defaults = SlackConfig()
    if p.slack.c_lesssim != defaults.c_lesssim:
        lines.append(f"set slack_lesssim = {p.slack.c_lesssim}")
    if p.slack.c_sim != defaults.c_sim:
        lines.append(f"set slack_sim = {p.slack.c_sim}")
    if p.slack.gap_ll != defaults.gap_ll:
        lines.append(f"set gap_ll = {p.slack.gap_ll}")
    for k, v in (settings or {}).items():
        lines.append(f"set {k} = {v}")
    return "\n".join(lines) + "\n"
