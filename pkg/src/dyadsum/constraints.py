"""Dyadic relations and their integer linearisation in log2 space.

A relation between two monomials becomes one or two inequalities
``sum(c_v * k_v) <= b`` over integer exponent vectors ``k``.  Inequalities
are stored with coprime integer coefficients and an integer (floored)
bound, which is exact on the lattice.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

from .expr import Max, Min, MissingVariableError, Monomial

__all__ = [
    "Constraint",
    "Inequality",
    "LogRegion",
    "NotEliminableHere",
    "Relation",
    "SlackConfig",
    "bounds_for",
    "constraint_holds",
    "contains",
    "fm_eliminate",
    "linearize",
    "side_log2",
    "strict_less",
]


class NotEliminableHere(ValueError):
    pass


class Relation(enum.Enum):
    LESSSIM = "<~"
    GTRSIM = ">~"
    SIM = "~"
    LL = "<<"
    GG = ">>"
    LE = "<="
    GE = ">="

    @property
    def flipped(self) -> "Relation":
        return _FLIP[self]


_FLIP = {
    Relation.LESSSIM: Relation.GTRSIM,
    Relation.GTRSIM: Relation.LESSSIM,
    Relation.SIM: Relation.SIM,
    Relation.LL: Relation.GG,
    Relation.GG: Relation.LL,
    Relation.LE: Relation.GE,
    Relation.GE: Relation.LE,
}

Side = Union[Monomial, Min, Max]


@dataclass(frozen=True)
class Constraint:
    lhs: Side
    rel: Relation
    rhs: Side

    @property
    def variables(self) -> frozenset[str]:
        return self.lhs.variables | self.rhs.variables

    def is_monomial(self) -> bool:
        return isinstance(self.lhs, Monomial) and isinstance(self.rhs, Monomial)

    def __str__(self) -> str:
        from .dsl import format_side

        return f"{format_side(self.lhs)} {self.rel.value} {format_side(self.rhs)}"


@dataclass(frozen=True)
class SlackConfig:
    c_lesssim: int = 2
    c_sim: int = 1
    gap_ll: int = 3

    def __post_init__(self):
        if self.c_lesssim < 0 or self.c_sim < 0 or self.gap_ll <= 0:
            raise ValueError("slack constants must be nonnegative (gap positive)")


@dataclass(frozen=True, order=True)
class Inequality:
    """``sum(c * k_v) <= bound`` with coprime integer ``c``."""

    coeffs: tuple[tuple[str, int], ...]
    bound: int

    @staticmethod
    def from_form(coeffs: Mapping[str, Fraction], bound: Fraction) -> "Inequality":
        c = {k: Fraction(v) for k, v in coeffs.items() if v != 0}
        bound = Fraction(bound)
        if not c:
            return Inequality((), 0 if bound >= 0 else -1)
        d = math.lcm(*(v.denominator for v in c.values()))
        ci = {k: int(v * d) for k, v in c.items()}
        g = math.gcd(*ci.values())
        ci = {k: v // g for k, v in ci.items()}
        return Inequality(tuple(sorted(ci.items())), math.floor(bound * d / g))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.coeffs)

    def coeff(self, v: str) -> int:
        for k, c in self.coeffs:
            if k == v:
                return c
        return 0

    def is_trivial(self) -> bool:
        return not self.coeffs and self.bound >= 0

    def is_infeasible(self) -> bool:
        return not self.coeffs and self.bound < 0

    def holds(self, point: Mapping[str, int]) -> bool:
        total = 0
        for k, c in self.coeffs:
            if k not in point:
                raise MissingVariableError(k)
            total += c * point[k]
        return total <= self.bound

    def __str__(self) -> str:
        if not self.coeffs:
            return f"0 <= {self.bound}"
        parts = []
        for k, c in self.coeffs:
            sign = "-" if c < 0 else "+"
            mag = "" if abs(c) == 1 else f"{abs(c)}*"
            parts.append(f"{sign} {mag}k_{k}")
        s = " ".join(parts)
        s = s[2:] if s.startswith("+ ") else "-" + s[2:]
        return f"{s} <= {self.bound}"


def _diff_form(a: Monomial, b: Monomial) -> tuple[dict[str, Fraction], Fraction]:
    """log2(a) - log2(b) as (coefficients, constant)."""
    ca, pa = a.log2_form()
    cb, pb = b.log2_form()
    coeffs = dict(pa)
    for k, v in pb.items():
        coeffs[k] = coeffs.get(k, Fraction(0)) - v
    return coeffs, ca - cb


def _le(a: Monomial, b: Monomial, slack: Fraction) -> Inequality:
    coeffs, const = _diff_form(a, b)
    return Inequality.from_form(coeffs, slack - const)


@lru_cache(maxsize=100_000)
def _constraint_ineqs(c: Constraint, slack: SlackConfig) -> tuple[Inequality, ...]:
    return tuple(_constraint_rows(c, slack))


def _constraint_rows(c: Constraint, slack: SlackConfig) -> list[Inequality]:
    if not c.is_monomial():
        raise TypeError(f"constraint {c} has a min/max side; split it first")
    a, b = c.lhs, c.rhs
    r = c.rel
    if r is Relation.LESSSIM:
        return [_le(a, b, Fraction(slack.c_lesssim))]
    if r is Relation.GTRSIM:
        return [_le(b, a, Fraction(slack.c_lesssim))]
    if r is Relation.SIM:
        return [_le(a, b, Fraction(slack.c_sim)), _le(b, a, Fraction(slack.c_sim))]
    if r is Relation.LL:
        return [_le(a, b, Fraction(-slack.gap_ll))]
    if r is Relation.GG:
        return [_le(b, a, Fraction(-slack.gap_ll))]
    if r is Relation.LE:
        return [_le(a, b, Fraction(0))]
    return [_le(b, a, Fraction(0))]


def strict_less(a: Monomial, b: Monomial) -> Constraint:
    """A ``<=`` constraint equivalent on the lattice to ``a < b``."""
    coeffs, const = _diff_form(a, b)
    nz = [v for v in coeffs.values() if v != 0]
    d = math.lcm(*(v.denominator for v in nz)) if nz else 1
    # sum(c k) takes values in Z/d, so  sum(c k) < -const  <=>  sum(c k) <= top
    top = Fraction(math.ceil(-const * d) - 1, d)
    delta = -(top + const)
    return Constraint(a * Monomial.const(delta), Relation.LE, b)


@dataclass(frozen=True)
class LogRegion:
    inequalities: tuple[Inequality, ...] = ()

    @staticmethod
    def of(ineqs: Iterable[Inequality]) -> "LogRegion":
        return LogRegion(tuple(simplify(ineqs)))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset().union(*(q.variables for q in self.inequalities))

    def is_trivially_empty(self) -> bool:
        return any(q.is_infeasible() for q in self.inequalities)

    def __and__(self, other: "LogRegion") -> "LogRegion":
        return LogRegion.of(self.inequalities + other.inequalities)

    def involving(self, v: str) -> list[Inequality]:
        return [q for q in self.inequalities if q.coeff(v) != 0]

    def __str__(self) -> str:
        return "\n".join(str(q) for q in self.inequalities)


def simplify(ineqs: Iterable[Inequality]) -> list[Inequality]:
    """Drop trivial rows and keep only the tightest row per coefficient vector."""
    best: dict[tuple, int] = {}
    empty = False
    for q in ineqs:
        if q.is_trivial():
            continue
        if q.is_infeasible():
            empty = True
            continue
        if q.coeffs not in best or q.bound < best[q.coeffs]:
            best[q.coeffs] = q.bound
    if empty:
        return [Inequality((), -1)]
    return [Inequality(k, b) for k, b in sorted(best.items())]


def linearize(cs: Iterable[Constraint], slack: SlackConfig = SlackConfig()) -> LogRegion:
    out: list[Inequality] = []
    for c in cs:
        out.extend(_constraint_ineqs(c, slack))
    return LogRegion.of(out)


def contains(r: LogRegion, point: Mapping[str, int]) -> bool:
    missing = sorted(r.variables - set(point))
    if missing:
        raise MissingVariableError(missing[0])
    return all(q.holds(point) for q in r.inequalities)


def bounds_for(
    r: LogRegion, v: str, fixed: Mapping[str, int]
) -> tuple[Optional[int], Optional[int]]:
    """Tightest integer interval for ``k_v``; ``None`` marks an infinite side."""
    lo: Optional[int] = None
    hi: Optional[int] = None
    for q in r.involving(v):
        rest = 0
        for k, c in q.coeffs:
            if k == v:
                continue
            if k not in fixed:
                raise NotEliminableHere(
                    f"{v} is not eliminable here: {q} also involves unfixed {k}"
                )
            rest += c * fixed[k]
        cv = q.coeff(v)
        num = q.bound - rest
        if cv > 0:
            b = num // cv
            hi = b if hi is None else min(hi, b)
        else:
            b = -(num // -cv)
            lo = b if lo is None else max(lo, b)
    return lo, hi


def fm_eliminate(ineqs: Iterable[Inequality], v: str) -> list[Inequality]:
    """Fourier-Motzkin projection along ``k_v`` with Chvatal-Gomory rounding."""
    pos, neg, rest = [], [], []
    for q in ineqs:
        c = q.coeff(v)
        (pos if c > 0 else neg if c < 0 else rest).append(q)
    for p in pos:
        cp = p.coeff(v)
        for n in neg:
            cn = -n.coeff(v)
            comb: dict[str, Fraction] = {}
            for k, c in p.coeffs:
                comb[k] = comb.get(k, 0) + cn * c
            for k, c in n.coeffs:
                comb[k] = comb.get(k, 0) + cp * c
            comb.pop(v, None)
            rest.append(Inequality.from_form(comb, Fraction(cn * p.bound + cp * n.bound)))
    return simplify(rest)


def side_log2(side, point: Mapping[str, int]) -> Fraction:
    """Exact ``log2`` of a constraint side at an integer point."""
    if isinstance(side, Monomial):
        return side.log2_at(point)
    logs = [a.log2_at(point) for a in side.args]
    pick = min(logs) if isinstance(side, Min) else max(logs)
    return pick * side.power


def constraint_holds(c: Constraint, point: Mapping[str, int], slack: SlackConfig = SlackConfig()) -> bool:
    """Pointwise meaning of a relation, min/max sides included."""
    d = side_log2(c.lhs, point) - side_log2(c.rhs, point)
    r = c.rel
    if r is Relation.LESSSIM:
        return d <= slack.c_lesssim
    if r is Relation.GTRSIM:
        return -d <= slack.c_lesssim
    if r is Relation.SIM:
        return abs(d) <= slack.c_sim
    if r is Relation.LL:
        return d <= -slack.gap_ll
    if r is Relation.GG:
        return -d <= -slack.gap_ll
    if r is Relation.LE:
        return d <= 0
    return d >= 0
