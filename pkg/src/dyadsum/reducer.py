"""Region splitting and closed-form elimination of dyadic variables.

:func:`split` removes brackets and min/max factors by cutting the lattice
into pieces on which each of them is a single monomial.  On a pure
monomial summand, summing one variable over its range is a geometric
series, ``sum_{A <~ B} A^c ~ B^c`` for ``c > 0``, so variables can be
eliminated one at a time until only the growth parameter is left.  When
several bounds compete, the elimination branches on which one is active.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

from .constraints import (
    Constraint,
    Inequality,
    LogRegion,
    Relation,
    fm_eliminate,
    linearize,
    strict_less,
)
from .expr import Bracket, Min, Mono, Monomial, Summand

__all__ = [
    "Branch",
    "Divergent",
    "Elimination",
    "NotEliminable",
    "SymbolicGrowth",
    "eliminate_var",
    "feasible_for_large",
    "split",
    "symbolic_growth",
]

# Branches explored before symbolic_growth gives up.
BRANCH_BUDGET = 20000
# log2 of the parameter value used to test "nonempty for all large N".
LARGE_K = 1 << 20


class NotEliminable(Exception):
    """The closed-form route does not apply; use the numeric engine."""


@dataclass(frozen=True)
class Branch:
    summand: Summand
    extra_constraints: tuple[Constraint, ...] = ()
    provenance: tuple[str, ...] = ()
    # ratios upper/lower of zero-exponent ranges summed so far
    extents: tuple[Monomial, ...] = ()

    def __post_init__(self):
        if not self.summand.is_pure():
            raise ValueError("branch summand must be a pure monomial")

    @property
    def monomial(self) -> Monomial:
        return self.summand.monomial


@dataclass(frozen=True)
class SymbolicGrowth:
    """``sum ~ N^exponent * (log N)^log_degree`` for large ``N``.

    ``divergent`` marks a sum that is infinite at fixed ``N``; ``empty``
    marks a region with no lattice points once ``N`` is large.
    """

    exponent: Optional[Fraction]
    log_degree: int = 0
    divergent: bool = False
    empty: bool = False
    detail: str = ""
    branches: int = 0


@dataclass(frozen=True)
class Elimination:
    branch: Branch
    region: LogRegion
    extent: Optional[tuple[Monomial, Monomial]] = None


@dataclass(frozen=True)
class Divergent:
    variable: str
    side: str  # "upper" or "lower": the missing bound

    def __str__(self) -> str:
        return f"sum over {self.variable} has no {self.side} bound"


# --------------------------------------------------------------------------- splitting


def _min_cases(args: Sequence[Monomial], smallest: bool) -> list[tuple[int, list[Constraint]]]:
    """Exact partition by which argument is extremal; ties go to the first."""
    out = []
    for i, a in enumerate(args):
        cs = []
        for j, b in enumerate(args):
            if j == i:
                continue
            lo, hi = (a, b) if smallest else (b, a)
            cs.append(strict_less(lo, hi) if j < i else Constraint(lo, Relation.LE, hi))
        out.append((i, cs))
    return out


def _side_cases(side) -> list[tuple[Monomial, list[Constraint], str]]:
    if isinstance(side, Monomial):
        return [(side, [], "")]
    tag = "min" if isinstance(side, Min) else "max"
    return [
        (side.args[i] ** side.power, cs, f"{tag}{{...}}={side.args[i]}")
        for i, cs in _min_cases(side.args, isinstance(side, Min))
    ]


def split(s: Summand, cs: Iterable[Constraint] = ()) -> list[Branch]:
    """Branches on which every bracket, min and max is a single monomial.

    Constraints with a min/max side are split the same way; monomial
    constraints are left to the caller's region.
    """
    options: list[list[tuple[Monomial, list[Constraint], str]]] = []
    base = Monomial()
    for f in s.factors:
        if isinstance(f, Mono):
            base = base * f.mono
        elif isinstance(f, Bracket):
            x = f.arg
            options.append([
                (Monomial(), [Constraint(x, Relation.LE, Monomial())], f"{x}<=1"),
                (x ** f.power, [strict_less(Monomial(), x)], f"{x}>1"),
            ])
        else:
            options.append(_side_cases(f))
    for c in cs:
        if c.is_monomial():
            continue
        combos = []
        for (lm, lcs, lt), (rm, rcs, rt) in itertools.product(_side_cases(c.lhs), _side_cases(c.rhs)):
            tag = ", ".join(t for t in (lt, rt) if t)
            combos.append((Monomial(), lcs + rcs + [Constraint(lm, c.rel, rm)], tag))
        options.append(combos)

    out = []
    for choice in itertools.product(*options):
        m = base
        extra: list[Constraint] = []
        prov = []
        for mono, ccs, tag in choice:
            m = m * mono
            extra.extend(ccs)
            prov.append(tag)
        out.append(Branch(Summand([m]), tuple(extra), tuple(prov)))
    return out


# --------------------------------------------------------------------------- feasibility


@lru_cache(maxsize=200_000)
def _lp_feasible(ineqs: tuple[Inequality, ...], param: str, k_param: int) -> bool:
    if any(q.is_infeasible() for q in ineqs):
        return False
    names = sorted({k for q in ineqs for k, _ in q.coeffs} - {param})
    rows, rhs = [], []
    for q in ineqs:
        row = np.zeros(len(names))
        b = float(q.bound)
        for k, c in q.coeffs:
            if k == param:
                b -= c * k_param
            else:
                row[names.index(k)] = c
        if not names or not row.any():
            if b < 0:
                return False
            continue
        rows.append(row)
        rhs.append(b)
    if not rows:
        return True
    res = linprog(
        np.zeros(len(names)),
        A_ub=np.array(rows),
        b_ub=np.array(rhs),
        bounds=[(None, None)] * len(names),
        method="highs",
    )
    return res.status == 0


def feasible_for_large(region: LogRegion, param: str) -> bool:
    """Whether the real relaxation of ``region`` is nonempty at a large parameter."""
    return _lp_feasible(region.inequalities, param, LARGE_K)


@lru_cache(maxsize=200_000)
def _project(ineqs: tuple[Inequality, ...], v: str) -> LogRegion:
    return LogRegion(tuple(fm_eliminate(ineqs, v)))


# --------------------------------------------------------------------------- elimination


def _bound_monomial(q: Inequality, v: str) -> Monomial:
    """The bound on ``v`` expressed by row ``q`` as a monomial in the other variables."""
    cv = Fraction(q.coeff(v))
    powers = {k: Fraction(-c) / cv for k, c in q.coeffs if k != v}
    return Monomial.of(powers, Fraction(q.bound) / cv)


def _subst(m: Monomial, v: str, repl: Monomial) -> Monomial:
    p = m.power_of(v)
    if p == 0:
        return m
    return Monomial.of({k: e for k, e in m.powers if k != v}, m.coef) * repl ** p


def _choices(bounds: list[Monomial], smallest: bool) -> list[tuple[Monomial, list[Constraint]]]:
    """Cover of the region by which bound is active (overlaps are harmless here)."""
    if len(bounds) == 1:
        return [(bounds[0], [])]
    out = []
    for i, b in enumerate(bounds):
        rel = Relation.LE if smallest else Relation.GE
        out.append((b, [Constraint(b, rel, o) for j, o in enumerate(bounds) if j != i]))
    return out


@lru_cache(maxsize=200_000)
def _elimination_plan(
    region: LogRegion, v: str, sign: int
) -> Union[tuple[tuple[Optional[Monomial], Optional[Monomial], tuple[Constraint, ...], LogRegion], ...], Divergent]:
    """Active-bound cover for summing ``v`` with an exponent of the given sign.

    Depends only on the region, so it is shared by every summand.
    """
    uppers, lowers = [], []
    for q in region.involving(v):
        (uppers if q.coeff(v) > 0 else lowers).append(_bound_monomial(q, v))
    uppers = list(dict.fromkeys(uppers))
    lowers = list(dict.fromkeys(lowers))
    if sign >= 0 and not uppers:
        return Divergent(v, "upper")
    if sign <= 0 and not lowers:
        return Divergent(v, "lower")
    ups = _choices(uppers, True) if sign >= 0 else [(None, [])]
    lows = _choices(lowers, False) if sign <= 0 else [(None, [])]
    out = []
    for (u, ucs), (lo, lcs) in itertools.product(ups, lows):
        extra = tuple(ucs + lcs)
        reg = region & linearize(extra) if extra else region
        out.append((u, lo, extra, _project(reg.inequalities, v)))
    return tuple(out)


def eliminate_var(
    b: Branch, region: LogRegion, v: str
) -> Union[list[Elimination], Divergent]:
    """Sum ``v`` out of a branch in closed form.

    Each result covers the part of the region where one particular bound
    on ``v`` is active; the returned region no longer mentions ``v``.
    """
    mono = b.monomial
    c = mono.power_of(v)
    if not isinstance(c, Fraction):
        raise TypeError(f"exponent of {v} is symbolic; substitute parameters first")
    plan = _elimination_plan(region, v, (c > 0) - (c < 0))
    if isinstance(plan, Divergent):
        return plan
    out = []
    for u, lo, extra, reg in plan:
        if c > 0:
            summand = _subst(mono, v, u)
            extents = tuple(_subst(e, v, u) for e in b.extents)
            tag, extent = f"{v}->{u}", None
        elif c < 0:
            summand = _subst(mono, v, lo)
            extents = tuple(_subst(e, v, lo) for e in b.extents)
            tag, extent = f"{v}->{lo}", None
        else:
            summand = mono
            extents = tuple(
                _subst(e, v, u if e.power_of(v) > 0 else lo) for e in b.extents
            ) + (u / lo,)
            tag, extent = f"{v} in [{lo}, {u}]", (u, lo)
        nb = Branch(Summand([summand]), b.extra_constraints + extra, b.provenance + (tag,), extents)
        out.append(Elimination(nb, reg, extent))
    return out


def _param_power(m: Monomial, param: str) -> Fraction:
    p = m.power_of(param)
    leftover = m.variables - {param}
    if leftover:
        raise NotEliminable(f"variables {sorted(leftover)} survived elimination")
    return p


# The search below works on ``{variable: power}`` dicts; the key "" holds
# log2 of the constant.  It applies the same rule as eliminate_var.

_Lin = dict


@lru_cache(maxsize=100_000)
def _as_lin(m: Monomial) -> tuple[tuple[str, Fraction], ...]:
    return (("", m.coef),) + m.powers


def _lin_of(m: Monomial) -> _Lin:
    return dict(_as_lin(m))


def _lin_subst(m: _Lin, v: str, repl: Optional[Monomial]) -> _Lin:
    p = m.get(v)
    if not p:
        return m
    out = dict(m)
    del out[v]
    for k, e in _as_lin(repl):
        out[k] = out.get(k, 0) + p * e
    return out


def _lin_power(m: _Lin, param: str) -> Fraction:
    leftover = sorted(k for k, e in m.items() if k not in ("", param) and e != 0)
    if leftover:
        raise NotEliminable(f"variables {leftover} survived elimination")
    return Fraction(m.get(param, 0))


def _describe(prov: tuple) -> str:
    parts = []
    for t in prov:
        if isinstance(t, str):
            if t:
                parts.append(t)
        elif t[1] is None:
            parts.append(f"{t[0]} in [{t[3]}, {t[2]}]")
        else:
            parts.append(f"{t[0]}->{t[1]}")
    return "; ".join(parts)


def symbolic_growth(
    branches: Iterable[Branch],
    region: LogRegion,
    param: str,
    elimination_order: Sequence[str],
    budget: int = BRANCH_BUDGET,
) -> SymbolicGrowth:
    """Exact growth exponent of ``sum over branches`` in the parameter.

    Raises :class:`NotEliminable` when the branch budget is exhausted.
    """
    best: Optional[tuple[Fraction, int]] = None
    best_prov: tuple = ()
    visited = 0
    depth_max = len(elimination_order)
    for root in branches:
        reg0 = region & linearize(root.extra_constraints)
        if not feasible_for_large(reg0, param):
            continue
        stack = [(_lin_of(root.monomial), tuple(_lin_of(e) for e in root.extents), reg0, 0, root.provenance)]
        while stack:
            mono, extents, reg, depth, prov = stack.pop()
            visited += 1
            if visited > budget:
                raise NotEliminable(f"more than {budget} branches")
            if depth == depth_max:
                exp = _lin_power(mono, param)
                logs = sum(1 for e in extents if _lin_power(e, param) > 0)
                if best is None or (exp, logs) > best:
                    best, best_prov = (exp, logs), prov
                continue
            v = elimination_order[depth]
            c = mono.get(v, 0)
            plan = _elimination_plan(reg, v, (c > 0) - (c < 0))
            if isinstance(plan, Divergent):
                return SymbolicGrowth(
                    None, 0, divergent=True,
                    detail=f"{plan} ({_describe(prov)})", branches=visited,
                )
            children = []
            for u, lo, _, sub in plan:
                if not feasible_for_large(sub, param):
                    continue
                if c > 0:
                    m2 = _lin_subst(mono, v, u)
                    ex2 = tuple(_lin_subst(e, v, u) for e in extents)
                    tag = (v, u, None, None)
                elif c < 0:
                    m2 = _lin_subst(mono, v, lo)
                    ex2 = tuple(_lin_subst(e, v, lo) for e in extents)
                    tag = (v, lo, None, None)
                else:
                    m2 = mono
                    ex2 = tuple(
                        _lin_subst(e, v, u if e.get(v, 0) > 0 else lo) for e in extents
                    ) + (_lin_of(u / lo),)
                    tag = (v, None, u, lo)
                children.append((m2, ex2, sub, depth + 1, prov + (tag,)))
            stack.extend(reversed(children))
    if best is None:
        return SymbolicGrowth(None, 0, empty=True, detail="empty region", branches=visited)
    return SymbolicGrowth(best[0], best[1], detail=_describe(best_prov), branches=visited)
