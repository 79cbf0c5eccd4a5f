"""Numeric evaluation of truncated dyadic sums and growth classification.

A :class:`Problem` is summed exactly over the lattice points of its region
inside the box ``[-K, K]`` (in log2 coordinates), with the growth
parameter fixed.  Repeating this along a ladder of parameter values and
fitting ``log2(sum)`` against ``kN`` estimates the growth exponent; the
closed-form reducer is tried first and is authoritative when it applies.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .constraints import (
    Constraint,
    Inequality,
    Relation,
    SlackConfig,
    constraint_holds,
    fm_eliminate,
    linearize,
)
from .expr import DyadicVar, Max, Min, Mono, Monomial, Role, Summand, eval_points
from .reducer import NotEliminable, SymbolicGrowth, split, symbolic_growth

__all__ = [
    "Classification",
    "CostGuardError",
    "EngineConfig",
    "GrowthVerdict",
    "LadderResult",
    "Problem",
    "brute_force_sum",
    "classify",
    "cutoff_converged",
    "growth_estimate",
    "symbolic_for",
    "truncated_sum",
    "verdict",
]

# FM projections larger than this fall back to dropping rows.
PROJECTION_CAP = 400
# Refuse enumerations with more lattice points than this.
MAX_POINTS = 10**8
# rows enumerated at once; bounds memory to a few hundred MB
CHUNK_POINTS = 1 << 21


class CostGuardError(RuntimeError):
    pass


@dataclass(frozen=True)
class Problem:
    summand: Summand
    constraints: tuple[Constraint, ...]
    variables: tuple[DyadicVar, ...]
    param: DyadicVar
    slack: SlackConfig = field(default_factory=SlackConfig)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names) or self.param.name in names:
            raise ValueError("variable names must be distinct")
        known = set(names) | {self.param.name}
        for c in self.constraints:
            extra = sorted(c.variables - known)
            if extra:
                raise ValueError(f"constraint {c} uses undeclared {extra[0]!r}")
        extra = sorted(self.summand.variables - known)
        if extra:
            raise ValueError(f"summand uses undeclared {extra[0]!r}")
        if not any(self.param.name in c.variables for c in self.constraints):
            raise ValueError(f"parameter {self.param.name!r} appears in no constraint")

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables if v.role is Role.SUM]

    def with_constraints(self, cs: Sequence[Constraint]) -> "Problem":
        return Problem(self.summand, tuple(cs), self.variables, self.param, self.slack)

    def with_slack(self, slack: SlackConfig) -> "Problem":
        return Problem(self.summand, self.constraints, self.variables, self.param, slack)


@dataclass(frozen=True)
class EngineConfig:
    ladder: tuple[int, int] = (4, 12)
    cutoff: int = 64
    tol: Fraction = Fraction(1, 20)
    engine: str = "both"  # symbolic | numeric | both
    # the cutoff-convergence check compares the sums at these fractions of K
    cutoff_fractions: tuple[Fraction, ...] = (Fraction(1, 2), Fraction(3, 4), Fraction(1))

    def __post_init__(self):
        lo, hi = self.ladder
        if hi - lo + 1 < 5:
            raise ValueError("the parameter ladder needs at least 5 points")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.engine not in ("symbolic", "numeric", "both"):
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def kn_ladder(self) -> list[int]:
        return list(range(self.ladder[0], self.ladder[1] + 1))

    @property
    def k_ladder(self) -> list[int]:
        return sorted({max(1, int(f * self.cutoff)) for f in self.cutoff_fractions})


# --------------------------------------------------------------------------- enumeration


def _relaxed_rows(c: Constraint, slack: SlackConfig) -> list[Constraint]:
    """Monomial constraints implied by ``c`` (all of ``c`` when it is monomial)."""
    if c.is_monomial():
        return [c]
    r = c.rel
    if r in (Relation.GTRSIM, Relation.GG, Relation.GE):
        return _relaxed_rows(Constraint(c.rhs, r.flipped, c.lhs), slack)
    if r is Relation.SIM:
        return _relaxed_rows(Constraint(c.lhs, Relation.LESSSIM, c.rhs), slack) + _relaxed_rows(
            Constraint(c.rhs, Relation.LESSSIM, c.lhs), slack
        )
    # lhs <= rhs up to slack: a max on the left or a min on the right is a conjunction
    lefts = _conjuncts(c.lhs, Max)
    rights = _conjuncts(c.rhs, Min)
    if lefts is None or rights is None:
        return []
    return [Constraint(a, r, b) for a in lefts for b in rights]


def _conjuncts(side, kind) -> Optional[list[Monomial]]:
    if isinstance(side, Monomial):
        return [side]
    if isinstance(side, kind) and side.power > 0:
        return [a ** side.power for a in side.args]
    other = Min if kind is Max else Max
    if isinstance(side, other) and side.power < 0:
        # min{a, b}^-p = max{a^-p, b^-p}
        return [a ** side.power for a in side.args]
    return None


def _scaled_logs(side, index: dict[str, int], pts: np.ndarray, scale: int) -> np.ndarray:
    def col(m: Monomial) -> np.ndarray:
        c, p = m.log2_form()
        out = np.full(pts.shape[0], int(c * scale), dtype=np.int64)
        for k, v in p.items():
            out = out + int(v * scale) * pts[:, index[k]]
        return out

    if isinstance(side, Monomial):
        return col(side)
    cols = np.stack([col(a ** side.power) for a in side.args])
    smallest = isinstance(side, Min) == (side.power > 0)
    return cols.min(axis=0) if smallest else cols.max(axis=0)


def _side_denominators(side) -> list[int]:
    monos = [side] if isinstance(side, Monomial) else [a ** side.power for a in side.args]
    out = []
    for m in monos:
        c, p = m.log2_form()
        out.append(c.denominator)
        out.extend(v.denominator for v in p.values())
    return out


def _holds_vec(c: Constraint, slack: SlackConfig, index, pts) -> np.ndarray:
    d = math.lcm(*_side_denominators(c.lhs), *_side_denominators(c.rhs))
    diff = _scaled_logs(c.lhs, index, pts, d) - _scaled_logs(c.rhs, index, pts, d)
    r = c.rel
    if r is Relation.LESSSIM:
        return diff <= slack.c_lesssim * d
    if r is Relation.GTRSIM:
        return -diff <= slack.c_lesssim * d
    if r is Relation.SIM:
        return np.abs(diff) <= slack.c_sim * d
    if r is Relation.LL:
        return diff <= -slack.gap_ll * d
    if r is Relation.GG:
        return diff >= slack.gap_ll * d
    if r is Relation.LE:
        return diff <= 0
    return diff >= 0


@dataclass
class _Component:
    names: list[str]
    summand: Summand
    levels: list[list[Inequality]]  # rows bounding names[j] in terms of names[:j]
    exact: list[Constraint]  # min/max constraints checked pointwise


class _Plan:
    """Problem compiled for enumeration, independent of ``kN`` and ``K``."""

    def __init__(self, p: Problem):
        self.problem = p
        self.param = p.param.name
        names = p.names
        relaxed: list[Constraint] = []
        exact: list[Constraint] = []
        for c in p.constraints:
            relaxed.extend(_relaxed_rows(c, p.slack))
            if not c.is_monomial():
                exact.append(c)
        region = linearize(relaxed, p.slack)
        self.param_rows = [q for q in region.inequalities if q.variables <= {self.param}]

        # connected components over shared rows and non-monomial factors
        parent = {v: v for v in names}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        def join(vs):
            vs = [v for v in vs if v in parent]
            for a, b in zip(vs, vs[1:]):
                parent[find(a)] = find(b)

        for q in region.inequalities:
            join(sorted(q.variables))
        for c in exact:
            join(sorted(c.variables))
        for f in p.summand.factors:
            if not isinstance(f, Mono):
                join(sorted(f.variables))
        groups: dict[str, list[str]] = {}
        for v in names:
            groups.setdefault(find(v), []).append(v)
        self.single = len(groups) == 1

        mono = p.summand.monomial
        self.components: list[_Component] = []
        for comp in groups.values():
            cset = set(comp)
            if self.single:
                s = p.summand
            else:
                fs: list = [Mono(Monomial.of({k: e for k, e in mono.powers if k in cset}))]
                fs += [f for f in p.summand.factors if not isinstance(f, Mono) and f.variables & cset]
                s = Summand(fs)
            rows = [q for q in region.inequalities if q.variables & cset]
            self.components.append(
                _Component(comp, s, _levels(rows, comp), [c for c in exact if c.variables & cset])
            )
        if self.single:
            self.const = None
        else:
            fs = [Mono(Monomial.of({k: e for k, e in mono.powers if k == self.param}, mono.coef))]
            fs += [f for f in p.summand.factors if not isinstance(f, Mono) and not f.variables & set(names)]
            self.const = Summand(fs)

    def param_ok(self, kn: int) -> bool:
        return all(q.holds({self.param: kn}) for q in self.param_rows)

    def points(self, comp: _Component, kn: int, K: int) -> Iterator[np.ndarray]:
        """Lattice points of the component in lexicographic order, in blocks.

        A level whose expansion would exceed CHUNK_POINTS rows is split into
        row blocks first, so memory stays bounded however large the region.
        """
        budget = [MAX_POINTS] * len(comp.names)  # per level, as a single expansion would count
        yield from self._expand(comp, np.zeros((1, 0), dtype=np.int64), 0, kn, K, budget)

    def _expand(self, comp: _Component, pts: np.ndarray, j: int, kn: int, K: int,
                budget: list[int]) -> Iterator[np.ndarray]:
        if j == len(comp.names):
            yield self._filter_exact(comp, pts, kn)
            return
        v = comp.names[j]
        m = pts.shape[0]
        lo = np.full(m, -K, dtype=np.int64)
        hi = np.full(m, K, dtype=np.int64)
        for q in comp.levels[j]:
            rest = np.zeros(m, dtype=np.int64)
            cv = 0
            for k, c in q.coeffs:
                if k == v:
                    cv = c
                elif k == self.param:
                    rest = rest + c * kn
                else:
                    rest = rest + c * pts[:, comp.names.index(k)]
            num = q.bound - rest
            if cv > 0:
                hi = np.minimum(hi, num // cv)
            else:
                lo = np.maximum(lo, -(num // -cv))
        counts = np.maximum(hi - lo + 1, 0)
        ends = np.cumsum(counts)
        # split rows so each block expands to at most CHUNK_POINTS (a single row is at most 2K+1)
        cuts = [0]
        while cuts[-1] < m:
            base = int(ends[cuts[-1] - 1]) if cuts[-1] else 0
            nxt = int(np.searchsorted(ends, base + CHUNK_POINTS, side="right"))
            cuts.append(max(nxt, cuts[-1] + 1))
        for a, b in zip(cuts, cuts[1:]):
            c = counts[a:b]
            total = int(c.sum())
            if total == 0:
                continue
            budget[j] -= total
            if budget[j] < 0:
                raise CostGuardError(f"more than {MAX_POINTS} lattice points at variable {v}")
            starts = np.repeat(lo[a:b], c)
            offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(c) - c, c)
            block = np.concatenate([np.repeat(pts[a:b], c, axis=0), (starts + offsets)[:, None]], axis=1)
            yield from self._expand(comp, block, j + 1, kn, K, budget)

    def _filter_exact(self, comp: _Component, pts: np.ndarray, kn: int) -> np.ndarray:
        if comp.exact and pts.shape[0]:
            index = {k: i for i, k in enumerate(comp.names)}
            index[self.param] = len(comp.names)
            full = np.concatenate([pts, np.full((pts.shape[0], 1), kn, dtype=np.int64)], axis=1)
            keep = np.ones(pts.shape[0], dtype=bool)
            for c in comp.exact:
                keep &= _holds_vec(c, self.problem.slack, index, full)
            pts = pts[keep]
        return pts

    def terms(self, comp: _Component, pts: np.ndarray, kn: int) -> np.ndarray:
        full = np.concatenate([pts, np.full((pts.shape[0], 1), kn, dtype=np.int64)], axis=1)
        return eval_points(comp.summand, comp.names + [self.param], full)

    def sums(self, kn: int, ks: Sequence[int]) -> list[float]:
        """Truncated sums for every cutoff in ``ks`` from one enumeration."""
        if not self.param_ok(kn):
            return [0.0 for _ in ks]
        top = max(ks)
        totals = [1.0 for _ in ks]
        for comp in self.components:
            # fsum per block, then over blocks; a single block is exactly rounded
            parts: list[list[float]] = [[] for _ in ks]
            for pts in self.points(comp, kn, top):
                t = self.terms(comp, pts, kn)
                reach = np.abs(pts).max(axis=1) if pts.shape[1] else np.zeros(pts.shape[0], dtype=np.int64)
                for i, K in enumerate(ks):
                    parts[i].append(math.fsum(t if K == top else t[reach <= K]))
            for i in range(len(ks)):
                totals[i] *= math.fsum(parts[i])
        if self.const is not None:
            c = float(eval_points(self.const, [self.param], np.array([[kn]]))[0])
            totals = [x * c for x in totals]
        return totals


def _levels(rows: list[Inequality], names: list[str]) -> list[list[Inequality]]:
    proj = [q for q in rows]
    levels: list[list[Inequality]] = [[] for _ in names]
    for j in range(len(names) - 1, -1, -1):
        v = names[j]
        levels[j] = [q for q in proj if q.coeff(v) != 0]
        nxt = fm_eliminate(proj, v)
        if len(nxt) > PROJECTION_CAP:
            nxt = [q for q in proj if q.coeff(v) == 0]
        proj = nxt
    return levels


_PLANS: dict[Problem, _Plan] = {}


def _plan(p: Problem) -> _Plan:
    plan = _PLANS.get(p)
    if plan is None:
        if len(_PLANS) > 256:
            _PLANS.clear()
        plan = _PLANS[p] = _Plan(p)
    return plan


def truncated_sum(p: Problem, kN: int, K: int) -> float:
    """Exact sum over the region with every summation variable in ``[-K, K]``."""
    if K <= 0:
        raise ValueError("cutoff must be positive")
    return _plan(p).sums(kN, [K])[0]


def brute_force_sum(p: Problem, kN: int, K: int) -> float:
    """Reference for :func:`truncated_sum`: full box, pointwise filter."""
    names = p.names
    keep = []
    for ks in itertools.product(range(-K, K + 1), repeat=len(names)):
        point = dict(zip(names, ks))
        point[p.param.name] = kN
        if all(constraint_holds(c, point, p.slack) for c in p.constraints):
            keep.append(ks + (kN,))
    if not keep:
        return 0.0
    pts = np.array(keep, dtype=np.int64)
    return math.fsum(eval_points(p.summand, names + [p.param.name], pts))


def _converged(sums: Sequence[float]) -> bool:
    """Top-of-ladder change below 1%, or a geometric tail that stays below 1%."""
    if len(sums) < 2:
        return True
    a, b = sums[-2], sums[-1]
    if b == 0:
        return True
    if abs(b - a) < 0.01 * abs(b):
        return True
    if len(sums) >= 3:
        d1, d2 = sums[-2] - sums[-3], b - a
        if d1 > 0 and d2 >= 0:
            rho = d2 / d1
            if rho <= 0.9 and d2 * rho / (1 - rho) < 0.01 * b:
                return True
    return False


def cutoff_converged(p: Problem, kN: int, K_ladder: Sequence[int]) -> bool:
    ks = sorted(K_ladder)
    return _converged(_plan(p).sums(kN, ks))


# --------------------------------------------------------------------------- growth


@dataclass(frozen=True)
class LadderResult:
    points: tuple[tuple[int, float], ...]
    fitted_exponent: float
    log_degree_estimate: int
    fit_quality: float
    divergent_at: tuple[int, ...] = ()
    empty: bool = False


def _lsq(x: np.ndarray, y: np.ndarray, cols) -> tuple[np.ndarray, float]:
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sum((A @ coef - y) ** 2))
    return coef, res


# larger offsets let the log term soak up the slow drift of fractional-power sums
_LOG_OFFSETS = (0.0, 1.0, 2.0, 4.0)


def _fit(points: Sequence[tuple[int, float]], tol: float) -> tuple[float, int, float]:
    pos = [(k, s) for k, s in points if s > 0]
    if len(pos) < 3:
        return float("-inf") if not pos else 0.0, 0, 0.0
    x = np.array([k for k, _ in pos], dtype=float)
    y = np.log2([s for _, s in pos])
    one = np.ones_like(x)
    c1, r1 = _lsq(x, y, [one, x])
    # range lengths grow like kN + const, so scan a few offsets for the log term
    c2, r2 = min((_lsq(x, y, [one, x, np.log2(x + off)]) for off in _LOG_OFFSETS),
                 key=lambda cr: cr[1])
    # the log term doubles as a correction for slow pre-asymptotic drift;
    # it counts as a log factor only on top of a flat power part
    use_log = r2 * 10 < r1 and c2[2] >= 0.5
    slope, res = (c2[1], r2) if use_log else (c1[1], r1)
    logdeg = 1 if use_log and abs(slope) <= tol else 0
    # flat ladders have no variance to explain; floor the denominator at the tolerance
    ss_tot = max(float(np.sum((y - y.mean()) ** 2)), len(y) * tol**2)
    return float(slope), logdeg, max(0.0, 1.0 - res / ss_tot)


def growth_estimate(p: Problem, kN_ladder: Sequence[int], cutoff_policy=None) -> LadderResult:
    """Sums along the parameter ladder and a log-log fit.

    ``cutoff_policy`` is an :class:`EngineConfig` (its cutoff ladder is
    used for the divergence check) or ``None`` for the defaults.
    """
    cfg = cutoff_policy or EngineConfig()
    ks = cfg.k_ladder
    plan = _plan(p)
    points, divergent = [], []
    for kn in sorted(kN_ladder):
        sums = plan.sums(kn, ks)
        if not _converged(sums):
            divergent.append(kn)
        points.append((kn, sums[-1]))
    if all(s == 0 for _, s in points):
        return LadderResult(tuple(points), float("-inf"), 0, 1.0, tuple(divergent), empty=True)
    slope, logdeg, q = _fit(points, float(cfg.tol))
    return LadderResult(tuple(points), slope, logdeg, q, tuple(divergent))


# --------------------------------------------------------------------------- verdicts


class Classification(enum.Enum):
    BOUNDED = "Bounded"
    UNBOUNDED = "Unbounded"
    LOG_DIVERGENT = "LogDivergent"
    INCONCLUSIVE = "Inconclusive"

    @property
    def exit_code(self) -> int:
        return _EXIT[self]


_EXIT = {
    Classification.BOUNDED: 0,
    Classification.UNBOUNDED: 1,
    Classification.LOG_DIVERGENT: 2,
    Classification.INCONCLUSIVE: 3,
}


@dataclass(frozen=True)
class GrowthVerdict:
    classification: Classification
    exponent: float
    log_degree: int = 0
    ladder: Optional[LadderResult] = None
    symbolic: Optional[SymbolicGrowth] = None
    divergent: bool = False
    notes: tuple[str, ...] = ()

    @property
    def evidence(self) -> str:
        if self.divergent:
            return "divergent at fixed parameter"
        if self.exponent == float("-inf"):
            return "empty region"
        return "growth in parameter" if self.classification is Classification.UNBOUNDED else "bounded"


def classify(exponent, log_degree: int, tol) -> Classification:
    """Sign of the exponent outside the tolerance band, log factors inside it."""
    if exponent > tol:
        return Classification.UNBOUNDED
    if exponent < -tol:
        return Classification.BOUNDED
    return Classification.LOG_DIVERGENT if log_degree else Classification.BOUNDED


def symbolic_for(p: Problem, order: Optional[Sequence[str]] = None) -> SymbolicGrowth:
    """Split the problem and run the closed-form elimination (innermost first)."""
    branches = split(p.summand, p.constraints)
    region = linearize([c for c in p.constraints if c.is_monomial()], p.slack)
    order = list(order) if order is not None else list(reversed(p.names))
    return symbolic_growth(branches, region, p.param.name, order)


def _from_symbolic(g: SymbolicGrowth) -> GrowthVerdict:
    if g.divergent:
        return GrowthVerdict(Classification.UNBOUNDED, float("inf"), 0, symbolic=g, divergent=True,
                             notes=(g.detail,))
    if g.empty:
        return GrowthVerdict(Classification.BOUNDED, float("-inf"), 0, symbolic=g, notes=("empty region",))
    cls = classify(g.exponent, g.log_degree, 0)
    return GrowthVerdict(cls, float(g.exponent), g.log_degree, symbolic=g)


def _from_ladder(lr: LadderResult, tol: float) -> GrowthVerdict:
    if lr.divergent_at:
        return GrowthVerdict(Classification.UNBOUNDED, float("inf"), 0, ladder=lr, divergent=True,
                             notes=(f"cutoff sums do not settle at kN={lr.divergent_at[0]}",))
    if lr.empty:
        return GrowthVerdict(Classification.BOUNDED, float("-inf"), 0, ladder=lr, notes=("empty region",))
    if lr.fit_quality < 0.9:
        return GrowthVerdict(Classification.INCONCLUSIVE, lr.fitted_exponent, lr.log_degree_estimate,
                             ladder=lr, notes=(f"fit quality {lr.fit_quality:.3f} < 0.9",))
    cls = classify(lr.fitted_exponent, lr.log_degree_estimate, tol)
    return GrowthVerdict(cls, lr.fitted_exponent, lr.log_degree_estimate, ladder=lr)


def verdict(p: Problem, config: EngineConfig = EngineConfig()) -> GrowthVerdict:
    """Symbolic result when available, numeric ladder otherwise (or as a cross-check)."""
    tol = float(config.tol)
    sym: Optional[GrowthVerdict] = None
    notes: list[str] = []
    if config.engine in ("symbolic", "both"):
        try:
            sym = _from_symbolic(symbolic_for(p))
        except NotEliminable as e:
            notes.append(f"symbolic elimination unavailable: {e}")
    if config.engine == "symbolic" and sym is not None:
        return sym
    if sym is not None and config.engine == "both":
        try:
            num = _from_ladder(growth_estimate(p, config.kn_ladder, config), tol)
        except CostGuardError as e:
            return _replace(sym, notes=sym.notes + (f"numeric check skipped: {e}",))
        if num.classification is not sym.classification:
            notes.append(
                f"numeric ladder disagrees: {num.classification.value} exponent {num.exponent:.4f}"
            )
        elif not sym.divergent and math.isfinite(sym.exponent) and abs(num.exponent - sym.exponent) > 0.1:
            notes.append(f"numeric ladder agrees on {num.classification.value}; "
                         f"fitted exponent {num.exponent:.4f} is off by more than 0.1")
        return _replace(sym, ladder=num.ladder, notes=sym.notes + tuple(notes))
    try:
        num = _from_ladder(growth_estimate(p, config.kn_ladder, config), tol)
    except CostGuardError as e:
        return GrowthVerdict(Classification.INCONCLUSIVE, float("nan"), 0, notes=tuple(notes) + (str(e),))
    return _replace(num, notes=tuple(notes) + num.notes)


def _replace(v: GrowthVerdict, **kw) -> GrowthVerdict:
    from dataclasses import replace

    return replace(v, **kw)
