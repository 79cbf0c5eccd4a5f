"""Case analysis for the bilinear X^{s,theta} estimates, compiled into Problems.

Each estimate reduces to a low-modulation sum (``H ~ Lmax``) and a
high-modulation sum (``Lmax ~ Lmed >> H``) of

    weight(N1, N2, N3, L1, L2, L3) * (multiplier norm bound)

over dyadic frequencies and modulations.  The norm bounds are taken as
given (one formula per subcase) and the indices 1, 2, 3 are assigned to
the ordered role variables ``Nmax >= Nmed >= Nmin`` and
``Lmin <= Lmed <= Lmax`` in every way the subcase allows.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .constraints import Constraint, Relation, SlackConfig
from .expr import Bracket, DyadicVar, Min, Mono, Monomial, Role, Summand, as_fraction
from .engine import Classification, EngineConfig, GrowthVerdict, Problem, verdict

__all__ = [
    "EstimateCase",
    "EstimateKind",
    "Modulation",
    "PARAM",
    "ROLE_VARS",
    "Subcase",
    "SweepRow",
    "Triple",
    "VerifyResult",
    "build_cases",
    "build_problems_with_cases",
    "case_problem",
    "build_problems",
    "epsilon",
    "exact_exponent",
    "is_admissible",
    "is_boundary",
    "norm_bound",
    "rational_range",
    "reference",
    "satisfies_23ts",
    "structural_constraints",
    "sweep",
    "verify_estimate",
    "weight",
]

# declaration order; elimination runs from the end (Lmin first)
ROLE_VARS = ("Nmax", "Nmed", "Nmin", "Lmax", "H", "Lmed", "Lmin")
PARAM = "N"

_N_ROLES = ("Nmax", "Nmed", "Nmin")
_L_ROLES = ("Lmin", "Lmed", "Lmax")


@dataclass(frozen=True)
class Triple:
    n: int
    s: Fraction
    theta: Fraction

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension n must be 2 or 3, got {self.n}")
        object.__setattr__(self, "s", as_fraction(self.s))
        object.__setattr__(self, "theta", as_fraction(self.theta))

    def __str__(self) -> str:
        return f"({self.n}, {self.s}, {self.theta})"


class EstimateKind(enum.Enum):
    CUCV = "cucv"  # conj(u) conj(v), the (+++) case
    UV = "uv"  # u v, the (++-) case
    CUV = "cuv"  # conj(u) v, (++-) after relabelling
    OMEGA_CUV = "omegacuv"  # omega-weighted variant, coherence subcase only

    @property
    def plus_plus_plus(self) -> bool:
        return self is EstimateKind.CUCV


class Modulation(enum.Enum):
    LOW = "low"
    HIGH = "high"


class Subcase(enum.Enum):
    PPP = "+++"
    SEPARATED = "++-1"
    COHERENCE = "++-2"
    GENERIC = "++-3"


# size pattern -> (index forced to be the smallest frequency, strict gap)
PATTERNS = {
    "any": (None, None),
    "N1~N2>>N3": (3, True),
    "N1~N3>>N2": (2, True),
    "N2~N3>>N1": (1, True),
    "N1~N2~N3": (None, False),
    "N1~N3>~N2": (2, False),
    "N2~N3>~N1": (1, False),
}


@dataclass(frozen=True)
class EstimateCase:
    kind: EstimateKind
    modulation: Modulation
    subcase: Subcase
    pattern: str
    n_roles: tuple[str, str, str]  # role variable of N1, N2, N3
    l_roles: tuple[str, str, str]  # role variable of L1, L2, L3

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"unknown size pattern {self.pattern!r}")
        if sorted(self.n_roles) != sorted(_N_ROLES) or sorted(self.l_roles) != sorted(_L_ROLES):
            raise ValueError("roles must be permutations of the role variables")
        smallest, _ = PATTERNS[self.pattern]
        if smallest is not None and self.n_roles[smallest - 1] != "Nmin":
            raise ValueError(f"pattern {self.pattern} needs N{smallest} = Nmin")
        if self.subcase is Subcase.COHERENCE:
            if self.modulation is not Modulation.LOW:
                raise ValueError("the coherence subcase needs low modulation")
            if self.l_roles[smallest - 1] != "Lmax":
                raise ValueError("coherence needs H ~ L_j with L_j the largest modulation")
        if (self.subcase is Subcase.PPP) != self.kind.plus_plus_plus:
            raise ValueError(f"subcase {self.subcase.value} does not apply to {self.kind.value}")

    def label(self) -> str:
        n = ",".join(f"N{i + 1}={r}" for i, r in enumerate(self.n_roles))
        l = ",".join(f"L{i + 1}={r}" for i, r in enumerate(self.l_roles))
        return f"{self.modulation.value} {self.subcase.value} {self.pattern} [{n}; {l}]"


# --------------------------------------------------------------------------- admissibility


def is_admissible(t: Triple) -> bool:
    """The admissible region: two clauses for n = 2, one for n = 3."""
    n, s, th = t.n, t.s, t.theta
    if n not in (2, 3):
        raise ValueError(f"dimension n must be 2 or 3, got {n}")
    if not th > Fraction(1, 2) or not s < 0:
        return False
    if n == 2:
        if th == Fraction(3, 4):
            return s > Fraction(-1, 2)
        return max(th - Fraction(5, 4), 2 * th - 2) <= s
    return 2 * th - Fraction(3, 2) <= s


def satisfies_23ts(t: Triple) -> bool:
    return t.n in (2, 3) and t.theta > Fraction(1, 2) and (t.theta - 1) / 2 < t.s < 0


def reference(kind: EstimateKind, t: Triple) -> bool:
    """The condition under which the estimate is claimed to hold."""
    if kind in (EstimateKind.CUCV, EstimateKind.UV):
        return is_admissible(t)
    return satisfies_23ts(t)


def is_boundary(kind: EstimateKind, t: Triple, width: Fraction = Fraction(1, 100)) -> bool:
    """Within ``width`` of an edge of the reference region (including theta = 3/4 for n = 2)."""
    s, th = t.s, t.theta
    edges = []
    if t.n == 2:
        if abs(th - Fraction(3, 4)) <= width:
            return True
        edges += [th - Fraction(5, 4), 2 * th - 2]
    else:
        edges.append(2 * th - Fraction(3, 2))
    if kind in (EstimateKind.CUV, EstimateKind.OMEGA_CUV):
        edges.append((th - 1) / 2)
    return any(abs(s - e) <= width for e in edges)


def epsilon(t: Triple) -> Fraction:
    """Concrete epsilon for the generic bound; any value in (0, theta - 1/2) would do."""
    if t.n == 2:
        return Fraction(0)
    return min(Fraction(1, 16), (t.theta - Fraction(1, 2)) / 2)


# --------------------------------------------------------------------------- summands


def _v(name: str, p=1) -> Monomial:
    return Monomial.var(name, p)


def weight(kind: EstimateKind, roles, t: Triple) -> Summand:
    """The X^{s,theta} weight in role variables; ``roles`` is ``(n_roles, l_roles)``."""
    (n1, n2, n3), (l1, l2, l3) = roles
    s, th = t.s, t.theta
    if kind in (EstimateKind.CUCV, EstimateKind.UV):
        fs = [Bracket(_v(n1), -s), Bracket(_v(n2), -s), Bracket(_v(n3), s)]
        ls = _v(l1, -th) * _v(l2, -th) * _v(l3, th - 1)
    elif kind is EstimateKind.CUV:
        fs = [Bracket(_v(n1), -s), Bracket(_v(n2), s), Bracket(_v(n3), -s)]
        ls = _v(l1, -th) * _v(l2, th - 1) * _v(l3, -th)
    else:
        fs = [Bracket(_v(n1), -s), Mono(_v(n2, 2)), Bracket(_v(n2), s - 2), Bracket(_v(n3), -s)]
        ls = _v(l1, -th) * _v(l2, th - 1) * _v(l3, -th)
    return Summand([Mono(ls)] + fs)


def norm_bound(case: EstimateCase, t: Triple) -> Summand:
    """Multiplier norm bound of the subcase, in role variables and H."""
    half = Fraction(1, 2)
    core = _v("Lmin", half) * _v("Nmax", -half) * _v("Nmin", Fraction(t.n - 1, 2))
    H, Lmed, Nmin = _v("H"), _v("Lmed"), _v("Nmin")
    sc = case.subcase
    if sc in (Subcase.PPP, Subcase.SEPARATED):
        fs = [Min((_v("Nmax") * Nmin, Lmed), half)]
    elif sc is Subcase.COHERENCE:
        fs = [Min((H, H * Lmed / Nmin ** 2), half)]
    else:
        fs = [Min((H, Lmed), half), Min((Monomial(), H / Nmin ** 2), half - epsilon(t))]
    return Summand([Mono(core)] + fs)


def structural_constraints(case: EstimateCase) -> list[Constraint]:
    def c(a, rel, b) -> Constraint:
        a = _v(a) if isinstance(a, str) else a
        b = _v(b) if isinstance(b, str) else b
        return Constraint(a, Relation(rel), b)

    one = Monomial()
    out = [
        c("Nmax", "~", PARAM),
        c("Nmax", "~", "Nmed"),
        c("Nmed", "<=", "Nmax"),
        c("Nmin", "<=", "Nmed"),
        c("Lmin", "<=", "Lmed"),
        c("Lmed", "<=", "Lmax"),
        c("Lmin", ">~", one),
        c("Nmax", ">~", one),
    ]
    if case.modulation is Modulation.LOW:
        out.append(c("H", "~", "Lmax"))
    else:
        out += [c("Lmax", "~", "Lmed"), c("H", "<<", "Lmax")]

    n1, n2, _ = case.n_roles
    if case.kind.plus_plus_plus:
        out.append(c("H", "~", _v("Nmax", 2)))
    else:
        out.append(c("H", "<~", _v(n1) * _v(n2)))

    smallest, strict = PATTERNS[case.pattern]
    if strict:
        out.append(c("Nmin", "<<", "Nmed"))
    elif case.pattern == "N1~N2~N3":
        out.append(c("Nmin", "~", "Nmed"))

    if case.subcase is Subcase.SEPARATED:
        out.append(c("H", "~", _v(n1, 2)))
        if case.modulation is Modulation.HIGH:
            out.append(c(_v("Nmax", 2), "<<", "Lmax"))
    elif case.subcase is Subcase.COHERENCE:
        j = smallest - 1
        lj = case.l_roles[j]
        out.append(c("H", "~", lj))
        out += [c(lj, ">>", l) for i, l in enumerate(case.l_roles) if i != j]
        out.append(c("H", ">>", _v(case.n_roles[j], 2)))
    return out


# --------------------------------------------------------------------------- enumeration

_SUBCASE_PATTERNS = {
    Subcase.PPP: ("any",),
    Subcase.SEPARATED: ("N1~N2>>N3",),
    Subcase.COHERENCE: ("N1~N3>>N2", "N2~N3>>N1"),
    Subcase.GENERIC: ("N1~N2~N3", "N1~N3>~N2", "N2~N3>~N1"),
}


def build_cases(kind: EstimateKind) -> list[EstimateCase]:
    """Every (modulation, subcase, pattern, roles) combination the analysis needs."""
    if kind.plus_plus_plus:
        plan = [(m, Subcase.PPP) for m in Modulation]
    elif kind is EstimateKind.OMEGA_CUV:
        plan = [(Modulation.LOW, Subcase.COHERENCE)]
    else:
        plan = [
            (Modulation.LOW, Subcase.SEPARATED),
            (Modulation.LOW, Subcase.COHERENCE),
            (Modulation.LOW, Subcase.GENERIC),
            (Modulation.HIGH, Subcase.SEPARATED),
            (Modulation.HIGH, Subcase.GENERIC),
        ]
    out = []
    for mod, sc in plan:
        patterns = _SUBCASE_PATTERNS[sc]
        if kind is EstimateKind.OMEGA_CUV:
            patterns = patterns[:1]
        for pat in patterns:
            for nr in itertools.permutations(_N_ROLES):
                for lr in itertools.permutations(_L_ROLES):
                    try:
                        out.append(EstimateCase(kind, mod, sc, pat, nr, lr))
                    except ValueError:
                        continue
    return out


def case_problem(case: EstimateCase, t: Triple, slack: SlackConfig = SlackConfig()) -> Problem:
    summand = weight(case.kind, (case.n_roles, case.l_roles), t) * norm_bound(case, t)
    return Problem(
        summand=summand,
        constraints=tuple(structural_constraints(case)),
        variables=tuple(DyadicVar(v) for v in ROLE_VARS),
        param=DyadicVar(PARAM, Role.PARAM),
        slack=slack,
    )


def build_problems_with_cases(
    kind: EstimateKind, t: Triple, slack: SlackConfig = SlackConfig()
) -> list[tuple[Problem, list[EstimateCase]]]:
    """Distinct Problems, each with the cases that compile to it."""
    seen: dict[Problem, list[EstimateCase]] = {}
    for case in build_cases(kind):
        seen.setdefault(case_problem(case, t, slack), []).append(case)
    return list(seen.items())


def build_problems(kind: EstimateKind, t: Triple, slack: SlackConfig = SlackConfig()) -> list[Problem]:
    return [p for p, _ in build_problems_with_cases(kind, t, slack)]


# --------------------------------------------------------------------------- verification


@dataclass(frozen=True)
class VerifyResult:
    kind: EstimateKind
    triple: Triple
    classification: Classification
    exponent: Union[Fraction, float]  # exact when the symbolic engine decided it
    log_degree: int
    per_problem: tuple[tuple[tuple[EstimateCase, ...], GrowthVerdict], ...]
    reference: bool

    @property
    def match(self) -> bool:
        return (self.classification is Classification.BOUNDED) == self.reference

    def failing(self) -> list[tuple[tuple[EstimateCase, ...], GrowthVerdict]]:
        return [(cs, v) for cs, v in self.per_problem if v.classification is not Classification.BOUNDED]


def exact_exponent(v: GrowthVerdict) -> Union[Fraction, float]:
    """The symbolic exponent as a Fraction when there is one, else the float."""
    if v.symbolic is not None and v.symbolic.exponent is not None and not v.divergent:
        return v.symbolic.exponent
    return v.exponent


_RANK = {
    Classification.BOUNDED: 0,
    Classification.LOG_DIVERGENT: 1,
    Classification.INCONCLUSIVE: 2,
    Classification.UNBOUNDED: 3,
}


def verify_estimate(
    kind: EstimateKind, t: Triple, engine_config: EngineConfig = EngineConfig(),
    slack: SlackConfig = SlackConfig(),
) -> VerifyResult:
    """Verdict for every Problem of the estimate and the combined classification.

    The estimate is Bounded only if every Problem is.  An Unbounded Problem
    decides the estimate even when others are Inconclusive.
    """
    results = []
    for p, cases in build_problems_with_cases(kind, t, slack):
        results.append((tuple(cases), verdict(p, engine_config)))
    worst = max((v for _, v in results), key=lambda v: (_RANK[v.classification], v.exponent, v.log_degree))
    top = max((v for _, v in results), key=lambda v: (v.exponent, v.log_degree))
    return VerifyResult(
        kind, t, worst.classification, exact_exponent(top), top.log_degree, tuple(results),
        reference(kind, t),
    )


@dataclass(frozen=True)
class SweepRow:
    n: int
    s: Fraction
    theta: Fraction
    kind: EstimateKind
    verdict: Classification
    exponent: Union[Fraction, float]
    log_degree: int
    reference: bool
    boundary: bool

    @property
    def match(self) -> bool:
        return (self.verdict is Classification.BOUNDED) == self.reference


def sweep(
    kind: EstimateKind, n: int, s_grid: Iterable, theta_grid: Iterable,
    engine_config: EngineConfig = EngineConfig(engine="symbolic"),
) -> list[SweepRow]:
    rows = []
    for th in theta_grid:
        for s in s_grid:
            t = Triple(n, s, th)
            r = verify_estimate(kind, t, engine_config)
            rows.append(SweepRow(n, t.s, t.theta, kind, r.classification, r.exponent,
                                 r.log_degree, r.reference, is_boundary(kind, t)))
    return rows


def rational_range(lo, hi, step) -> list[Fraction]:
    """Inclusive arithmetic progression of exact rationals."""
    lo, hi, step = as_fraction(lo), as_fraction(hi), as_fraction(step)
    if step <= 0:
        raise ValueError("step must be positive")
    out, x = [], lo
    while x <= hi:
        out.append(x)
        x += step
    return out
