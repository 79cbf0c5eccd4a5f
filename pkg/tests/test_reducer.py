from __future__ import annotations

import itertools
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from dyadsum.constraints import Relation, constraint_holds, contains, linearize
from dyadsum.dsl import parse_constraint, parse_problem, parse_summand
from dyadsum.engine import symbolic_for
from dyadsum.expr import Bracket, Min, Max, Monomial, Summand, eval_mono, eval_summand
from dyadsum.reducer import (
    Branch,
    Divergent,
    NotEliminable,
    eliminate_var,
    feasible_for_large,
    split,
    symbolic_growth,
)


def data(name: str) -> str:
    return (resources.files("dyadsum") / "data" / name).read_text(encoding="utf-8")


def v(name, p=1):
    return Monomial.var(name, p)


def region(*texts, names=("A", "B", "C", "N", "Nmin", "Lmin", "Lmed")):
    return linearize([parse_constraint(t, names) for t in texts])


def holds_all(cs, pt):
    return all(constraint_holds(c, pt) for c in cs)


class TestSplit:
    def test_min_constraint_two_branches(self):
        c = parse_constraint("B <~ min{1, A^(-2)}", ["A", "B"])
        bs = split(Summand([v("A") * v("B")]), [c])
        assert len(bs) == 2
        assert all(b.monomial == v("A") * v("B") for b in bs)
        # first branch: 1 is the minimum, second: A^-2 is
        rels = [{(x.lhs, x.rel, x.rhs) for x in b.extra_constraints} for b in bs]
        assert (Monomial(), Relation.LE, v("A", -2)) in rels[0]
        assert (v("B"), Relation.LESSSIM, Monomial()) in rels[0]
        assert (v("B"), Relation.LESSSIM, v("A", -2)) in rels[1]

    def test_bracket_branches(self):
        s = parse_summand("<Nmin>^(-1/2) * Nmin^(1/2)", ["Nmin"])
        low, high = split(s)
        assert low.monomial == v("Nmin", Fraction(1, 2))
        assert high.monomial == Monomial()
        assert contains(linearize(low.extra_constraints), {"Nmin": 0})
        assert not contains(linearize(low.extra_constraints), {"Nmin": 1})
        assert contains(linearize(high.extra_constraints), {"Nmin": 1})
        assert not contains(linearize(high.extra_constraints), {"Nmin": 0})

    def test_case_study_summand_under_stage4(self):
        p = parse_problem(data("stage4.dsum"))
        bs = split(p.summand, p.constraints)
        assert len(bs) == 8
        reg = linearize(p.constraints, p.slack)
        feasible = [b for b in bs if feasible_for_large(reg & linearize(b.extra_constraints), "N")]
        # Nmax ~ N rules out the branches where Nmax <= 1 (and Nmed ~ Nmax those with Nmed <= 1)
        assert len(feasible) == 2
        assert all("Nmax>1" in b.provenance for b in feasible)

    def test_partition_exactness_mixed(self):
        s = Summand([Bracket(v("A"), Fraction(1, 2)), Min((v("A"), v("B"), v("C", -1)), -1),
                     Max((v("B") * v("C"), Monomial()), 2)])
        bs = split(s)
        for pt in itertools.product(range(-6, 7), repeat=3):
            a = dict(zip("ABC", pt))
            assert sum(holds_all(b.extra_constraints, a) for b in bs) == 1


exps = st.fractions(min_value=-2, max_value=2, max_denominator=4).filter(lambda e: e != 0)


@st.composite
def split_summands(draw):
    names = ["A", "B", "C"]

    def mono():
        return Monomial.of({n: Fraction(draw(st.integers(-2, 2)), draw(st.sampled_from([1, 2])))
                            for n in names}, draw(st.integers(-2, 2)))

    fs = [mono()]
    for _ in range(draw(st.integers(1, 3))):
        m = mono()
        if not m.variables:
            continue
        kind = draw(st.sampled_from(["bracket", "min", "max"]))
        if kind == "bracket":
            fs.append(Bracket(m, draw(exps)))
        else:
            other = mono()
            if other != m:
                fs.append((Min if kind == "min" else Max)((m, other), draw(exps)))
    return Summand(fs)


@settings(max_examples=40, deadline=None)
@given(s=split_summands())
def test_partition_exactness_and_split_fidelity(s):
    bs = split(s)
    bracket_total = sum(abs(f.power) for f in s.factors if isinstance(f, Bracket))
    slack = 2.0 ** (float(bracket_total) / 2) * (1 + 1e-12)
    for pt in itertools.product(range(-6, 7), repeat=3):
        a = dict(zip("ABC", pt))
        active = [b for b in bs if holds_all(b.extra_constraints, a)]
        assert len(active) == 1
        exact = eval_summand(s, a)
        approx = eval_mono(active[0].monomial, a)
        assert exact / slack <= approx <= exact * slack


class TestEliminateVar:
    def test_geometric_upper(self):
        (e,) = eliminate_var(Branch(Summand([v("A")])), region("A <~ B"), "A")
        assert e.branch.monomial == v("B") * Monomial.const(2)
        assert e.extent is None
        assert "A" not in e.region.variables

    def test_negative_exponent_takes_lower_bound(self):
        (e,) = eliminate_var(Branch(Summand([v("Lmin", Fraction(-1, 8))])),
                             region("Lmin >~ 1", "Lmin <= Lmed"), "Lmin")
        assert e.branch.monomial.variables == frozenset()

    def test_zero_exponent_log_extent(self):
        (e,) = eliminate_var(Branch(Summand([Monomial()])), region("Nmin >~ N^(-1)", "Nmin <~ N"), "Nmin")
        upper, lower = e.extent
        assert upper / lower == Monomial.of({"N": 2}, 4)
        assert e.branch.extents == (upper / lower,)

    def test_missing_bound_is_divergent(self):
        r = eliminate_var(Branch(Summand([v("A")])), region("A >~ B"), "A")
        assert r == Divergent("A", "upper")

    def test_competing_bounds_branch(self):
        res = eliminate_var(Branch(Summand([v("A")])), region("A <~ B", "A <= C"), "A")
        assert {e.branch.monomial for e in res} == {v("B") * Monomial.const(2), v("C")}


@pytest.mark.parametrize("c", [Fraction(x, 2) for x in (-4, -3, -2, -1, 1, 2, 3, 4)])
@pytest.mark.parametrize("kb", [-1, 0, 2, 5])
def test_geometric_sum_oracle(c, kb):
    """Direct summation of the eliminated variable agrees within a factor of 4."""
    reg = region("A <~ B", "A >~ B^(-1)")  # k_A in [-k_B - 2, k_B + 2]
    res = eliminate_var(Branch(Summand([v("A", c)])), reg, "A")
    (e,) = res
    direct = sum(2.0 ** (float(c) * k) for k in range(-kb - 2, kb + 3))
    closed = eval_mono(e.branch.monomial, {"B": kb})
    assert closed <= direct <= 4 * closed


@pytest.mark.parametrize("kb", [0, 1, 4, 9])
def test_zero_exponent_tracks_range_length(kb):
    reg = region("A <~ B", "A >~ B^(-1)")
    (e,) = eliminate_var(Branch(Summand([Monomial()])), reg, "A")
    upper, lower = e.extent
    length = (upper / lower).log2_at({"B": kb}) + 1
    assert length == len(range(-kb - 2, kb + 3))


class TestSymbolicGrowth:
    def test_elementary(self):
        g = symbolic_for(parse_problem(data("elementary.dsum")))
        assert (g.exponent, g.log_degree) == (1, 0)

    def test_min_double_sum(self):
        g = symbolic_for(parse_problem(data("min_double.dsum")))
        assert (g.exponent, g.log_degree) == (0, 0)

    def test_stage4(self):
        g = symbolic_for(parse_problem(data("stage4.dsum")))
        assert (g.exponent, g.log_degree) == (Fraction(-1, 4), 0)

    def test_stage3(self):
        g = symbolic_for(parse_problem(data("stage3.dsum")))
        assert (g.exponent, g.log_degree) == (Fraction(1, 8), 0)

    @pytest.mark.parametrize("stage", [1, 2])
    def test_early_stages_divergent(self, stage):
        assert symbolic_for(parse_problem(data(f"stage{stage}.dsum"))).divergent

    def test_log_degree_from_parameter_extent(self):
        p = parse_problem("param N\nvar A\nsum 1\nwhere A <~ N\nwhere A >~ 1")
        g = symbolic_for(p)
        assert (g.exponent, g.log_degree) == (0, 1)

    def test_bounded_zero_range_has_no_log(self):
        p = parse_problem("param N\nvar A B\nsum B\nwhere A <~ 8\nwhere A >~ 1\nwhere B <~ N")
        assert symbolic_for(p).log_degree == 0

    def test_empty_region(self):
        p = parse_problem("param N\nvar A\nsum A\nwhere A >~ N\nwhere A << N^(1/2)")
        assert symbolic_for(p).empty

    def test_budget(self):
        p = parse_problem(data("stage4.dsum"))
        with pytest.raises(NotEliminable):
            symbolic_for_budget(p, 3)


def symbolic_for_budget(p, budget):
    branches = split(p.summand, p.constraints)
    reg = linearize([c for c in p.constraints if c.is_monomial()], p.slack)
    return symbolic_growth(branches, reg, p.param.name, [x.name for x in reversed(p.variables)], budget)
