from __future__ import annotations

from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from dyadsum.constraints import Constraint, Relation
from dyadsum.dsl import (
    DslError,
    format_problem,
    format_summand,
    parse_constraint,
    parse_problem,
    parse_problem_file,
    parse_summand,
)
from dyadsum.expr import Bracket, Min, Mono, Monomial, Summand


def data(name: str) -> str:
    return (resources.files("dyadsum") / "data" / name).read_text(encoding="utf-8")


def v(name, p=1):
    return Monomial.var(name, p)


class TestGrammar:
    def test_elementary_problem(self):
        p = parse_problem("param B\nvar A\nsum A\nwhere A <~ B")
        assert p.param.name == "B"
        assert [x.name for x in p.variables] == ["A"]
        assert p.summand == Summand([v("A")])
        assert p.constraints == (Constraint(v("A"), Relation.LESSSIM, v("B")),)

    def test_comments_and_blank_lines(self):
        p = parse_problem("# header\nparam B   # the parameter\n\nvar A\nsum A  # summand\nwhere A <~ B\n")
        assert p.summand == Summand([v("A")])

    def test_factors(self):
        s = parse_summand("<A>^(-1/2) * min{A*B, C}^(1/2) * 2^(3) * A^(1/2)", ["A", "B", "C"])
        assert s.factors == (
            Mono(Monomial.of({"A": Fraction(1, 2)}, 3)),
            Bracket(v("A"), Fraction(-1, 2)),
            Min((v("A") * v("B"), v("C")), Fraction(1, 2)),
        )

    def test_all_relations(self):
        for text, rel in [("~", Relation.SIM), ("<~", Relation.LESSSIM), (">~", Relation.GTRSIM),
                          ("<<", Relation.LL), (">>", Relation.GG), ("<=", Relation.LE), (">=", Relation.GE)]:
            assert parse_constraint(f"A {text} B", ["A", "B"]).rel is rel

    def test_min_side_with_power(self):
        c = parse_constraint("B <~ min{1, A^(-2)}^(1/2)", ["A", "B"])
        assert c.rhs == Min((Monomial(), v("A", -2)), Fraction(1, 2))

    def test_let_bindings(self):
        text = "let s = -1/2\nlet theta = 5/8\nparam N\nvar A\nsum <A>^(s) * A^(1/2-theta)\nwhere A <~ N"
        pf = parse_problem_file(text)
        assert pf.bindings == {"s": Fraction(-1, 2), "theta": Fraction(5, 8)}
        assert pf.problem.summand == Summand([v("A", Fraction(-1, 8)), Bracket(v("A"), Fraction(-1, 2))])

    def test_settings(self):
        pf = parse_problem_file("param N\nvar A\nsum A\nwhere A <~ N\nset gap_ll = 4\nset engine = symbolic")
        assert pf.problem.slack.gap_ll == 4
        assert pf.settings["engine"] == "symbolic"


class TestErrors:
    def test_unclosed_parenthesis_position(self):
        with pytest.raises(DslError) as e:
            parse_problem("param N\nvar A\nsum A^(1/2\nwhere A <~ N")
        assert (e.value.line, e.value.col) == (3, 7)
        assert "unclosed" in str(e.value)

    def test_undeclared_variable(self):
        with pytest.raises(DslError, match="undeclared variable 'B'"):
            parse_problem("param N\nvar A\nsum A*B\nwhere A <~ N")

    def test_two_params(self):
        with pytest.raises(DslError, match="second 'param'"):
            parse_problem("param N\nparam M\nvar A\nsum A\nwhere A <~ N")

    def test_numbers_must_be_powers_of_two(self):
        with pytest.raises(DslError, match="power of two"):
            parse_problem("param N\nvar A\nsum 3*A\nwhere A <~ N")

    def test_param_must_be_constrained(self):
        with pytest.raises(ValueError):
            parse_problem("param N\nvar A\nsum A\nwhere A <~ 1")

    def test_min_needs_distinct_arguments(self):
        with pytest.raises(DslError):
            parse_summand("min{A, A}", ["A"])

    def test_unknown_directive(self):
        with pytest.raises(DslError, match="unknown directive"):
            parse_problem("param N\nvar A\nsum A\nwhere A <~ N\nprint A")


class TestCaseStudyFile:
    S = ("<Nmin>^(-1/2) * Nmin^(1/2) * <Nmed>^(1/2) * <Nmax>^(1/2) * Nmax^(-1/2)"
         " * Lmin^(-1/8) * Lmed^(-1/8) * Lmax^(-3/8)")

    def test_standalone_file(self):
        p = parse_problem(data("case_study.dsum"))
        assert len(p.variables) == 7 - 1  # Nmax doubles as the parameter
        assert len(p.constraints) == 9
        names = [x.name for x in p.variables] + [p.param.name]
        assert p.summand == parse_summand(self.S, names)

    @pytest.mark.parametrize("stage", [1, 2, 3, 4])
    def test_stage_files_share_the_summand(self, stage):
        p = parse_problem(data(f"stage{stage}.dsum"))
        names = [x.name for x in p.variables]
        assert names == ["Nmax", "Nmed", "Nmin", "Lmax", "H", "Lmed", "Lmin"]
        assert p.summand == parse_summand(self.S, names)

    def test_stages_only_add_constraints(self):
        prev = ()
        for stage in (1, 2, 3, 4):
            cs = parse_problem(data(f"stage{stage}.dsum")).constraints
            assert cs[: len(prev)] == prev
            prev = cs


@pytest.mark.parametrize("name", ["stage1.dsum", "stage2.dsum", "stage3.dsum", "stage4.dsum",
                                  "case_study.dsum", "elementary.dsum", "min_double.dsum"])
def test_print_parse_round_trip(name):
    p = parse_problem(data(name))
    assert parse_problem(format_problem(p)) == p


exps = st.fractions(min_value=-3, max_value=3, max_denominator=6)


@st.composite
def summands(draw):
    names = ["A", "B", "C"]

    def mono():
        return Monomial.of({n: draw(exps) for n in names}, draw(st.integers(-3, 3)))

    factors = [Mono(mono())]
    for _ in range(draw(st.integers(0, 3))):
        kind = draw(st.sampled_from(["bracket", "min"]))
        m = mono()
        if m.is_one() or not m.variables:
            continue
        if kind == "bracket":
            factors.append(Bracket(m, draw(exps.filter(lambda e: e != 0))))
        else:
            other = mono()
            if other != m:
                factors.append(Min((m, other), draw(exps.filter(lambda e: e != 0))))
    return Summand(factors)


@settings(max_examples=150, deadline=None)
@given(s=summands())
def test_summand_round_trip(s):
    assert parse_summand(format_summand(s), ["A", "B", "C"]) == s
