from __future__ import annotations

import dataclasses
import itertools
from fractions import Fraction
from importlib import resources

import pytest

from dyadsum.cases import (
    ROLE_VARS,
    EstimateCase,
    EstimateKind,
    Modulation,
    Subcase,
    Triple,
    build_cases,
    build_problems,
    build_problems_with_cases,
    case_problem,
    is_admissible,
    is_boundary,
    norm_bound,
    rational_range,
    satisfies_23ts,
    structural_constraints,
    sweep,
    verify_estimate,
    weight,
)
from dyadsum.constraints import Constraint, contains, linearize
from dyadsum.dsl import parse_constraint, parse_problem, parse_summand
from dyadsum.engine import Classification, EngineConfig, verdict
from dyadsum.expr import Summand, eval_summand

F = Fraction
SYM = EngineConfig(engine="symbolic")
NAMES = ROLE_VARS + ("N",)
IDENTITY = (("Nmax", "Nmed", "Nmin"), ("Lmin", "Lmed", "Lmax"))
CASE_STUDY = Triple(2, F(-1, 2), F(5, 8))


def summand(text: str) -> Summand:
    return parse_summand(text, NAMES)


def constraint(text: str) -> Constraint:
    return parse_constraint(text, NAMES)


def data(name: str) -> str:
    return (resources.files("dyadsum") / "data" / name).read_text(encoding="utf-8")


def low_ppp(roles=IDENTITY) -> EstimateCase:
    return EstimateCase(EstimateKind.CUCV, Modulation.LOW, Subcase.PPP, "any", *roles)


class TestAdmissibility:
    @pytest.mark.parametrize("t,expected", [
        (Triple(2, F(-1, 2), F(5, 8)), True),
        (Triple(2, F("-0.4"), F(3, 4)), True),
        (Triple(2, F(-1, 2), F(3, 4)), False),
        (Triple(3, F("-0.45"), F("0.55")), False),
        (Triple(3, F("-0.4"), F("0.55")), True),
        (Triple(2, F(0), F(5, 8)), False),
        (Triple(2, F(-1, 10), F(1, 2)), False),
    ])
    def test_examples(self, t, expected):
        assert is_admissible(t) is expected

    def test_dimension_checked(self):
        with pytest.raises(ValueError):
            Triple(4, F(-1, 2), F(5, 8))

    @pytest.mark.parametrize("t,expected", [
        (Triple(2, F("-0.15"), F("0.6")), True),
        (Triple(3, F("-0.3"), F("0.55")), False),
        (Triple(2, F("-0.2"), F("0.6")), False),
    ])
    def test_23ts_examples(self, t, expected):
        assert satisfies_23ts(t) is expected

    def test_23ts_implies_admissible_for_n2(self):
        grid = itertools.product(rational_range(F(-1), F(-1, 100), F(1, 100)),
                                 rational_range(F(51, 100), F(99, 100), F(1, 100)))
        for s, th in grid:
            t = Triple(2, s, th)
            if satisfies_23ts(t):
                assert is_admissible(t), t

    def test_23ts_inclusion_fails_for_n3_with_large_theta(self):
        # (theta-1)/2 = -0.05 < -0.04 but 2 theta - 3/2 = 0.3 > -0.04
        t = Triple(3, F("-0.04"), F("0.9"))
        assert satisfies_23ts(t) and not is_admissible(t)

    def test_23ts_inclusion_holds_for_n3_up_to_two_thirds(self):
        for s, th in itertools.product(rational_range(F(-1), F(-1, 100), F(1, 100)),
                                       rational_range(F(51, 100), F(2, 3), F(1, 100))):
            t = Triple(3, s, th)
            if satisfies_23ts(t):
                assert is_admissible(t), t

    @pytest.mark.parametrize("n", [2, 3])
    def test_admissible_implies_lower_bound(self, n):
        for s, th in itertools.product(rational_range(F(-2), F(-1, 100), F(1, 100)),
                                       rational_range(F(51, 100), F(3, 2), F(1, 100))):
            if is_admissible(Triple(n, s, th)):
                assert s >= 2 * th + F(n - 6, 2)

    def test_boundary(self):
        assert is_boundary(EstimateKind.CUCV, Triple(2, F("-0.5"), F("0.75")))
        assert is_boundary(EstimateKind.UV, Triple(3, F("-0.4"), F("0.55")))
        assert not is_boundary(EstimateKind.UV, Triple(3, F("-0.3"), F("0.55")))
        assert is_boundary(EstimateKind.CUV, Triple(2, F("-0.2"), F("0.6")))
        assert not is_boundary(EstimateKind.UV, Triple(2, F("-0.2"), F("0.6")))


class TestWeight:
    def test_cucv_case_study_roles(self):
        w = weight(EstimateKind.CUCV, IDENTITY, CASE_STUDY)
        assert w == summand("<Nmax>^(1/2) * <Nmed>^(1/2) * <Nmin>^(-1/2)"
                            " * Lmin^(-5/8) * Lmed^(-5/8) * Lmax^(-3/8)")

    def test_cuv_identity_roles(self):
        roles = (("Nmax", "Nmed", "Nmin"), ("Lmin", "Lmed", "Lmax"))
        w = weight(EstimateKind.CUV, roles, CASE_STUDY)
        assert w == summand("<Nmax>^(1/2) * <Nmed>^(-1/2) * <Nmin>^(1/2)"
                            " * Lmin^(-5/8) * Lmed^(-3/8) * Lmax^(-5/8)")

    def test_omega_damping_at_unit_shell(self):
        t = CASE_STUDY
        w = weight(EstimateKind.OMEGA_CUV, IDENTITY, t)
        pt = {v: 0 for v in ROLE_VARS}
        # remaining factors: <1>^(1/2) twice, L powers are 1
        assert eval_summand(w, pt) == pytest.approx(2 ** ((float(t.s) - 2) / 2) * 2 ** 0.5, rel=1e-14)
        assert eval_summand(w, pt) / 2 ** 0.5 <= 1

    def test_uv_symmetric_in_first_two_indices(self):
        t = Triple(3, F(-2, 5), F(3, 5))
        swapped = (("Nmed", "Nmax", "Nmin"), ("Lmed", "Lmin", "Lmax"))
        a, b = weight(EstimateKind.UV, IDENTITY, t), weight(EstimateKind.UV, swapped, t)
        for ks in itertools.product(range(-2, 3), repeat=6):
            pt = dict(zip(("Nmax", "Nmed", "Nmin", "Lmin", "Lmed", "Lmax"), ks))
            assert eval_summand(a, pt) == pytest.approx(eval_summand(b, pt), rel=1e-12)


class TestNormBound:
    def test_ppp_n2(self):
        assert norm_bound(low_ppp(), CASE_STUDY) == summand(
            "Lmin^(1/2) * Nmax^(-1/2) * Nmin^(1/2) * min{Nmax*Nmin, Lmed}^(1/2)")

    def test_coherence_n3(self):
        case = EstimateCase(EstimateKind.UV, Modulation.LOW, Subcase.COHERENCE, "N1~N3>>N2",
                            ("Nmax", "Nmin", "Nmed"), ("Lmin", "Lmax", "Lmed"))
        assert norm_bound(case, Triple(3, F(-1, 5), F(3, 5))) == summand(
            "Lmin^(1/2) * Nmax^(-1/2) * Nmin * min{H, H*Lmed*Nmin^(-2)}^(1/2)")

    def test_generic_n2_has_no_epsilon(self):
        case = EstimateCase(EstimateKind.UV, Modulation.LOW, Subcase.GENERIC, "N1~N2~N3", *IDENTITY)
        assert norm_bound(case, Triple(2, F(-1, 5), F(3, 5))) == summand(
            "Lmin^(1/2) * Nmax^(-1/2) * Nmin^(1/2) * min{H, Lmed}^(1/2) * min{1, H*Nmin^(-2)}^(1/2)")

    def test_generic_n3_epsilon(self):
        case = EstimateCase(EstimateKind.UV, Modulation.LOW, Subcase.GENERIC, "N1~N2~N3", *IDENTITY)
        nb = norm_bound(case, Triple(3, F(-1, 5), F(3, 5)))
        assert nb == summand("Lmin^(1/2) * Nmax^(-1/2) * Nmin * min{H, Lmed}^(1/2)"
                             " * min{1, H*Nmin^(-2)}^(9/20)")


class TestStructuralConstraints:
    def test_ppp_low(self):
        cs = structural_constraints(low_ppp())
        for text in ("H ~ Nmax^2", "H ~ Lmax", "Nmax ~ Nmed", "Nmax ~ N", "Lmin >~ 1"):
            assert constraint(text) in cs

    def test_high_separated(self):
        case = EstimateCase(EstimateKind.UV, Modulation.HIGH, Subcase.SEPARATED, "N1~N2>>N3", *IDENTITY)
        cs = structural_constraints(case)
        for text in ("Nmax^2 << Lmax", "Lmax ~ Lmed", "H ~ Nmax^2", "H << Lmax", "Nmin << Nmed"):
            assert constraint(text) in cs

    def test_min_stays_in_the_summand(self):
        cs = structural_constraints(low_ppp())
        assert all(c.is_monomial() for c in cs)
        p = case_problem(low_ppp(), CASE_STUDY)
        assert any(type(f).__name__ == "Min" for f in p.summand.factors)

    def test_coherence_only_low(self):
        with pytest.raises(ValueError):
            EstimateCase(EstimateKind.UV, Modulation.HIGH, Subcase.COHERENCE, "N1~N3>>N2",
                         ("Nmax", "Nmin", "Nmed"), ("Lmin", "Lmax", "Lmed"))


class TestBuildProblems:
    def test_counts(self):
        assert len(build_problems(EstimateKind.CUCV, CASE_STUDY)) == 36
        assert len(build_problems(EstimateKind.UV, CASE_STUDY)) == 80
        assert len(build_problems(EstimateKind.CUV, CASE_STUDY)) == 80
        assert len(build_problems(EstimateKind.OMEGA_CUV, CASE_STUDY)) == 4

    def test_case_study_problem(self):
        """The low (+++) problem with N3 = Nmin, L3 = Lmax is the case-study summand
        once min{Nmax Nmin, Lmed} = Lmed; the two agree wherever both regions hold."""
        built = case_problem(low_ppp(), CASE_STUDY)
        assert built in build_problems(EstimateKind.CUCV, CASE_STUDY)
        stage4 = parse_problem(data("stage4.dsum"))
        reg4 = linearize(stage4.constraints, stage4.slack)
        reg = linearize(built.constraints, built.slack)
        hits = 0
        for ks in itertools.product(range(0, 4), range(0, 4), range(-2, 1), range(0, 9),
                                    range(0, 9), range(0, 5), range(0, 3)):
            pt = dict(zip(("Nmax", "Nmed", "Nmin", "Lmax", "H", "Lmed", "Lmin"), ks), N=ks[0])
            if pt["Lmed"] > pt["Nmax"] + pt["Nmin"] or not (contains(reg4, pt) and contains(reg, pt)):
                continue
            hits += 1
            assert eval_summand(built.summand, pt) == pytest.approx(eval_summand(stage4.summand, pt), rel=1e-12)
        assert hits > 20

    def test_reversed_coherence_present(self):
        cases = build_cases(EstimateKind.UV)
        coh = {(c.pattern, c.n_roles) for c in cases if c.subcase is Subcase.COHERENCE}
        assert ("N1~N3>>N2", ("Nmax", "Nmin", "Nmed")) in coh
        assert ("N2~N3>>N1", ("Nmin", "Nmax", "Nmed")) in coh

    def test_cuv_extra_scenario_present(self):
        cases = [c for c in build_cases(EstimateKind.CUV)
                 if c.subcase is Subcase.COHERENCE and c.pattern == "N2~N3>>N1"]
        assert cases
        for c in cases:
            assert c.l_roles[0] == "Lmax"
            assert constraint("H ~ Lmax") in structural_constraints(c)

    def test_problems_are_deduplicated(self):
        pairs = build_problems_with_cases(EstimateKind.CUCV, CASE_STUDY)
        assert sum(len(cs) for _, cs in pairs) == len(build_cases(EstimateKind.CUCV))
        assert len({p for p, _ in pairs}) == len(pairs)


class TestVerifyEstimate:
    def test_case_study_bounded(self):
        r = verify_estimate(EstimateKind.CUCV, CASE_STUDY, SYM)
        assert r.classification is Classification.BOUNDED
        assert r.reference and r.match
        assert r.failing() == []

    def test_cucv_below_region(self):
        r = verify_estimate(EstimateKind.CUCV, Triple(2, F("-0.7"), F(5, 8)), SYM)
        assert r.classification is Classification.UNBOUNDED
        assert r.exponent == F(3, 20)  # -2s + 2 theta - 5/2
        labels = [cs[0] for cs, _ in r.failing()]
        assert all(c.modulation is Modulation.LOW for c in labels)
        assert any(c.n_roles[2] == "Nmin" for c in labels)

    def test_cuv_coherence_edge(self):
        bad = verify_estimate(EstimateKind.CUV, Triple(2, F("-0.3"), F("0.55")), SYM)
        good = verify_estimate(EstimateKind.CUV, Triple(2, F("-0.2"), F("0.55")), SYM)
        assert bad.classification is Classification.UNBOUNDED
        assert good.classification is Classification.BOUNDED
        failing = {(cs[0].subcase, cs[0].pattern) for cs, _ in bad.failing()}
        assert (Subcase.COHERENCE, "N1~N3>>N2") in failing
        # the generic N1~N3>~N2 scenario independently needs s > -1/4
        assert {sc for sc, _ in failing} == {Subcase.COHERENCE, Subcase.GENERIC}
        assert {pat for sc, pat in failing if sc is Subcase.GENERIC} == {"N1~N3>~N2"}

    def test_numeric_engine_agrees_on_case_study_problem(self):
        v = verdict(case_problem(low_ppp(), CASE_STUDY), EngineConfig(engine="numeric"))
        assert v.classification is Classification.BOUNDED


class TestProperties:
    @pytest.mark.parametrize("kind", [EstimateKind.CUCV, EstimateKind.UV])
    def test_role_symmetry(self, kind):
        t = Triple(2, F(-3, 5), F(5, 8))
        cases = build_cases(kind)
        index = {(c.modulation, c.subcase, c.pattern, c.n_roles, c.l_roles): c for c in cases}
        checked = 0
        for c in cases[::5]:
            n1, n2, n3 = c.n_roles
            l1, l2, l3 = c.l_roles
            key = (c.modulation, c.subcase, c.pattern, (n2, n1, n3), (l2, l1, l3))
            other = index.get(key)
            if other is None:
                continue
            a = verdict(case_problem(c, t), SYM)
            b = verdict(case_problem(other, t), SYM)
            assert (a.classification, a.exponent, a.log_degree) == (b.classification, b.exponent, b.log_degree)
            checked += 1
        assert checked >= 3

    @pytest.mark.parametrize("extra", ["H >> Nmax^2", "H << Nmax^2"])
    def test_separated_subcase_vacuous_off_resonance(self, extra):
        case = EstimateCase(EstimateKind.UV, Modulation.LOW, Subcase.SEPARATED, "N1~N2>>N3", *IDENTITY)
        p = case_problem(case, Triple(2, F(-1, 5), F(3, 5)))
        p = dataclasses.replace(p, constraints=p.constraints + (constraint(extra),))
        v = verdict(p, SYM)
        assert "empty region" in v.notes
        assert v.classification is Classification.BOUNDED

    def test_monotone_in_s(self):
        s_grid = rational_range(F(-7, 10), F(-1, 10), F(1, 5))
        for kind in (EstimateKind.CUCV, EstimateKind.CUV):
            rows = sweep(kind, 2, s_grid, [F(5, 8)])
            bounded = [r.verdict is Classification.BOUNDED for r in rows]
            assert bounded == sorted(bounded), (kind, bounded)

    def test_single_point_sweep(self):
        rows = sweep(EstimateKind.CUCV, 2, [F(-1, 2)], [F(5, 8)])
        assert len(rows) == 1
        assert rows[0].verdict is Classification.BOUNDED and rows[0].match

    def test_rational_range_inclusive(self):
        assert rational_range("-0.7", "-0.05", "0.05")[-1] == F(-1, 20)
        assert len(rational_range("0.55", "0.95", "0.05")) == 9
