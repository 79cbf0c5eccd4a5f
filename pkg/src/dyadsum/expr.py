"""Dyadic summands: monomials, Japanese brackets and min/max factors.

Every dyadic quantity is a power of two, so a variable ``X`` is carried by
its integer log ``k_X`` and a monomial by a linear form in those logs.
Exponents are exact :class:`fractions.Fraction` values; exponents that
still mention unresolved symbols (``s``, ``theta``, ...) are
:class:`Affine` forms until :func:`substitute_params` binds them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

import numpy as np

__all__ = [
    "Affine",
    "Bracket",
    "DyadicVar",
    "Exponent",
    "Max",
    "Min",
    "Mono",
    "Monomial",
    "Role",
    "Summand",
    "UnboundSymbolError",
    "MissingVariableError",
    "as_fraction",
    "eval_mono",
    "eval_points",
    "eval_summand",
    "substitute_params",
]


class MissingVariableError(KeyError):
    """An assignment does not cover a variable that is needed."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"no value for variable {self.name!r}"


class UnboundSymbolError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"symbol {self.name!r} is not bound"


def as_fraction(x: Union[int, str, float, Fraction]) -> Fraction:
    """Exact conversion; floats go through their shortest repr (``0.55`` -> 11/20)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class Affine:
    """``const + sum(coeff * symbol)`` with rational coefficients."""

    const: Fraction
    terms: tuple[tuple[str, Fraction], ...] = ()

    @staticmethod
    def make(const, terms: Mapping[str, Fraction] | None = None) -> "Exponent":
        t = {k: as_fraction(v) for k, v in (terms or {}).items() if v != 0}
        if not t:
            return as_fraction(const)
        return Affine(as_fraction(const), tuple(sorted(t.items())))

    @staticmethod
    def symbol(name: str) -> "Affine":
        return Affine(Fraction(0), ((name, Fraction(1)),))

    @property
    def symbols(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.terms)

    def _parts(self) -> tuple[Fraction, dict[str, Fraction]]:
        return self.const, dict(self.terms)

    def __add__(self, other):
        c, t = self._parts()
        if isinstance(other, Affine):
            c2, t2 = other._parts()
        else:
            c2, t2 = as_fraction(other), {}
        for k, v in t2.items():
            t[k] = t.get(k, 0) + v
        return Affine.make(c + c2, t)

    __radd__ = __add__

    def __neg__(self):
        return Affine.make(-self.const, {k: -v for k, v in self.terms})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Affine):
            raise TypeError("product of two symbolic exponents is not affine")
        f = as_fraction(other)
        return Affine.make(self.const * f, {k: v * f for k, v in self.terms})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / as_fraction(other))

    def subs(self, bindings: Mapping[str, Fraction]) -> "Exponent":
        c, t = self.const, {}
        for k, v in self.terms:
            if k in bindings:
                c += v * as_fraction(bindings[k])
            else:
                t[k] = v
        return Affine.make(c, t)

    def __str__(self) -> str:
        parts = []
        if self.const != 0:
            parts.append(str(self.const))
        for k, v in self.terms:
            if v == 1:
                s = k
            elif v == -1:
                s = f"-{k}"
            else:
                s = f"{v}*{k}"
            if parts and not s.startswith("-"):
                s = "+" + s
            parts.append(s)
        return "".join(parts)


Exponent = Union[Fraction, Affine]


def _exp_subs(e: Exponent, bindings: Mapping[str, Fraction]) -> Exponent:
    return e.subs(bindings) if isinstance(e, Affine) else e


def _concrete(e: Exponent) -> Fraction:
    if isinstance(e, Affine):
        raise UnboundSymbolError(sorted(e.symbols)[0])
    return e


def _exp_symbols(e: Exponent) -> frozenset[str]:
    return e.symbols if isinstance(e, Affine) else frozenset()


class Role(enum.Enum):
    SUM = "sum"
    PARAM = "param"
    FIXED = "fixed"


@dataclass(frozen=True)
class DyadicVar:
    name: str
    role: Role = Role.SUM


@dataclass(frozen=True)
class Monomial:
    """``2^coef * prod(v ** p)``; ``powers`` is sorted and free of zeros."""

    coef: Exponent = Fraction(0)
    powers: tuple[tuple[str, Exponent], ...] = ()

    @staticmethod
    def of(powers: Mapping[str, Exponent] | None = None, coef=0) -> "Monomial":
        p = {}
        for k, v in (powers or {}).items():
            v = v if isinstance(v, Affine) else as_fraction(v)
            if v != 0:
                p[k] = v
        c = coef if isinstance(coef, Affine) else as_fraction(coef)
        return Monomial(c, tuple(sorted(p.items())))

    @staticmethod
    def var(name: str, power=1) -> "Monomial":
        return Monomial.of({name: power})

    @staticmethod
    def const(log2_value=0) -> "Monomial":
        return Monomial.of({}, log2_value)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(k for k, _ in self.powers)

    @property
    def symbols(self) -> frozenset[str]:
        out = _exp_symbols(self.coef)
        for _, v in self.powers:
            out |= _exp_symbols(v)
        return out

    def power_of(self, name: str) -> Exponent:
        return dict(self.powers).get(name, Fraction(0))

    def __mul__(self, other: "Monomial") -> "Monomial":
        p = dict(self.powers)
        for k, v in other.powers:
            p[k] = p.get(k, Fraction(0)) + v
        return Monomial.of(p, self.coef + other.coef)

    def __truediv__(self, other: "Monomial") -> "Monomial":
        return self * other ** -1

    def __pow__(self, e) -> "Monomial":
        e = e if isinstance(e, Affine) else as_fraction(e)
        if isinstance(e, Affine) and self.symbols:
            raise TypeError("cannot raise a symbolic monomial to a symbolic power")
        return Monomial.of({k: v * e for k, v in self.powers}, self.coef * e)

    def subs(self, bindings: Mapping[str, Fraction]) -> "Monomial":
        return Monomial.of(
            {k: _exp_subs(v, bindings) for k, v in self.powers},
            _exp_subs(self.coef, bindings),
        )

    def log2_form(self) -> tuple[Fraction, dict[str, Fraction]]:
        """(constant, coefficients) of ``log2`` of the monomial."""
        return _concrete(self.coef), {k: _concrete(v) for k, v in self.powers}

    def log2_at(self, assignment: Mapping[str, int]) -> Fraction:
        c, p = self.log2_form()
        total = c
        for k, v in p.items():
            if k not in assignment:
                raise MissingVariableError(k)
            total += v * assignment[k]
        return total

    def is_one(self) -> bool:
        return not self.powers and self.coef == 0

    def __str__(self) -> str:
        from .dsl import format_monomial

        return format_monomial(self)


def eval_mono(m: Monomial, assignment: Mapping[str, int]) -> float:
    """Value of ``m`` at ``X = 2**assignment[X]``."""
    return 2.0 ** float(m.log2_at(assignment))


@dataclass(frozen=True)
class Mono:
    mono: Monomial

    @property
    def variables(self) -> frozenset[str]:
        return self.mono.variables


@dataclass(frozen=True)
class Bracket:
    """``<arg>^power = (1 + arg**2) ** (power / 2)``."""

    arg: Monomial
    power: Exponent

    @property
    def variables(self) -> frozenset[str]:
        return self.arg.variables


@dataclass(frozen=True)
class Min:
    args: tuple[Monomial, ...]
    power: Exponent = Fraction(1)

    def __post_init__(self):
        if len(self.args) < 2:
            raise ValueError("min needs at least two arguments")
        if len(set(self.args)) != len(self.args):
            raise ValueError("min arguments must be pairwise distinct")

    @property
    def variables(self) -> frozenset[str]:
        return frozenset().union(*(a.variables for a in self.args))


@dataclass(frozen=True)
class Max:
    args: tuple[Monomial, ...]
    power: Exponent = Fraction(1)

    def __post_init__(self):
        if len(self.args) < 2:
            raise ValueError("max needs at least two arguments")
        if len(set(self.args)) != len(self.args):
            raise ValueError("max arguments must be pairwise distinct")

    @property
    def variables(self) -> frozenset[str]:
        return frozenset().union(*(a.variables for a in self.args))


Factor = Union[Mono, Bracket, Min, Max]


@dataclass(frozen=True)
class Summand:
    """Product of factors.

    All plain monomials are merged into one leading :class:`Mono` factor so
    that the printed form parses back to the same structure.
    """

    factors: tuple[Factor, ...]

    def __init__(self, factors: Iterable[Factor] = ()):
        mono = Monomial()
        rest: list[Factor] = []
        for f in factors:
            if isinstance(f, Monomial):
                f = Mono(f)
            if isinstance(f, Mono):
                mono = mono * f.mono
            else:
                rest.append(f)
        out = ([Mono(mono)] if not mono.is_one() else []) + rest
        object.__setattr__(self, "factors", tuple(out))

    def __mul__(self, other: "Summand") -> "Summand":
        return Summand(self.factors + other.factors)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset().union(*(f.variables for f in self.factors))

    @property
    def symbols(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for f in self.factors:
            if isinstance(f, Mono):
                out |= f.mono.symbols
            elif isinstance(f, Bracket):
                out |= f.arg.symbols | _exp_symbols(f.power)
            else:
                out |= _exp_symbols(f.power)
                for a in f.args:
                    out |= a.symbols
        return out

    @property
    def monomial(self) -> Monomial:
        """The merged plain-monomial part (``1`` if absent)."""
        for f in self.factors:
            if isinstance(f, Mono):
                return f.mono
        return Monomial()

    def is_pure(self) -> bool:
        return all(isinstance(f, Mono) for f in self.factors)

    def __str__(self) -> str:
        from .dsl import format_summand

        return format_summand(self)


def substitute_params(s: Summand, bindings: Mapping[str, Fraction]) -> Summand:
    """Resolve symbolic exponents; every symbol in ``s`` must be bound."""
    bindings = {k: as_fraction(v) for k, v in bindings.items()}
    missing = sorted(s.symbols - set(bindings))
    if missing:
        raise UnboundSymbolError(missing[0])
    out: list[Factor] = []
    for f in s.factors:
        if isinstance(f, Mono):
            out.append(Mono(f.mono.subs(bindings)))
        elif isinstance(f, Bracket):
            out.append(Bracket(f.arg.subs(bindings), _exp_subs(f.power, bindings)))
        else:
            out.append(
                type(f)(tuple(a.subs(bindings) for a in f.args), _exp_subs(f.power, bindings))
            )
    return Summand(out)


def _factor_value(f: Factor, assignment: Mapping[str, int]) -> float:
    if isinstance(f, Mono):
        return eval_mono(f.mono, assignment)
    p = float(_concrete(f.power))
    if isinstance(f, Bracket):
        x = float(f.arg.log2_at(assignment))
        return (1.0 + 2.0 ** (2 * x)) ** (p / 2)
    logs = [a.log2_at(assignment) for a in f.args]
    pick = min(logs) if isinstance(f, Min) else max(logs)
    return 2.0 ** float(pick * _concrete(f.power))


def eval_summand(s: Summand, assignment: Mapping[str, int]) -> float:
    """Exact-form pointwise value; brackets are evaluated as (1 + X^2)^(p/2)."""
    missing = sorted(s.variables - set(assignment))
    if missing:
        raise MissingVariableError(missing[0])
    return math.prod(_factor_value(f, assignment) for f in s.factors)


def _log2_columns(m: Monomial, index: Mapping[str, int], pts: np.ndarray) -> np.ndarray:
    c, p = m.log2_form()
    out = np.full(pts.shape[0], float(c))
    for k, v in p.items():
        if k not in index:
            raise MissingVariableError(k)
        out = out + float(v) * pts[:, index[k]]
    return out


def eval_points(s: Summand, names: list[str], pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`eval_summand` over integer log points (rows of ``pts``).

    The numeric engine and its brute-force oracle both go through this
    function, so equal point sets give bit-identical terms.
    """
    index = {k: i for i, k in enumerate(names)}
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, len(names))
    val = np.ones(pts.shape[0])
    for f in s.factors:
        if isinstance(f, Mono):
            val = val * np.exp2(_log2_columns(f.mono, index, pts))
        elif isinstance(f, Bracket):
            x = _log2_columns(f.arg, index, pts)
            val = val * np.power(1.0 + np.exp2(2.0 * x), float(_concrete(f.power)) / 2.0)
        else:
            cols = np.stack([_log2_columns(a, index, pts) for a in f.args])
            pick = cols.min(axis=0) if isinstance(f, Min) else cols.max(axis=0)
            val = val * np.exp2(pick * float(_concrete(f.power)))
    return val
