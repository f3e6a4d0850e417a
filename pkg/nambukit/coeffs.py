import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Sequence, Tuple, Union

import sympy
from sympy.polys.domains import QQ
from sympy.polys.fields import FracElement, FracField
from sympy.polys.orderings import grlex

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Ground field and coefficient scalar. Canonical form (gcd-cancelled, grlex order,
# positive leading denominator coefficient) is maintained by sympy's fraction field.
Rational = Fraction
RationalFunction = FracElement

Scalar = Union[int, Fraction, RationalFunction]


class CoeffsException(Exception):
    """Custom exception for coefficient arithmetic errors"""
    pass


class DivisionByZero(CoeffsException):
    """Exception for division by the zero rational function"""
    pass


class PoleAtPoint(CoeffsException):
    """Exception for evaluating a rational function at a zero of its denominator"""
    pass


class NotAffine(CoeffsException):
    """Exception for expressions that are not affine in the chart coordinates"""
    pass


@lru_cache(maxsize=None)
def _fraction_field(names: Tuple[str, ...]) -> FracField:
    return FracField(tuple(sympy.symbols(names)), QQ, grlex)


@dataclass(frozen=True)
class Chart:
    """
    Global coordinate chart: ordered coordinate names plus optional symbolic parameters.

    Parameters are generators of the coefficient field with no derivatives; they let
    identities be decided for generic values of constants such as the gauge constant c.
    """
    coordinates: Tuple[str, ...]
    parameters: Tuple[str, ...] = ()

    def __post_init__(self):
        names = self.coordinates + self.parameters
        if not self.coordinates:
            raise CoeffsException("Chart needs at least one coordinate")
        if len(set(names)) != len(names):
            raise CoeffsException(f"Duplicate names in chart {names}")

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def field(self) -> FracField:
        return _fraction_field(self.coordinates + self.parameters)

    @property
    def names(self) -> Tuple[str, ...]:
        return self.coordinates + self.parameters

    def index(self, name: str) -> int:
        """Position of a coordinate name, raising CoeffsException if absent"""
        try:
            return self.coordinates.index(name)
        except ValueError:
            raise CoeffsException(f"'{name}' is not a coordinate of chart {self.label()}")

    def coordinate(self, which: Union[int, str]) -> RationalFunction:
        index = self.index(which) if isinstance(which, str) else which
        return self.field.gens[index]

    def parameter(self, name: str) -> RationalFunction:
        if name not in self.parameters:
            raise CoeffsException(f"'{name}' is not a parameter of chart {self.label()}")
        return self.field.gens[self.dim + self.parameters.index(name)]

    def constant(self, value: Union[int, Fraction]) -> RationalFunction:
        value = Fraction(value)
        return self.field.ground_new(QQ(value.numerator, value.denominator))

    def zero(self) -> RationalFunction:
        return self.field.zero

    def one(self) -> RationalFunction:
        return self.field.one

    def lift(self, value: Scalar) -> RationalFunction:
        """Coerce an int, Fraction or rational function of this chart into the field"""
        if isinstance(value, FracElement):
            if value.field != self.field:
                return transfer(value, self)
            return value
        return self.constant(value)

    def label(self) -> str:
        return f"({', '.join(self.coordinates)})"


def arith(a: RationalFunction, b: RationalFunction, op: str) -> RationalFunction:
    """
    Exact field arithmetic on canonical rational functions

    Args:
        a: Left operand
        b: Right operand (same field)
        op: One of '+', '-', '*', '/'

    Returns:
        Canonical result

    Raises:
        DivisionByZero: If op is '/' and b is zero
        CoeffsException: If op is unknown
    """
    if op == '+':
        return a + b
    if op == '-':
        return a - b
    if op == '*':
        return a * b
    if op == '/':
        if not b:
            logger.error(f"Division of {render(a)} by zero")
            raise DivisionByZero(f"Division of {render(a)} by zero")
        return a / b
    raise CoeffsException(f"Unknown operator: {op}")


def partial(f: RationalFunction, i: int) -> RationalFunction:
    """Exact partial derivative with respect to the i-th coordinate (0-based)"""
    return f.diff(f.field.gens[i])


def is_zero(f: RationalFunction) -> bool:
    """Complete zero test: canonical form makes this a numerator check"""
    return not f.numer


def is_constant(f: RationalFunction) -> bool:
    return f.numer.is_ground and f.denom.is_ground


def to_rational(f: RationalFunction) -> Fraction:
    """
    Convert a constant rational function to a Fraction

    Raises:
        CoeffsException: If f depends on a coordinate or parameter
    """
    if not is_constant(f):
        raise CoeffsException(f"Not a constant: {render(f)}")
    value = f.numer.LC / f.denom.LC if f.numer else QQ.zero
    return Fraction(int(value.numerator), int(value.denominator))


def evaluate(f: RationalFunction, point: Sequence[Union[int, Fraction]]) -> Fraction:
    """
    Evaluate a rational function exactly at a rational point

    Args:
        f: Rational function
        point: Values for every coordinate followed by every parameter

    Returns:
        Exact value

    Raises:
        PoleAtPoint: If the denominator vanishes at the point
    """
    gens = f.field.ring.gens
    if len(point) != len(gens):
        raise CoeffsException(f"Point has {len(point)} entries, expected {len(gens)}")
    values = [QQ(Fraction(v).numerator, Fraction(v).denominator) for v in point]

    denominator = f.denom.evaluate(list(zip(gens, values)))
    if not denominator:
        raise PoleAtPoint(f"Pole of {render(f)} at {tuple(str(v) for v in point)}")
    numerator = f.numer.evaluate(list(zip(gens, values)))
    value = numerator / denominator
    return Fraction(int(value.numerator), int(value.denominator))


def _as_polynomial(g: RationalFunction):
    if not g.denom.is_ground:
        raise CoeffsException(f"Substitution needs a polynomial, got {render(g)}")
    return g.numer.quo_ground(g.denom.LC)


def substitute(f: RationalFunction, replacements: Dict[int, RationalFunction]) -> RationalFunction:
    """
    Simultaneously replace coordinates by polynomials of the same field

    Args:
        f: Rational function
        replacements: Map from generator index to replacement polynomial

    Returns:
        Canonical result

    Raises:
        PoleAtPoint: If the denominator vanishes identically after substitution
    """
    if not replacements:
        return f
    ring = f.field.ring
    pairs = [(ring.gens[i], _as_polynomial(g)) for i, g in sorted(replacements.items())]
    numerator = f.numer.compose(pairs)
    denominator = f.denom.compose(pairs)
    if not denominator:
        logger.error(f"Denominator of {render(f)} vanishes on the substitution locus")
        raise PoleAtPoint(f"Denominator of {render(f)} vanishes on the substitution locus")
    return f.field.new(numerator, denominator)


def transfer(f: RationalFunction, chart: Chart) -> RationalFunction:
    """
    Re-express a rational function in another chart's field by symbol name

    Raises:
        CoeffsException: If f uses a symbol the target chart does not have
    """
    if f.field == chart.field:
        return f
    try:
        return chart.field.from_expr(f.as_expr())
    except ValueError:
        raise CoeffsException(f"{render(f)} is not expressible on chart {chart.label()}")


def affine_coefficients(f: RationalFunction, chart: Chart) -> Tuple[Tuple[Fraction, ...], Fraction]:
    """
    Split an affine function into its coordinate coefficients and constant term

    Raises:
        NotAffine: If f has a denominator, a parameter or a term of degree above one
    """
    if not f.denom.is_ground:
        raise NotAffine(f"Not affine: {render(f)}")
    polynomial = _as_polynomial(f)
    linear = [Fraction(0)] * chart.dim
    constant = Fraction(0)
    for monom, coeff in polynomial.terms():
        value = Fraction(int(coeff.numerator), int(coeff.denominator))
        if sum(monom) == 0:
            constant = value
        elif sum(monom) == 1 and monom.index(1) < chart.dim:
            linear[monom.index(1)] = value
        else:
            raise NotAffine(f"Not affine in {chart.label()}: {render(f)}")
    return tuple(linear), constant


def render(f: RationalFunction) -> str:
    """Canonical text form; powers use '^' so the output parses back"""
    return sympy.sstr(f.as_expr()).replace('**', '^')


def random_rational(rng: random.Random, height: int = 9) -> Fraction:
    """Small-height rational with numerator in [-height, height] and nonzero denominator"""
    denominator = rng.choice([d for d in range(-height, height + 1) if d != 0])
    return Fraction(rng.randint(-height, height), denominator)


def random_point(rng: random.Random, chart: Chart, height: int = 9) -> Tuple[Fraction, ...]:
    """Random rational values for every coordinate and parameter of the chart"""
    return tuple(random_rational(rng, height) for _ in chart.names)
