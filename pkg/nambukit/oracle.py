"""
Random-point oracle: evaluate both sides of an identity at small-height rational points.

One side is the engine's symbolic result evaluated at the point. The other side is rebuilt
at the point from the input data alone: sympy derivatives of the coefficient expressions,
the determinant formula for brackets and exact rational matrices for sharp maps, gauge
inverses and pushforwards.
"""
import itertools
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Dict, List, Sequence, Tuple

import sympy
from sympy.combinatorics import Permutation

from nambukit.coeffs import Chart, PoleAtPoint, RationalFunction, evaluate, random_point, random_rational
from nambukit.exterior import Form, Multivector, MultiIndex, basis_indices, interior_form, pair
from nambukit.gauge import CommuteResult, gauge
from nambukit.nambu_core import NambuStructure, bracket
from nambukit.reduction import AdaptedChart, ReducedStructure, ReductionProblem
from utils.concurrency import retry

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MAX_RESAMPLES = 100
HEIGHT = 9
DEFAULT_POINTS = 50

Point = Tuple[Fraction, ...]
Values = Dict[MultiIndex, Fraction]


@dataclass(frozen=True)
class OracleResult:
    """Per-identity tally of exact point evaluations"""
    identity: str
    checked: int
    skipped: int
    mismatches: Tuple[Tuple[Tuple[str, ...], str, str], ...] = ()

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def render(self) -> List[str]:
        lines = [f"{self.identity}: {self.checked} point(s) checked, {len(self.mismatches)} mismatch(es)"]
        if self.skipped:
            lines.append(f"skipped {self.skipped} point(s) after {MAX_RESAMPLES} pole resamples")
        for point, lhs, rhs in self.mismatches:
            lines.append(f"mismatch at ({', '.join(point)}): {lhs} != {rhs}")
        return lines


def random_polynomial(rng: random.Random, chart: Chart, terms: int = 3) -> RationalFunction:
    """Sum of a few random monomials of degree <= 2 with small integer coefficients"""
    result = chart.constant(rng.randint(-3, 3))
    for _ in range(terms):
        monomial = chart.constant(rng.choice([c for c in range(-3, 4) if c != 0]))
        for _ in range(rng.randint(1, 2)):
            monomial = monomial * chart.coordinate(rng.randrange(chart.dim))
        result += monomial
    return result


def _random_alternating(rng: random.Random, chart: Chart, degree: int, kind):
    indices = basis_indices(chart.dim, degree)
    chosen = rng.sample(indices, min(len(indices), 2))
    return kind.build(chart, degree, {index: random_polynomial(rng, chart) for index in chosen})


def _rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def _fraction(value: sympy.Expr) -> Fraction:
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def _substitution(chart: Chart, point: Point) -> Dict[sympy.Symbol, sympy.Rational]:
    return {symbol: _rational(Fraction(v)) for symbol, v in zip(chart.field.symbols, point)}


def _value(expr: sympy.Expr, substitution: Dict[sympy.Symbol, sympy.Rational]) -> Fraction:
    """Exact value of a sympy expression, raising PoleAtPoint where it is undefined"""
    value = sympy.sympify(expr).xreplace(substitution)
    if not value.is_Rational:
        raise PoleAtPoint(f"Pole of {expr} at {tuple(str(v) for v in substitution.values())}")
    return Fraction(int(value.p), int(value.q))


def _expressions(obj) -> Dict[MultiIndex, sympy.Expr]:
    return {index: f.as_expr() for index, f in obj.terms}


def _values(expressions: Dict[MultiIndex, sympy.Expr], substitution) -> Values:
    return {index: _value(expr, substitution) for index, expr in expressions.items()}


def _sign(sequence: Sequence[int]) -> int:
    """Sign of the permutation sorting the entries, 0 on a repeated entry"""
    if len(set(sequence)) != len(sequence):
        return 0
    if len(sequence) < 2:
        return 1
    order = sorted(range(len(sequence)), key=lambda k: sequence[k])
    return Permutation(order).signature()


def _component(values: Values, sequence: Sequence[int]) -> Fraction:
    """Fully skew component at an arbitrary index sequence"""
    sign = _sign(sequence)
    if not sign:
        return Fraction(0)
    return sign * values.get(tuple(sorted(sequence)), Fraction(0))


def _bracket_expr(pi: Dict[MultiIndex, sympy.Expr], functions: Sequence[sympy.Expr],
                  symbols: Sequence[sympy.Symbol]) -> sympy.Expr:
    """Sum over increasing I of Pi^I det(d f_a / d x_{I_b})"""
    total = sympy.Integer(0)
    for index, coefficient in pi.items():
        jacobian = sympy.Matrix([[sympy.diff(f, symbols[i]) for i in index] for f in functions])
        total += coefficient * jacobian.det(method='berkowitz')
    return total


def _wedge_values(alpha: Values, beta: Values, k: int, l: int, dim: int) -> Values:
    """(alpha ^ beta)_J as the normalized alternating sum over all orderings of J"""
    scale = Fraction(1, factorial(k) * factorial(l))
    result = {}
    for index in basis_indices(dim, k + l):
        total = Fraction(0)
        for order in itertools.permutations(index):
            total += _sign(order) * _component(alpha, order[:k]) * _component(beta, order[k:])
        result[index] = total * scale
    return result


def _gauge_values(pi: Values, b: Values, dim: int, order: int) -> Values:
    """Transported n-vector at a point, from the sharp map Pi# (Id + B~ Pi#)^-1"""
    heads = basis_indices(dim, order - 1)
    position = {head: c for c, head in enumerate(heads)}
    sharp = sympy.Matrix([[_rational(_component(pi, head + (j,))) for head in heads] for j in range(dim)])
    btilde = sympy.Matrix([[_rational(_component(b, (j,) + head)) for j in range(dim)] for head in heads])
    matrix = sympy.eye(len(heads)) + btilde * sharp
    if matrix.det() == 0:
        raise PoleAtPoint("Gauge matrix is singular at the point")
    transported = sharp * matrix.inv()
    return {index: _fraction(transported[index[-1], position[index[:-1]]])
            for index in basis_indices(dim, order)}


def _pushforward(values: Values, rows: Sequence[Sequence[Fraction]], order: int) -> Values:
    """Components of an n-vector against the differentials of affine functions with gradients `rows`"""
    result = {}
    for target in basis_indices(len(rows), order):
        total = Fraction(0)
        for index, v in values.items():
            minor = sympy.Matrix([[_rational(rows[k][i]) for i in index] for k in target])
            total += v * _fraction(minor.det())
        result[target] = total
    return result


def _engine_values(P: Multivector, point: Point) -> Tuple[Fraction, ...]:
    return tuple(evaluate(P.coefficient(index), point) for index in basis_indices(P.chart.dim, P.degree))


def _lift(rng: random.Random, adapted: AdaptedChart) -> Tuple[Point, Point]:
    """Random point of N in source coordinates together with its quotient coordinates"""
    T = adapted.map
    parameters = tuple(random_rational(rng, HEIGHT) for _ in T.source.parameters)
    y = [Fraction(0) if i in adapted.constraint_coordinates else random_rational(rng, HEIGHT)
         for i in range(T.source.dim)]
    matrix = sympy.Matrix([[_rational(v) for v in row] for row in T.matrix])
    shifted = sympy.Matrix([_rational(v - b) for v, b in zip(y, T.offset)])
    x = tuple(_fraction(v) for v in matrix.LUsolve(shifted))
    quotient = tuple(y[i] for i in adapted.quotient_coordinates)
    return x + parameters, quotient + parameters


def _residuals(problem: ReductionProblem, point: Point) -> Tuple[Fraction, ...]:
    return tuple(sum((a * v for a, v in zip(gradient, point)), Fraction(0)) + c
                 for gradient, c in problem.N.constraints)


def _run(identity: str, points: int, sample: Callable) -> OracleResult:
    guarded = retry(max_retries=MAX_RESAMPLES, exceptions=(PoleAtPoint,))(sample)
    checked, skipped, mismatches = 0, 0, []
    for _ in range(points):
        try:
            point, lhs, rhs = guarded()
        except PoleAtPoint:
            skipped += 1
            logger.warning(f"Oracle {identity}: skipped a point after {MAX_RESAMPLES} pole resamples")
            continue
        checked += 1
        if lhs != rhs:
            logger.error(f"Oracle {identity}: mismatch at {point}, possible engine bug")
            mismatches.append((tuple(str(v) for v in point), str(lhs), str(rhs)))
    logger.info(f"Oracle {identity}: {checked} checked, {skipped} skipped, {len(mismatches)} mismatches")
    return OracleResult(identity, checked, skipped, tuple(mismatches))


def oracle_bracket(Pi: NambuStructure, points: int, rng: random.Random) -> OracleResult:
    """Engine bracket of random polynomials against the determinant formula at random points"""
    chart = Pi.chart
    pi = _expressions(Pi.tensor)
    symbols = chart.field.symbols[:chart.dim]

    def sample():
        fs = [random_polynomial(rng, chart) for _ in range(Pi.order)]
        point = random_point(rng, chart, HEIGHT)
        independent = _bracket_expr(pi, [f.as_expr() for f in fs], symbols)
        return point, evaluate(bracket(Pi, fs), point), _value(independent, _substitution(chart, point))

    return _run('bracket', points, sample)


def oracle_fi(Pi: NambuStructure, points: int, rng: random.Random) -> OracleResult:
    """
    Both sides of the fundamental identity at random points for random polynomial arguments

    Every bracket is rebuilt from the coefficient expressions with sympy derivatives, so
    the tally is independent of the symbolic FI decision.

    Args:
        Pi: Nambu structure of order n
        points: Number of points to check
        rng: Seeded generator shared by the session

    Returns:
        OracleResult for the identity 'fi'
    """
    chart = Pi.chart
    n = Pi.order
    pi = _expressions(Pi.tensor)
    symbols = chart.field.symbols[:chart.dim]

    def brace(functions):
        return _bracket_expr(pi, functions, symbols)

    def sample():
        gs = [random_polynomial(rng, chart).as_expr() for _ in range(n - 1)]
        fs = [random_polynomial(rng, chart).as_expr() for _ in range(n)]
        point = random_point(rng, chart, HEIGHT)
        substitution = _substitution(chart, point)
        lhs = brace(gs + [brace(fs)])
        rhs = sum((brace(fs[:k] + [brace(gs + [fs[k]])] + fs[k + 1:]) for k in range(n)), sympy.Integer(0))
        return point, _value(lhs, substitution), _value(rhs, substitution)

    return _run('fi', points, sample)


def oracle_adjunction(chart: Chart, points: int, rng: random.Random) -> OracleResult:
    """Engine pair(beta, interior_form(alpha, P)) against a pointwise pair(alpha ^ beta, P)"""

    def sample():
        total = rng.randint(2, max(2, chart.dim)) if chart.dim >= 2 else 1
        k = rng.randint(1, max(1, total - 1)) if total > 1 else 1
        alpha = _random_alternating(rng, chart, k, Form)
        beta = _random_alternating(rng, chart, total - k, Form)
        P = _random_alternating(rng, chart, total, Multivector)
        point = random_point(rng, chart, HEIGHT)
        substitution = _substitution(chart, point)
        lhs = evaluate(pair(beta, interior_form(alpha, P)), point)
        wedged = _wedge_values(_values(_expressions(alpha), substitution), _values(_expressions(beta), substitution),
                               k, total - k, chart.dim)
        tensor = _values(_expressions(P), substitution)
        rhs = sum((v * tensor.get(index, Fraction(0)) for index, v in wedged.items()), Fraction(0))
        return point, lhs, rhs

    return _run('adjunction', points, sample)


def oracle_anchor(Pi: NambuStructure, B: Form, points: int, rng: random.Random) -> OracleResult:
    """Symbolic gauge transform against Pi# (Id + B~ Pi#)^-1 inverted at each point"""
    data = gauge(Pi, B)
    chart = Pi.chart
    pi, b = _expressions(Pi.tensor), _expressions(B)

    def sample():
        point = random_point(rng, chart, HEIGHT)
        substitution = _substitution(chart, point)
        expected = _gauge_values(_values(pi, substitution), _values(b, substitution), chart.dim, Pi.order)
        return point, _engine_values(data.transported.tensor, point), tuple(expected.values())

    return _run('anchor', points, sample)


def oracle_reduce(problem: ReductionProblem, reduced: ReducedStructure, points: int,
                  rng: random.Random) -> OracleResult:
    """
    Reduced tensor at a quotient point against the pushforward of Pi at a lift on N

    Lift points put the constraint coordinates of the adapted chart at zero and draw the
    F and quotient coordinates at random; the residuals of N's constraints are compared
    with zero alongside the tensor components.

    Args:
        problem: Reduction problem that was reduced
        reduced: Its reduced structure
        points: Number of points to check
        rng: Seeded generator shared by the session

    Returns:
        OracleResult for the identity 'reduce'
    """
    adapted = reduced.adapted
    rows = [adapted.map.matrix[i] for i in adapted.quotient_coordinates]
    pi = _expressions(problem.Pi.tensor)

    def sample():
        point, quotient = _lift(rng, adapted)
        residuals = _residuals(problem, point)
        expected = _pushforward(_values(pi, _substitution(problem.chart, point)), rows, problem.order)
        lhs = _engine_values(reduced.tensor.tensor, quotient) + residuals
        rhs = tuple(expected.values()) + tuple(Fraction(0) for _ in residuals)
        return quotient, lhs, rhs

    return _run('reduce', points, sample)


def oracle_commute(problem: ReductionProblem, B: Form, result: CommuteResult, points: int,
                   rng: random.Random) -> OracleResult:
    """Reduce-then-gauge tensor against a pointwise gauge on M pushed forward to N/F"""
    adapted = result.gauge_then_reduce.adapted
    rows = [adapted.map.matrix[i] for i in adapted.quotient_coordinates]
    chart = problem.chart
    pi, b = _expressions(problem.Pi.tensor), _expressions(B)

    def sample():
        point, quotient = _lift(rng, adapted)
        substitution = _substitution(chart, point)
        transported = _gauge_values(_values(pi, substitution), _values(b, substitution), chart.dim, problem.order)
        expected = _pushforward(transported, rows, problem.order)
        return quotient, _engine_values(result.reduce_then_gauge.tensor, quotient), tuple(expected.values())

    return _run('commute', points, sample)
