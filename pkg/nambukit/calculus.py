import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import sympy

from nambukit.coeffs import Chart, RationalFunction, partial
from nambukit.exterior import (
    Alternating,
    DegreeMismatch,
    Form,
    MultiIndex,
    Multivector,
    interior,
    wedge,
    wedge_all,
)

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class CalculusException(Exception):
    """Custom exception for differential operator errors"""
    pass


class SingularMap(CalculusException):
    """Exception for affine maps with zero determinant"""
    pass


def _sympy_matrix(rows: Sequence[Sequence[Fraction]]) -> sympy.Matrix:
    return sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in row] for row in rows])


def _fractions(matrix: sympy.Matrix) -> Tuple[Tuple[Fraction, ...], ...]:
    return tuple(tuple(Fraction(int(v.p), int(v.q)) for v in (sympy.Rational(x) for x in matrix.row(i)))
                 for i in range(matrix.rows))


@dataclass(frozen=True)
class AffineMap:
    """
    Affine change of coordinates y = matrix . x + offset from source to target chart

    Row k of the matrix expresses target coordinate k in the source coordinates.
    """
    source: Chart
    target: Chart
    matrix: Tuple[Tuple[Fraction, ...], ...]
    offset: Tuple[Fraction, ...]

    def __post_init__(self):
        m = self.source.dim
        if self.target.dim != m or len(self.matrix) != m or any(len(row) != m for row in self.matrix):
            raise CalculusException(f"Affine map between {self.source.label()} and {self.target.label()} is not square")
        if self.source.parameters != self.target.parameters:
            raise CalculusException("Affine map must keep chart parameters")
        if len(self.offset) != m:
            raise CalculusException("Offset length does not match chart dimension")
        if _sympy_matrix(self.matrix).det() == 0:
            logger.error(f"Singular affine map onto {self.target.label()}")
            raise SingularMap(f"Affine map onto {self.target.label()} has zero determinant")

    @classmethod
    def identity(cls, chart: Chart) -> 'AffineMap':
        m = chart.dim
        rows = tuple(tuple(Fraction(int(i == j)) for j in range(m)) for i in range(m))
        return cls(chart, chart, rows, tuple(Fraction(0) for _ in range(m)))

    def inverse(self) -> 'AffineMap':
        inverse = _sympy_matrix(self.matrix).inv()
        shift = inverse * _sympy_matrix([self.offset]).T
        return AffineMap(self.target, self.source, _fractions(inverse),
                         tuple(-v for v in _fractions(shift.T)[0]))

    def apply(self, point: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        return tuple(sum((a * Fraction(x) for a, x in zip(row, point)), Fraction(0)) + b
                     for row, b in zip(self.matrix, self.offset))


def directional(X: Multivector, f: RationalFunction) -> RationalFunction:
    """X(f) = sum of X^i times the i-th partial of f"""
    total = X.chart.zero()
    for (i,), coeff in X.terms:
        total += coeff * partial(f, i)
    return total


def exterior_d(omega: Form) -> Form:
    """
    Exterior derivative d(f dx^I) = sum_i (df/dx^i) dx^i ^ dx^I

    Args:
        omega: Form of degree k

    Returns:
        Form of degree k + 1
    """
    if not isinstance(omega, Form):
        raise DegreeMismatch("exterior_d expects a form")
    chart = omega.chart
    result = Form.zero(chart, omega.degree + 1)
    for index, f in omega.terms:
        basis = Form.basis(chart, index)
        for i in range(chart.dim):
            derivative = partial(f, i)
            if derivative:
                result = result + wedge(Form.basis(chart, (i,)), basis) * derivative
    return result


def differential(f: RationalFunction, chart: Chart) -> Form:
    return exterior_d(Form.scalar(chart, f))


def lie_bracket(X: Multivector, Y: Multivector) -> Multivector:
    """[X, Y]^j = sum_i (X^i d_i Y^j - Y^i d_i X^j)"""
    if X.degree != 1 or Y.degree != 1:
        raise DegreeMismatch("lie_bracket expects vector fields")
    chart = X.chart
    result: Dict[MultiIndex, RationalFunction] = {}
    for j in range(chart.dim):
        component = directional(X, Y.coefficient((j,))) - directional(Y, X.coefficient((j,)))
        result[(j,)] = component
    return Multivector.build(chart, 1, result)


def lie_derivative_form(X: Multivector, omega: Form) -> Form:
    """Lie derivative of a form through the Cartan formula i_X d + d i_X"""
    if omega.degree == 0:
        return Form.scalar(omega.chart, directional(X, omega.coefficient(())))
    return interior(X, exterior_d(omega)) + exterior_d(interior(X, omega))


def lie_derivative_mv(X: Multivector, P: Multivector) -> Multivector:
    """
    Lie derivative of a multivector field via the frame formula

    L_X(f D_J) = X(f) D_J + f sum_r D_j1 ^ ... ^ [X, D_jr] ^ ... ^ D_jk

    Args:
        X: Vector field
        P: Multivector of degree k

    Returns:
        Multivector of degree k
    """
    chart = P.chart
    if P.degree == 0:
        return Multivector.scalar(chart, directional(X, P.coefficient(())))
    frame = [Multivector.basis(chart, (i,)) for i in range(chart.dim)]
    # [X, D_j] = -sum_i (d_j X^i) D_i
    brackets = [Multivector.build(chart, 1, {(i,): -partial(X.coefficient((i,)), j) for i in range(chart.dim)})
                for j in range(chart.dim)]
    result = Multivector.zero(chart, P.degree)
    for index, f in P.terms:
        derivative = directional(X, f)
        if derivative:
            result = result + Multivector.basis(chart, index) * derivative
        for r, j in enumerate(index):
            if not brackets[j]:
                continue
            factors = [frame[i] for i in index]
            factors[r] = brackets[j]
            result = result + wedge_all(factors, chart, Multivector) * f
    return result


def change_coordinates(T: AffineMap, obj: Alternating) -> Alternating:
    """
    Transport a form or multivector through an affine change of coordinates

    Forms pull back along the inverse map and multivectors push forward along T.

    Args:
        T: Affine map whose source chart is obj's chart
        obj: Form or Multivector

    Returns:
        The same object expressed on T.target
    """
    if obj.chart != T.source:
        raise CalculusException(f"Object lives on {obj.chart.label()}, map starts at {T.source.label()}")
    target = T.target
    inverse = T.inverse()
    source_symbols = sympy.symbols(T.source.coordinates)
    target_symbols = sympy.symbols(target.coordinates)
    replacements = {
        symbol: sum((sympy.Rational(a.numerator, a.denominator) * y for a, y in zip(row, target_symbols)),
                    sympy.Rational(b.numerator, b.denominator))
        for symbol, row, b in zip(source_symbols, inverse.matrix, inverse.offset)
    }

    def convert(f: RationalFunction) -> RationalFunction:
        return target.field.from_expr(f.as_expr().xreplace(replacements))

    m = target.dim
    if isinstance(obj, Form):
        images: List[Alternating] = [
            Form.build(target, 1, {(j,): target.constant(inverse.matrix[i][j]) for j in range(m)}) for i in range(m)
        ]
        kind = Form
    else:
        images = [
            Multivector.build(target, 1, {(j,): target.constant(T.matrix[j][i]) for j in range(m)}) for i in range(m)
        ]
        kind = Multivector
    result = kind.zero(target, obj.degree)
    for index, f in obj.terms:
        result = result + wedge_all([images[i] for i in index], target, kind) * convert(f)
    return result
