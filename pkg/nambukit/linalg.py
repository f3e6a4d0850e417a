"""Exact linear algebra: constant spans over QQ and square matrices over the coefficient field."""
import logging
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import sympy
from sympy.polys.matrices import DomainMatrix

from nambukit.coeffs import Chart, RationalFunction

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

Vector = Tuple[Fraction, ...]


def _to_fraction(value) -> Fraction:
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def _matrix(rows: Sequence[Sequence[Fraction]], ncols: int) -> sympy.Matrix:
    if not rows:
        return sympy.zeros(0, ncols)
    return sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in row] for row in rows])


def unit_vector(dim: int, i: int) -> Vector:
    return tuple(Fraction(1) if k == i else Fraction(0) for k in range(dim))


def rank(rows: Sequence[Vector], ncols: int) -> int:
    if not rows:
        return 0
    return _matrix(rows, ncols).rank()


def row_basis(rows: Sequence[Vector], ncols: int) -> List[Vector]:
    """Reduced row echelon basis of the span of the rows"""
    if not rows:
        return []
    reduced, pivots = _matrix(rows, ncols).rref()
    return [tuple(_to_fraction(v) for v in reduced.row(i)) for i in range(len(pivots))]


def nullspace(rows: Sequence[Vector], ncols: int) -> List[Vector]:
    """Basis of {v : row . v = 0 for every row}; unit vectors when there are no rows"""
    if not rows or all(v == 0 for row in rows for v in row):
        return [unit_vector(ncols, i) for i in range(ncols)]
    return [tuple(_to_fraction(v) for v in column) for column in _matrix(rows, ncols).nullspace()]


def in_span(vector: Vector, rows: Sequence[Vector]) -> bool:
    return rank(list(rows) + [vector], len(vector)) == rank(rows, len(vector))


def extend_basis(current: Sequence[Vector], candidates: Sequence[Vector], ncols: int) -> List[Vector]:
    """Greedily pick candidates that enlarge span(current); returns only the picked ones"""
    chosen: List[Vector] = []
    size = rank(current, ncols)
    for candidate in candidates:
        if rank(list(current) + chosen + [candidate], ncols) > size:
            chosen.append(candidate)
            size += 1
    return chosen


def combination(vector: Vector, rows: Sequence[Vector]) -> Optional[Vector]:
    """Coefficients lambda with sum lambda_k rows_k = vector for independent rows, or None"""
    if not rows:
        return () if all(v == 0 for v in vector) else None
    system = _matrix(rows, len(vector)).T
    target = _matrix([vector], len(vector)).T
    augmented = system.row_join(target)
    reduced, pivots = augmented.rref()
    if len(rows) in pivots:
        return None
    solution = [Fraction(0)] * len(rows)
    for row, pivot in enumerate(pivots):
        solution[pivot] = _to_fraction(reduced[row, len(rows)])
    return tuple(solution)


def intersection(first: Sequence[Vector], second: Sequence[Vector], ncols: int) -> List[Vector]:
    """Basis of span(first) intersected with span(second)"""
    if not first or not second:
        return []
    stacked = [tuple(first[k][j] for k in range(len(first))) + tuple(-second[k][j] for k in range(len(second)))
               for j in range(ncols)]
    vectors = []
    for solution in nullspace(stacked, len(first) + len(second)):
        vectors.append(tuple(sum((solution[k] * first[k][j] for k in range(len(first))), Fraction(0))
                             for j in range(ncols)))
    return row_basis(vectors, ncols)


def function_matrix(chart: Chart, rows: Sequence[Sequence[RationalFunction]]) -> DomainMatrix:
    """Square or rectangular matrix over the chart's rational function field"""
    domain = chart.field.to_domain()
    ncols = len(rows[0]) if rows else 0
    return DomainMatrix([list(row) for row in rows], (len(rows), ncols), domain)


def identity_matrix(chart: Chart, size: int) -> DomainMatrix:
    return DomainMatrix.eye(size, chart.field.to_domain())


def entry(matrix: DomainMatrix, i: int, j: int) -> RationalFunction:
    return matrix[i, j].element


def entries(matrix: DomainMatrix) -> List[List[RationalFunction]]:
    rows, cols = matrix.shape
    return [[entry(matrix, i, j) for j in range(cols)] for i in range(rows)]
