import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Dict, Iterable, Iterator, List, Tuple, Union

from sympy.combinatorics import Permutation

from nambukit.coeffs import Chart, RationalFunction, Scalar, is_zero, render

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]


class ExteriorException(Exception):
    """Custom exception for exterior algebra errors"""
    pass


class ChartMismatch(ExteriorException):
    """Exception for combining objects living on different charts"""
    pass


class DegreeMismatch(ExteriorException):
    """Exception for incompatible degrees"""
    pass


def merge_sign(first: MultiIndex, second: MultiIndex) -> int:
    """
    Sign of sorting the concatenation of two increasing multi-indices

    Returns:
        +1 or -1, or 0 when an index repeats
    """
    merged = first + second
    if len(set(merged)) != len(merged):
        return 0
    order = sorted(range(len(merged)), key=merged.__getitem__)
    if len(order) < 2:
        return 1
    return -1 if Permutation(order).parity() else 1


def basis_indices(dim: int, degree: int) -> List[MultiIndex]:
    """All strictly increasing multi-indices of a given length, in lexicographic order"""
    return list(combinations(range(dim), degree))


@dataclass(frozen=True)
class _Alternating:
    """Sparse alternating object: sorted (multi-index, nonzero coefficient) pairs"""
    chart: Chart
    degree: int
    terms: Tuple[Tuple[MultiIndex, RationalFunction], ...] = ()

    PREFIX = ''

    def __post_init__(self):
        if self.degree < 0:
            raise DegreeMismatch(f"Negative degree {self.degree}")
        for index, coeff in self.terms:
            if len(index) != self.degree:
                raise DegreeMismatch(f"Multi-index {index} does not have length {self.degree}")
            if any(a >= b for a, b in zip(index, index[1:])) or any(i < 0 or i >= self.chart.dim for i in index):
                raise ExteriorException(f"Multi-index {index} is not strictly increasing in range")
            if is_zero(coeff):
                raise ExteriorException(f"Zero coefficient stored at {index}")

    @classmethod
    def build(cls, chart: Chart, degree: int, mapping: Dict[MultiIndex, RationalFunction]):
        """Construct from a coefficient map, dropping zeros and sorting keys"""
        terms = tuple(sorted((index, coeff) for index, coeff in mapping.items() if not is_zero(coeff)))
        return cls(chart, degree, terms)

    @classmethod
    def zero(cls, chart: Chart, degree: int):
        return cls(chart, degree, ())

    @classmethod
    def scalar(cls, chart: Chart, value: Scalar):
        return cls.build(chart, 0, {(): chart.lift(value)})

    @classmethod
    def basis(cls, chart: Chart, index: Iterable[int]):
        index = tuple(index)
        return cls.build(chart, len(index), {index: chart.one()})

    def as_dict(self) -> Dict[MultiIndex, RationalFunction]:
        return dict(self.terms)

    def coefficient(self, index: MultiIndex) -> RationalFunction:
        return self.as_dict().get(tuple(index), self.chart.zero())

    def map_coefficients(self, func: Callable[[RationalFunction], RationalFunction], chart: Chart = None):
        """Apply func to every coefficient, optionally landing on another chart"""
        return type(self).build(chart or self.chart, self.degree, {i: func(c) for i, c in self.terms})

    def __iter__(self) -> Iterator[Tuple[MultiIndex, RationalFunction]]:
        return iter(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def _check(self, other):
        if type(other) is not type(self):
            raise DegreeMismatch(f"Cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.chart != self.chart:
            raise ChartMismatch(f"Charts differ: {self.chart.label()} vs {other.chart.label()}")
        if other.degree != self.degree:
            raise DegreeMismatch(f"Degrees differ: {self.degree} vs {other.degree}")

    def __add__(self, other):
        self._check(other)
        result = self.as_dict()
        for index, coeff in other.terms:
            result[index] = result.get(index, self.chart.zero()) + coeff
        return type(self).build(self.chart, self.degree, result)

    def __neg__(self):
        return self.map_coefficients(lambda c: -c)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, value: Scalar):
        if isinstance(value, _Alternating):
            return NotImplemented
        factor = self.chart.lift(value)
        return self.map_coefficients(lambda c: c * factor)

    __rmul__ = __mul__

    def render(self) -> str:
        """Text form with terms sorted by multi-index, e.g. w*Dx^Dy^Dz"""
        if not self.terms:
            return '0'
        pieces = []
        for index, coeff in self.terms:
            basis = '^'.join(f"{self.PREFIX}{self.chart.coordinates[i]}" for i in index)
            text = render(coeff)
            if not basis:
                term = f"({text})" if ' ' in text else text
            elif text == '1':
                term = basis
            elif text == '-1':
                term = f"-{basis}"
            else:
                term = f"({text})*{basis}" if ' ' in text else f"{text}*{basis}"
            pieces.append(term)
        rendered = pieces[0]
        for piece in pieces[1:]:
            rendered += f" - {piece[1:]}" if piece.startswith('-') else f" + {piece}"
        return rendered

    def __str__(self) -> str:
        return self.render()


class Multivector(_Alternating):
    """Multivector field of degree k: sum of f_J dx^J-dual blades D_{j1}^...^D_{jk}"""
    PREFIX = 'D'


class Form(_Alternating):
    """Differential form of degree k: sum of f_I dx^{i1}^...^dx^{ik}"""
    PREFIX = 'd'


Alternating = Union[Multivector, Form]


def _same_chart(a: _Alternating, b: _Alternating):
    if a.chart != b.chart:
        logger.error(f"Chart mismatch: {a.chart.label()} vs {b.chart.label()}")
        raise ChartMismatch(f"Charts differ: {a.chart.label()} vs {b.chart.label()}")


def wedge(a: Alternating, b: Alternating) -> Alternating:
    """
    Wedge product of two multivectors or two forms

    Args:
        a: Left factor
        b: Right factor of the same kind

    Returns:
        a^b, with sign from sorting merged indices; repeated indices annihilate

    Raises:
        ChartMismatch: If charts differ
        DegreeMismatch: If the kinds differ
    """
    _same_chart(a, b)
    if type(a) is not type(b):
        raise DegreeMismatch(f"Cannot wedge {type(a).__name__} with {type(b).__name__}")
    result: Dict[MultiIndex, RationalFunction] = {}
    for left, f in a.terms:
        for right, g in b.terms:
            sign = merge_sign(left, right)
            if sign == 0:
                continue
            index = tuple(sorted(left + right))
            result[index] = result.get(index, a.chart.zero()) + (f * g if sign > 0 else -(f * g))
    return type(a).build(a.chart, a.degree + b.degree, result)


def wedge_all(factors: List[Alternating], chart: Chart, kind=Form) -> Alternating:
    """Wedge a list of factors left to right; the empty wedge is the scalar 1"""
    result = kind.scalar(chart, 1)
    for factor in factors:
        result = wedge(result, factor)
    return result


def pair(alpha: Form, P: Multivector) -> RationalFunction:
    """
    Determinant pairing of a k-form with a k-multivector

    Raises:
        DegreeMismatch: If degrees differ or arguments are of the wrong kind
        ChartMismatch: If charts differ
    """
    if not isinstance(alpha, Form) or not isinstance(P, Multivector):
        raise DegreeMismatch("pair expects a form and a multivector")
    _same_chart(alpha, P)
    if alpha.degree != P.degree:
        raise DegreeMismatch(f"Cannot pair degree {alpha.degree} with degree {P.degree}")
    vector_terms = P.as_dict()
    total = alpha.chart.zero()
    for index, f in alpha.terms:
        if index in vector_terms:
            total += f * vector_terms[index]
    return total


def interior(X: Multivector, omega: Form) -> Form:
    """
    Contraction i_X of a vector field into a form

    Raises:
        DegreeMismatch: If X is not a vector field or omega has degree 0
    """
    if X.degree != 1 or not isinstance(omega, Form) or omega.degree < 1:
        raise DegreeMismatch(f"interior needs a vector field and a form of degree >= 1")
    _same_chart(X, omega)
    components = {index[0]: coeff for index, coeff in X.terms}
    result: Dict[MultiIndex, RationalFunction] = {}
    for index, f in omega.terms:
        for position, j in enumerate(index):
            if j not in components:
                continue
            rest = index[:position] + index[position + 1:]
            term = components[j] * f
            result[rest] = result.get(rest, omega.chart.zero()) + (term if position % 2 == 0 else -term)
    return Form.build(omega.chart, omega.degree - 1, result)


def interior_form(eta: Form, P: Multivector) -> Multivector:
    """
    Contraction of a form into a multivector through its first slots

    Satisfies pair(beta, interior_form(eta, P)) == pair(eta ^ beta, P).

    Args:
        eta: Form of degree k
        P: Multivector of degree l >= k

    Returns:
        Multivector of degree l - k

    Raises:
        DegreeMismatch: If k > l
    """
    if not isinstance(eta, Form) or not isinstance(P, Multivector):
        raise DegreeMismatch("interior_form expects a form and a multivector")
    _same_chart(eta, P)
    if eta.degree > P.degree:
        raise DegreeMismatch(f"Cannot contract degree {eta.degree} into degree {P.degree}")
    result: Dict[MultiIndex, RationalFunction] = {}
    for slots, f in eta.terms:
        for index, g in P.terms:
            if not set(slots) <= set(index):
                continue
            rest = tuple(i for i in index if i not in slots)
            sign = merge_sign(slots, rest)
            result[rest] = result.get(rest, P.chart.zero()) + (f * g if sign > 0 else -(f * g))
    return Multivector.build(P.chart, P.degree - eta.degree, result)
