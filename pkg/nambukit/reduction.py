import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from nambukit.calculus import AffineMap, change_coordinates, differential, directional, lie_derivative_mv
from nambukit.coeffs import (
    Chart,
    CoeffsException,
    RationalFunction,
    affine_coefficients,
    is_constant,
    is_zero,
    partial,
    render,
    substitute,
    to_rational,
    transfer,
)
from nambukit.exterior import Alternating, Form, Multivector, basis_indices, interior, interior_form, pair, wedge_all
from nambukit.linalg import (
    Vector,
    combination,
    extend_basis,
    function_matrix,
    in_span,
    intersection,
    nullspace,
    rank,
    row_basis,
    unit_vector,
    entry,
)
from nambukit.nambu_core import CheckResult, NambuStructure, bracket, check_fi, sharp

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

TANGENT = 'tangent'
DISTRIBUTION = 'distribution'
DEFINITION = 'definition'
ROUTES = (TANGENT, DISTRIBUTION, DEFINITION)

_FRESH_NAMES = ('u', 'v', 's', 't')


class ReductionException(Exception):
    """Custom exception for reduction errors"""
    pass


class InvalidProblem(ReductionException):
    """Exception for ill-formed submanifolds, bundles or reduction problems"""
    pass


class NonConstantRank(ReductionException):
    """Exception for images whose rank cannot be certified constant along N"""
    pass


class HypothesesFailed(ReductionException):
    """Exception raised when no reduction route is licensed"""

    def __init__(self, message: str, report: 'HypothesisReport'):
        super().__init__(message)
        self.report = report


class NotAdapted(ReductionException):
    """Exception for maps that do not bring N, E and D to coordinate normal form"""
    pass


class FIRefutedOnQuotient(ReductionException):
    """Exception for a quotient that fails the fundamental identity after a sufficient-condition route licensed it"""
    pass


class EmptyQuotient(ReductionException):
    """Exception for a quotient N/F of dimension zero, which carries no chart"""
    pass


class OrderTooSmall(ReductionException):
    """Exception for freezing more slots than a subordinate structure allows"""
    pass


def constant_row(v: Multivector) -> Vector:
    """Coordinate components of a constant vector field"""
    if v.degree != 1:
        raise InvalidProblem(f"Expected a vector field, got degree {v.degree}")
    try:
        return tuple(to_rational(v.coefficient((i,))) for i in range(v.chart.dim))
    except CoeffsException:
        raise InvalidProblem(f"Spanning vector {v.render()} does not have constant coefficients")


def row_vector(chart: Chart, row: Vector) -> Multivector:
    return Multivector.build(chart, 1, {(i,): chart.constant(value) for i, value in enumerate(row)})


def row_form(chart: Chart, row: Vector) -> Form:
    return Form.build(chart, 1, {(i,): chart.constant(value) for i, value in enumerate(row)})


@dataclass(frozen=True)
class SubmanifoldSpec:
    """Affine submanifold N = {l_j = 0} with l_j(x) = a_j . x + c_j"""
    chart: Chart
    constraints: Tuple[Tuple[Vector, Fraction], ...] = ()

    def __post_init__(self):
        for gradient, _ in self.constraints:
            if len(gradient) != self.chart.dim:
                raise InvalidProblem("Constraint gradient length does not match chart dimension")
        if rank(self.gradients, self.chart.dim) != len(self.constraints):
            logger.error(f"Dependent or empty constraints on {self.chart.label()}")
            raise InvalidProblem("Constraint gradients must be linearly independent (and N nonempty)")

    @classmethod
    def from_functions(cls, chart: Chart, functions: Sequence[RationalFunction]) -> 'SubmanifoldSpec':
        """Build N from affine functions that vanish on it"""
        return cls(chart, tuple(affine_coefficients(f, chart) for f in functions))

    @property
    def gradients(self) -> List[Vector]:
        return [gradient for gradient, _ in self.constraints]

    @property
    def codim(self) -> int:
        return len(self.constraints)

    @cached_property
    def tangent_basis(self) -> List[Vector]:
        if not self.constraints:
            return [unit_vector(self.chart.dim, i) for i in range(self.chart.dim)]
        return nullspace(self.gradients, self.chart.dim)

    @cached_property
    def _solution(self) -> Dict[int, RationalFunction]:
        if not self.constraints:
            return {}
        m = self.chart.dim
        augmented = sympy.Matrix([[sympy.Rational(v.numerator, v.denominator) for v in gradient]
                                  + [sympy.Rational(c.numerator, c.denominator)]
                                  for gradient, c in self.constraints])
        reduced, pivots = augmented.rref()
        solution = {}
        for row, pivot in enumerate(pivots):
            value = -self.chart.constant(Fraction(int(reduced[row, m].p), int(reduced[row, m].q)))
            for j in range(m):
                if j != pivot and reduced[row, j] != 0:
                    coefficient = sympy.Rational(reduced[row, j])
                    value -= self.chart.coordinate(j) * self.chart.constant(Fraction(int(coefficient.p),
                                                                                     int(coefficient.q)))
            solution[pivot] = value
        return solution

    def restrict(self, f: RationalFunction) -> RationalFunction:
        """Substitute the constraints into f, eliminating pivot coordinates"""
        return substitute(f, self._solution)

    def restrict_object(self, obj: Alternating) -> Alternating:
        return obj.map_coefficients(self.restrict)

    def contains(self, point: Sequence[Fraction]) -> bool:
        return all(sum((a * Fraction(x) for a, x in zip(gradient, point)), Fraction(0)) + c == 0
                   for gradient, c in self.constraints)

    def render(self) -> str:
        if not self.constraints:
            return 'M'
        pieces = []
        for gradient, c in self.constraints:
            f = sum((self.chart.coordinate(i) * self.chart.constant(a) for i, a in enumerate(gradient) if a),
                    self.chart.constant(c))
            pieces.append(f"{render(f)} = 0")
        return ', '.join(pieces)


@dataclass(frozen=True)
class SubbundleSpec:
    """Constant span of vectors over the points of N"""
    base: SubmanifoldSpec
    spanning_vectors: Tuple[Multivector, ...] = ()

    def __post_init__(self):
        for v in self.spanning_vectors:
            if v.chart != self.base.chart:
                raise InvalidProblem("Spanning vector lives on another chart")
        if rank(self.rows, self.base.chart.dim) != len(self.spanning_vectors):
            raise InvalidProblem("Spanning vectors must be linearly independent")

    @classmethod
    def from_rows(cls, base: SubmanifoldSpec, rows: Sequence[Vector]) -> 'SubbundleSpec':
        return cls(base, tuple(row_vector(base.chart, row) for row in rows))

    @property
    def chart(self) -> Chart:
        return self.base.chart

    @cached_property
    def rows(self) -> List[Vector]:
        return [constant_row(v) for v in self.spanning_vectors]

    @property
    def rank(self) -> int:
        return len(self.spanning_vectors)

    @cached_property
    def annihilator(self) -> List[Vector]:
        return nullspace(self.rows, self.chart.dim)

    def render(self) -> str:
        return 'span(' + ', '.join(v.render() for v in self.spanning_vectors) + ')'


def _contains(outer: Sequence[Vector], inner: Sequence[Vector]) -> bool:
    return all(in_span(v, outer) for v in inner)


@dataclass(frozen=True)
class ReductionProblem:
    """Nambu structure Pi with submanifold N, bundle E, optional D and adapted map"""
    Pi: NambuStructure
    N: SubmanifoldSpec
    E: SubbundleSpec
    D: Optional[SubbundleSpec] = None
    adapted_map: Optional[AffineMap] = None

    def __post_init__(self):
        if self.Pi.chart != self.N.chart or self.E.chart != self.N.chart:
            raise InvalidProblem("Pi, N and E must share one chart")
        if self.D is not None:
            if self.D.chart != self.N.chart:
                raise InvalidProblem("D must share the chart of N")
            if not _contains(self.E.rows, self.D.rows):
                raise InvalidProblem(f"D = {self.D.render()} is not contained in E = {self.E.render()}")
            if not _contains(self.D.rows, self.F.rows):
                raise InvalidProblem(f"F = E ∩ TN is not contained in D = {self.D.render()}")

    @property
    def chart(self) -> Chart:
        return self.N.chart

    @property
    def order(self) -> int:
        return self.Pi.order

    @cached_property
    def F(self) -> SubbundleSpec:
        return SubbundleSpec.from_rows(self.N, intersection(self.E.rows, self.N.tangent_basis, self.chart.dim))


@dataclass(frozen=True)
class AdaptedChart:
    """Affine chart where N, E and D are coordinate subspaces, with the roles of its coordinates"""
    map: AffineMap
    constraint_coordinates: Tuple[int, ...]
    f_coordinates: Tuple[int, ...]
    quotient_coordinates: Tuple[int, ...]

    @property
    def chart(self) -> Chart:
        return self.map.target

    @cached_property
    def quotient_chart(self) -> Chart:
        if not self.quotient_coordinates:
            raise EmptyQuotient(f"N/F is a point: every coordinate of {self.chart.label()} is a constraint or F coordinate")
        names = tuple(self.chart.coordinates[i] for i in self.quotient_coordinates)
        return Chart(names, self.chart.parameters)

    def coordinate_function(self, i: int) -> RationalFunction:
        """Target coordinate i as an affine function on the source chart"""
        source = self.map.source
        row, offset = self.map.matrix[i], self.map.offset[i]
        return sum((source.coordinate(j) * source.constant(a) for j, a in enumerate(row) if a),
                   source.constant(offset))

    def quotient_function(self, k: int) -> RationalFunction:
        return self.coordinate_function(self.quotient_coordinates[k])

    def restrict(self, f: RationalFunction) -> RationalFunction:
        """Set the constraint coordinates of the adapted chart to zero"""
        return substitute(f, {c: self.chart.zero() for c in self.constraint_coordinates})


@dataclass(frozen=True)
class HypothesisReport:
    """Ordered ledger of every hypothesis check plus the route that licensed the reduction"""
    checks: Tuple[Tuple[str, CheckResult], ...]
    licensed_by: Optional[str] = None

    def result(self, name: str) -> Optional[CheckResult]:
        return dict(self.checks).get(name)

    def route_passed(self, route: str) -> bool:
        results = [result for name, result in self.checks if name.startswith(f"{route}.")]
        return bool(results) and all(result.passed for result in results)

    def render(self) -> List[str]:
        lines = [f"{name}: {'pass' if result.passed else 'fail'}"
                 + ('' if result.passed or not result.detail else f" ({result.detail})")
                 for name, result in self.checks]
        lines.append(f"licensed by: {self.licensed_by or 'none'}")
        return lines


@dataclass(frozen=True)
class ReducedStructure:
    """Quotient Nambu structure on N/F together with the chart and ledger that produced it"""
    quotient_chart: Chart
    tensor: NambuStructure
    hypothesis_report: HypothesisReport
    adapted: AdaptedChart = field(repr=False, default=None)

    def render(self) -> str:
        return f"{self.tensor.render()} on chart {self.quotient_chart.label()}"


def ann1(E: SubbundleSpec, n: int) -> List[Form]:
    """
    Basis of Ann^1 E: (n-1)-forms killed by contraction with every vector of E

    Args:
        E: Constant subbundle
        n: Nambu order

    Returns:
        Constant-coefficient basis forms
    """
    chart = E.chart
    unknowns = basis_indices(chart.dim, n - 1)
    rows = []
    for v in E.spanning_vectors:
        contractions = [interior(v, Form.basis(chart, index)) for index in unknowns]
        for target in basis_indices(chart.dim, n - 2):
            rows.append(tuple(to_rational(c.coefficient(target)) for c in contractions))
    return [_form_from_solution(chart, unknowns, solution) for solution in nullspace(rows, len(unknowns))]


def ann_top(N: SubmanifoldSpec, n: int) -> List[Form]:
    """
    Basis of Ann^{n-1} TN: (n-1)-forms killed by every (n-1)-fold wedge of tangent vectors

    Args:
        N: Affine submanifold
        n: Nambu order

    Returns:
        Constant-coefficient basis forms (empty when N is the whole chart)
    """
    chart = N.chart
    unknowns = basis_indices(chart.dim, n - 1)
    tangent = [row_vector(chart, row) for row in N.tangent_basis]
    rows = []
    for vectors in combinations(tangent, n - 1):
        blade = wedge_all(list(vectors), chart, Multivector)
        rows.append(tuple(to_rational(blade.coefficient(index)) for index in unknowns))
    return [_form_from_solution(chart, unknowns, solution) for solution in nullspace(rows, len(unknowns))]


def _form_from_solution(chart: Chart, unknowns, solution: Vector) -> Form:
    return Form.build(chart, len(unknowns[0]), {index: chart.constant(value)
                                                for index, value in zip(unknowns, solution)})


def canonical_bundle(Pi: NambuStructure, N: SubmanifoldSpec) -> SubbundleSpec:
    """
    Canonical bundle E spanned by sharp(Pi, eta)|N over the basis of Ann^{n-1} TN

    Raises:
        NonConstantRank: If the span varies along N or its rank cannot be certified constant
    """
    chart = N.chart
    images = [N.restrict_object(sharp(Pi, eta)) for eta in ann_top(N, Pi.order)]
    images = [image for image in images if image]
    if not images:
        return SubbundleSpec(N, ())

    matrix = function_matrix(chart, [[image.coefficient((j,)) for j in range(chart.dim)] for image in images])
    reduced, pivots = matrix.rref()
    rank_generic = len(pivots)
    rows = []
    for i in range(rank_generic):
        values = [entry(reduced, i, j) for j in range(chart.dim)]
        if not all(is_constant(v) for v in values):
            logger.error(f"Image of the sharp map turns along N: {[render(v) for v in values]}")
            raise NonConstantRank("Image of the sharp map is not a constant span along N")
        rows.append(tuple(to_rational(v) for v in values))

    # the image rank is constant when some maximal minor on the pivot columns is a nonzero constant
    for subset in combinations(range(len(images)), rank_generic):
        minor = matrix.extract(list(subset), list(pivots)).det()
        if is_constant(minor) and not is_zero(minor):
            logger.info(f"Canonical bundle of rank {rank_generic} on {N.render()}")
            return SubbundleSpec.from_rows(N, rows)
    logger.error("Rank of the sharp image may drop along N")
    raise NonConstantRank("Cannot certify constant rank of the sharp image along N")


def in_CE(f: RationalFunction, E: SubbundleSpec) -> bool:
    """True iff df vanishes on every spanning vector of E at the points of N"""
    return all(is_zero(E.base.restrict(directional(v, f))) for v in E.spanning_vectors)


def _target_rows(problem: ReductionProblem, target: str) -> List[Vector]:
    tangent = list(problem.N.tangent_basis)
    if target == 'TN':
        return tangent
    if target == 'TN+D':
        if problem.D is None:
            raise InvalidProblem("Target TN+D needs a distribution D")
        return tangent + problem.D.rows
    if target == 'TN+E':
        return tangent + problem.E.rows
    raise InvalidProblem(f"Unknown target space: {target}")


def check_sharp_range(problem: ReductionProblem, target: str = 'TN') -> CheckResult:
    """
    Check sharp(Pi, Ann^1 E) lies in TN, TN + D or TN + E at the points of N

    Membership in a constant span S is tested against a basis of its annihilator: every
    covector of S^0 must pair to zero with the constraint-substituted vector field.

    Args:
        problem: Reduction problem
        target: 'TN', 'TN+D' or 'TN+E'

    Returns:
        CheckResult with the first failing basis form as witness
    """
    chart = problem.chart
    annihilator = nullspace(_target_rows(problem, target), chart.dim)
    for eta in ann1(problem.E, problem.order):
        image = problem.N.restrict_object(sharp(problem.Pi, eta))
        for covector in annihilator:
            value = pair(row_form(chart, covector), image)
            if not is_zero(value):
                logger.debug(f"sharp({eta.render()}) = {image.render()} leaves {target}")
                return CheckResult(False, eta.render(), f"sharp({eta.render()}) = {image.render()} not in {target}")
    return CheckResult(True, None, f"sharp(Ann1 E) in {target}")


def _top_annihilators(problem: ReductionProblem) -> List[Form]:
    chart = problem.chart
    covectors = [row_form(chart, row) for row in problem.E.annihilator]
    return [wedge_all(list(subset), chart, Form) for subset in combinations(covectors, problem.order)]


def check_lie_criterion(problem: ReductionProblem, frame: str = 'F') -> CheckResult:
    """
    Check (L_X Pi)|N lies in E ^ (n-1)-vectors for every frame vector X

    Membership is tested by pairing with every n-fold wedge of covectors in E^0.

    Args:
        problem: Reduction problem
        frame: 'F' for a frame of E ∩ TN, 'theta_D' for the spanning vectors of D

    Returns:
        CheckResult with the failing frame vector and the restricted Lie derivative as witness
    """
    if frame == 'F':
        vectors = problem.F.spanning_vectors
    elif frame == 'theta_D':
        if problem.D is None:
            raise InvalidProblem("The theta_D frame needs a distribution D")
        vectors = problem.D.spanning_vectors
    else:
        raise InvalidProblem(f"Unknown frame: {frame}")

    tests = _top_annihilators(problem)
    for X in vectors:
        derivative = lie_derivative_mv(X, problem.Pi.tensor)
        for eta in tests:
            if not is_zero(problem.N.restrict(pair(eta, derivative))):
                restricted = problem.N.restrict_object(derivative)
                witness = (X.render(), restricted.render())
                return CheckResult(False, witness, f"L_({witness[0]}) Pi = {witness[1]} on N, not in E ^ TM")
    return CheckResult(True, None, f"Lie criterion holds on the {frame} frame")


def _monomials(chart: Chart, degree_bound: int) -> List[RationalFunction]:
    result = []
    for degree in range(1, degree_bound + 1):
        for powers in combinations_with_replacement(range(chart.dim), degree):
            monomial = chart.one()
            for i in powers:
                monomial = monomial * chart.coordinate(i)
            result.append(monomial)
    return result


def falsify_canonicity(Pi: NambuStructure, E: SubbundleSpec, degree_bound: int = 1) -> CheckResult:
    """
    Search monomial tuples in C(M)_E whose bracket leaves C(M)_E

    A pass means no counterexample up to the bound, which is not a proof of canonicity.

    Args:
        Pi: Nambu structure
        E: Subbundle over N
        degree_bound: Largest monomial degree searched (>= 1)

    Returns:
        CheckResult, passed when canonical up to the bound, else the counterexample tuple
    """
    if degree_bound < 1:
        raise InvalidProblem("Degree bound must be at least 1")
    candidates = [f for f in _monomials(Pi.chart, degree_bound) if in_CE(f, E)]
    for functions in combinations(candidates, Pi.order):
        value = bracket(Pi, functions)
        if not in_CE(value, E):
            witness = tuple(render(f) for f in functions)
            logger.info(f"Canonicity counterexample {witness} with bracket {render(value)}")
            return CheckResult(False, witness, f"{{{', '.join(witness)}}} = {render(value)} is not E-flat")
    return CheckResult(True, None, f"no counterexample up to degree {degree_bound}")


def check_canonical_tangency(problem: ReductionProblem, degree_bound: int = 2) -> CheckResult:
    """
    Test the implication: E nonzero and canonical up to the bound => sharp(Ann^1 E) in TN

    A violation is logged as a suspect bound choice rather than raised.
    """
    if not problem.E.rows:
        return CheckResult(True, None, "E = 0, implication is vacuous")
    canonical = falsify_canonicity(problem.Pi, problem.E, degree_bound)
    if not canonical.passed:
        return CheckResult(True, None, "E is not canonical, implication is vacuous")
    tangent = check_sharp_range(problem, 'TN')
    if not tangent.passed:
        logger.warning(f"No canonicity counterexample up to degree {degree_bound} but {tangent.detail}")
    return tangent


def _fresh_name(used: set) -> str:
    for name in _FRESH_NAMES:
        if name not in used:
            return name
    k = 1
    while f"u{k}" in used:
        k += 1
    return f"u{k}"


def _constraint_function(N: SubmanifoldSpec, row: Vector) -> Tuple[Vector, Fraction]:
    weights = combination(row, N.gradients)
    return row, sum((w * c for w, (_, c) in zip(weights, N.constraints)), Fraction(0))


def _build_adapted_map(N: SubmanifoldSpec, E: SubbundleSpec, D: Optional[SubbundleSpec]) -> AffineMap:
    chart = N.chart
    m = chart.dim
    units = [unit_vector(m, i) for i in range(m)]
    conormal = N.gradients
    e_annihilator = E.annihilator if E.rows else units
    d_annihilator = (D.annihilator if D.rows else units) if D is not None else e_annihilator

    layer_e = intersection(conormal, e_annihilator, m) if conormal else []
    layer_d = extend_basis(layer_e, intersection(conormal, d_annihilator, m) if conormal else [], m)
    layer_rest = extend_basis(layer_e + layer_d, conormal, m)
    constraint_rows = layer_e + layer_d + layer_rest

    quotient_candidates = [u for u in units if in_span(u, e_annihilator)] + list(e_annihilator)
    quotient_rows = extend_basis(layer_e, quotient_candidates, m)
    f_rows = extend_basis(quotient_rows + constraint_rows, units, m)

    used = set(chart.names)
    taken: set = set()
    names, matrix, offset = [], [], []

    def name_for(row: Vector, constant: Fraction) -> str:
        if constant == 0 and row in units and chart.coordinates[units.index(row)] not in taken:
            return chart.coordinates[units.index(row)]
        fresh = _fresh_name(used | taken)
        return fresh

    for row in quotient_rows + f_rows:
        name = name_for(row, Fraction(0))
        taken.add(name)
        names.append(name)
        matrix.append(row)
        offset.append(Fraction(0))
    for row in constraint_rows:
        row, constant = _constraint_function(N, row)
        name = name_for(row, constant)
        taken.add(name)
        names.append(name)
        matrix.append(row)
        offset.append(constant)

    target = Chart(tuple(names), chart.parameters)
    logger.info(f"Built adapted chart {target.label()} for N: {N.render()}")
    return AffineMap(chart, target, tuple(matrix), tuple(offset))


def _coordinate_set(rows: Sequence[Vector], what: str) -> Tuple[int, ...]:
    coordinates = []
    for row in row_basis(rows, len(rows[0])) if rows else []:
        nonzero = [i for i, v in enumerate(row) if v != 0]
        if len(nonzero) != 1:
            logger.error(f"{what} is not a coordinate span in the adapted chart")
            raise NotAdapted(f"{what} is not a coordinate span in the adapted chart")
        coordinates.append(nonzero[0])
    return tuple(sorted(coordinates))


def adapt(N: SubmanifoldSpec, E: SubbundleSpec, D: Optional[SubbundleSpec] = None,
          adapted_map: Optional[AffineMap] = None) -> AdaptedChart:
    """
    Bring N, E and D to coordinate normal form

    Args:
        N: Affine submanifold
        E: Constant bundle over N
        D: Optional constant bundle with F ⊆ D ⊆ E
        adapted_map: Map to validate; built automatically when absent

    Returns:
        AdaptedChart with constraint, F and quotient coordinates

    Raises:
        NotAdapted: If the map does not give the normal form
    """
    T = adapted_map if adapted_map is not None else _build_adapted_map(N, E, D)
    if T.source != N.chart:
        raise NotAdapted(f"Adapted map starts at {T.source.label()}, expected {N.chart.label()}")
    inverse = T.inverse()
    m = N.chart.dim

    # constraints pulled to the target chart: a . (A^-1 y + b') + c
    moved = []
    for gradient, c in N.constraints:
        row = tuple(sum((gradient[i] * inverse.matrix[i][j] for i in range(m)), Fraction(0)) for j in range(m))
        moved.append((row, c + sum((g * b for g, b in zip(gradient, inverse.offset)), Fraction(0))))
    constraint_coordinates = _coordinate_set([row for row, _ in moved], 'N')
    if any(not is_zero(value) for value in SubmanifoldSpec(T.target, tuple(moved))._solution.values()):
        raise NotAdapted("N is not a coordinate subspace through the origin of the adapted chart")

    def push(rows: Sequence[Vector]) -> List[Vector]:
        return [tuple(sum((T.matrix[j][i] * row[i] for i in range(m)), Fraction(0)) for j in range(m))
                for row in rows]

    e_coordinates = _coordinate_set(push(E.rows), 'E')
    if D is not None:
        _coordinate_set(push(D.rows), 'D')
    f_coordinates = tuple(i for i in e_coordinates if i not in constraint_coordinates)
    quotient = tuple(i for i in range(m) if i not in constraint_coordinates and i not in e_coordinates)
    return AdaptedChart(T, constraint_coordinates, f_coordinates, quotient)


def _quotient_tensor(problem: ReductionProblem, adapted: AdaptedChart) -> Tuple[Optional[Multivector], CheckResult]:
    n = problem.order
    moved = change_coordinates(adapted.map, problem.Pi.tensor)
    position = {i: k for k, i in enumerate(adapted.quotient_coordinates)}
    quotient_chart = adapted.quotient_chart
    terms = {}
    for subset in combinations(adapted.quotient_coordinates, n):
        value = adapted.restrict(moved.coefficient(subset))
        for f in adapted.f_coordinates:
            if not is_zero(partial(value, f)):
                name = adapted.chart.coordinates[f]
                detail = f"quotient bracket {render(value)} depends on the F coordinate {name}"
                return None, CheckResult(False, name, detail)
        terms[tuple(position[i] for i in subset)] = transfer(value, quotient_chart)
    return Multivector.build(quotient_chart, n, terms), CheckResult(True, None, "quotient bracket is F-basic")


def reduce(problem: ReductionProblem, jobs: int = 1) -> ReducedStructure:
    """
    Reduce a Nambu structure to N/F, recording which route licensed the reduction

    Routes are tried in order: 'tangent' (sharp range in TN plus the Lie criterion on an
    F-frame), 'distribution' (sharp range in TN + D plus the Lie criterion on the D
    frame), and 'definition' (sharp range in TN + E, an F-basic quotient bracket and the
    fundamental identity on the quotient).

    Args:
        problem: Reduction problem
        jobs: Parallel shards for the quotient FI check

    Returns:
        ReducedStructure with a verified quotient tensor

    Raises:
        HypothesesFailed: If no route is licensed
        NotAdapted: If a supplied adapted map does not give the normal form
        FIRefutedOnQuotient: If a sufficient-condition route passed but the quotient fails FI
    """
    checks = [
        (f"{TANGENT}.sharp_range(TN)", check_sharp_range(problem, 'TN')),
        (f"{TANGENT}.lie_criterion(F)", check_lie_criterion(problem, 'F')),
    ]
    if problem.D is not None:
        checks += [
            (f"{DISTRIBUTION}.sharp_range(TN+D)", check_sharp_range(problem, 'TN+D')),
            (f"{DISTRIBUTION}.lie_criterion(theta_D)", check_lie_criterion(problem, 'theta_D')),
        ]
    checks.append((f"{DEFINITION}.sharp_range(TN+E)", check_sharp_range(problem, 'TN+E')))

    adapted = adapt(problem.N, problem.E, problem.D, problem.adapted_map)
    tensor, basic = _quotient_tensor(problem, adapted)
    checks.append((f"{DEFINITION}.F_basic", basic))
    structure = None
    if tensor is not None:
        structure = NambuStructure(problem.order, tensor)
        checks.append((f"{DEFINITION}.fi_on_quotient", check_fi(structure, jobs)))

    report = HypothesisReport(tuple(checks))
    licensed = next((route for route in ROUTES if report.route_passed(route)), None)
    report = HypothesisReport(tuple(checks), licensed)

    if licensed is None:
        logger.error(f"No reduction route licensed for N: {problem.N.render()}")
        raise HypothesesFailed("No reduction route passed: " + '; '.join(report.render()), report)
    if structure is None or not check_fi(structure).passed:
        logger.error(f"Quotient fails the fundamental identity although the {licensed} route passed")
        raise FIRefutedOnQuotient(f"Quotient fails FI although the {licensed} route passed")

    reduced = ReducedStructure(adapted.quotient_chart, structure, report, adapted)
    logger.info(f"Reduced structure {reduced.render()} licensed by {licensed} route")
    return reduced


def project_to_quotient(reduced: ReducedStructure, X: Multivector) -> Multivector:
    """Push a vector field along N into the quotient chart, dropping constraint and F components"""
    adapted = reduced.adapted
    moved = change_coordinates(adapted.map, X)
    return Multivector.build(reduced.quotient_chart, 1, {
        (k,): transfer(adapted.restrict(moved.coefficient((i,))), reduced.quotient_chart)
        for k, i in enumerate(adapted.quotient_coordinates)
    })


def subordinate(Pi: NambuStructure, functions: Sequence[RationalFunction], jobs: int = 1) -> NambuStructure:
    """
    Subordinate structure obtained by freezing the first k slots at F1..Fk

    Args:
        Pi: Nambu structure of order n
        functions: k <= n - 2 functions

    Returns:
        Structure of order n - k with {f..}_F = {F1, .., Fk, f..}

    Raises:
        OrderTooSmall: If k > n - 2
    """
    k = len(functions)
    if k > Pi.order - 2:
        logger.error(f"Cannot freeze {k} slots of an order-{Pi.order} structure")
        raise OrderTooSmall(f"Cannot freeze {k} slots of an order-{Pi.order} structure (at most {Pi.order - 2})")
    chart = Pi.chart
    frozen = wedge_all([differential(chart.lift(f), chart) for f in functions], chart, Form)
    result = NambuStructure(Pi.order - k, interior_form(frozen, Pi.tensor))
    check_fi(result, jobs)
    return result


def check_compatible(theta_D: SubbundleSpec, E: SubbundleSpec, N: SubmanifoldSpec,
                     degree_bound: int = 2) -> CheckResult:
    """
    Certify, in the adapted chart, that quotient monomials admit extensions in both function classes

    Args:
        theta_D: Constant global distribution
        E: Constant bundle over N
        N: Affine submanifold
        degree_bound: Largest monomial degree

    Returns:
        CheckResult; a failed precondition F ⊆ theta_D ⊆ E is reported as a failure
    """
    m = N.chart.dim
    f_rows = intersection(E.rows, N.tangent_basis, m)
    if not _contains(theta_D.rows, f_rows):
        return CheckResult(False, 'F', "precondition violated: F is not contained in theta_D")
    if not _contains(E.rows, theta_D.rows):
        return CheckResult(False, 'E', "precondition violated: theta_D is not contained in E")

    adapted = adapt(N, E, theta_D)
    quotient_chart = adapted.quotient_chart
    f_vectors = [row_vector(N.chart, row) for row in f_rows]
    count = 0
    for degree in range(1, degree_bound + 1):
        for powers in combinations_with_replacement(range(quotient_chart.dim), degree):
            extension = N.chart.one()
            for k in powers:
                extension = extension * adapted.quotient_function(k)
            flat_on_e = in_CE(extension, E)
            flat_on_theta = all(is_zero(directional(v, extension)) for v in theta_D.spanning_vectors)
            basic = all(is_zero(N.restrict(directional(v, extension))) for v in f_vectors)
            if not (flat_on_e and flat_on_theta and basic):
                witness = render(extension)
                return CheckResult(False, witness, f"extension {witness} of a quotient monomial is not admissible")
            count += 1
    return CheckResult(True, None, f"{count} quotient monomials extend into both function classes")
