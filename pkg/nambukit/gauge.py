import logging
import random
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Tuple

import sympy
from sympy.polys.matrices import DomainMatrix

from nambukit.calculus import change_coordinates, exterior_d
from nambukit.coeffs import PoleAtPoint, RationalFunction, evaluate, is_constant, is_zero, partial, random_point, \
    render, transfer
from nambukit.exterior import DegreeMismatch, Form, MultiIndex, Multivector, basis_indices, interior, pair
from nambukit.linalg import entries, function_matrix, identity_matrix, rank
from nambukit.nambu_core import CheckResult, NambuStructure, check_fi, leibniz_bracket, sharp
from nambukit.reduction import HypothesesFailed as ReductionHypothesesFailed
from nambukit.reduction import ReducedStructure, ReductionProblem, TANGENT, adapt, reduce, row_vector
from utils.concurrency import retry, run_sharded

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class GaugeException(Exception):
    """Custom exception for gauge transformation errors"""
    pass


class NotClosed(GaugeException):
    """Exception for gauge forms with nonzero exterior derivative"""
    pass


class SingularEverywhere(GaugeException):
    """Exception for a gauge matrix whose determinant is identically zero"""
    pass


class SkewSymmetryViolated(GaugeException):
    """Exception for a transported sharp map that is not induced by an n-vector"""
    pass


class HypothesesFailed(GaugeException):
    """Exception for a failed hypothesis of the gauge and reduction commutation check"""

    def __init__(self, hypothesis: str, message: str):
        super().__init__(f"Hypothesis ({hypothesis}) failed: {message}")
        self.hypothesis = hypothesis


@dataclass(frozen=True)
class GaugeData:
    """
    Bundle map Id + btilde o sharp on (n-1)-forms, expanded in the basis dx^I

    Column I of the matrix holds the image of dx^I. The inverse and the transported
    structure are filled once the determinant is known to be a nonzero rational function.
    """
    Pi: NambuStructure
    B: Form
    indices: Tuple[MultiIndex, ...]
    matrix: DomainMatrix
    det: RationalFunction
    inverse: Optional[DomainMatrix] = None
    transported: Optional[NambuStructure] = None

    @property
    def vanishing_locus(self) -> List[str]:
        return vanishing_locus(self.det)


@dataclass(frozen=True)
class CommuteResult:
    """Both quotient tensors of the commutation square with the hypothesis ledger"""
    agree: bool
    gauge_then_reduce: ReducedStructure
    reduce_then_gauge: NambuStructure
    projected_form: Form
    hypotheses: Tuple[Tuple[str, CheckResult], ...]
    licensed_by: str


def vanishing_locus(det: RationalFunction) -> List[str]:
    """Irreducible factors of the numerator of det, solved when linear in one symbol"""
    if is_constant(det):
        return []
    _, factors = sympy.factor_list(det.numer.as_expr())
    locus = []
    for factor, _ in factors:
        symbols = sorted(factor.free_symbols, key=str)
        polynomial = sympy.Poly(factor, *symbols)
        if len(symbols) == 1 and polynomial.total_degree() == 1:
            value = -polynomial.coeff_monomial(1) / polynomial.coeff_monomial(symbols[0])
            locus.append(f"{symbols[0]} = {value}")
        else:
            locus.append(f"{sympy.sstr(factor).replace('**', '^')} = 0")
    return locus


def btilde(B: Form, X: Multivector) -> Form:
    """B~(X) = i_X B"""
    return interior(X, B)


def gauge_matrix(Pi: NambuStructure, B: Form) -> GaugeData:
    """
    Expand Id + btilde(B, sharp(Pi, .)) over the basis (n-1)-forms

    Args:
        Pi: Nambu structure of order n
        B: Closed n-form on the same chart

    Returns:
        GaugeData with matrix, determinant and inverse

    Raises:
        NotClosed: If dB != 0
        SingularEverywhere: If the determinant is identically zero
    """
    n = Pi.order
    chart = Pi.chart
    if not isinstance(B, Form) or B.degree != n:
        raise DegreeMismatch(f"Gauge form must be an {n}-form")
    if B.chart != chart:
        raise GaugeException(f"Gauge form lives on {B.chart.label()}, structure on {chart.label()}")
    closure = exterior_d(B)
    if closure:
        logger.error(f"Gauge form is not closed: d B = {closure.render()}")
        raise NotClosed(f"d B = {closure.render()} is not zero")

    indices = tuple(basis_indices(chart.dim, n - 1))
    if not Pi.tensor:
        identity = identity_matrix(chart, len(indices))
        return GaugeData(Pi, B, indices, identity, chart.one(), identity)

    columns = []
    for index in indices:
        basis = Form.basis(chart, index)
        columns.append(basis + btilde(B, sharp(Pi, basis)))
    matrix = function_matrix(chart, [[column.coefficient(row) for column in columns] for row in indices])
    det = matrix.det()
    if is_zero(det):
        logger.error(f"Gauge matrix of {B.render()} is singular everywhere")
        raise SingularEverywhere(f"det(Id + B~ o sharp) vanishes identically for B = {B.render()}")
    logger.debug(f"Gauge determinant {render(det)}")
    return GaugeData(Pi, B, indices, matrix, det, matrix.inv())


def apply_gauge_matrix(data: GaugeData, eta: Form) -> Form:
    """(Id + B~ o sharp)(eta) for an arbitrary (n-1)-form"""
    return eta + btilde(data.B, sharp(data.Pi, eta))


def gauge(Pi: NambuStructure, B: Form, jobs: int = 1) -> GaugeData:
    """Gauge data with the transported structure T_B(Pi) filled in"""
    data = gauge_matrix(Pi, B)
    if data.transported is not None:
        return data
    chart = Pi.chart
    n = Pi.order
    inverse = entries(data.inverse)
    images = [sharp(Pi, Form.basis(chart, index)) for index in data.indices]

    transported_sharp = {}
    for i, index in enumerate(data.indices):
        image = Multivector.zero(chart, 1)
        for j, source in enumerate(images):
            if not is_zero(inverse[j][i]):
                image = image + source * inverse[j][i]
        transported_sharp[index] = image

    terms = {}
    for index in basis_indices(chart.dim, n):
        head, last = index[:-1], index[-1]
        terms[index] = pair(Form.basis(chart, (last,)), transported_sharp[head])
    tensor = Multivector.build(chart, n, terms)

    # the reconstructed n-vector must reproduce the transported map on every basis form
    for index, image in transported_sharp.items():
        if sharp(NambuStructure(n, tensor), Form.basis(chart, index)) != image:
            logger.error(f"Transported sharp map is not skew at {index}")
            raise SkewSymmetryViolated(f"Transported sharp map is not induced by an {n}-vector at index {index}")

    transported = NambuStructure(n, tensor)
    check_fi(transported, jobs)
    logger.info(f"Gauge transform by {B.render()}: {transported.render()}")
    return GaugeData(Pi, B, data.indices, data.matrix, data.det, data.inverse, transported)


def gauge_transform(Pi: NambuStructure, B: Form, jobs: int = 1) -> NambuStructure:
    """
    Gauge transform T_B(Pi) with sharp map Pi# o (Id + B~ o Pi#)^-1

    Raises:
        NotClosed: If dB != 0
        SingularEverywhere: If the gauge matrix is singular everywhere
        SkewSymmetryViolated: If the transported map is not skew
    """
    return gauge(Pi, B, jobs).transported


def _sharp_values(Pi: NambuStructure, point) -> List[List]:
    chart = Pi.chart
    rows = []
    for index in basis_indices(chart.dim, Pi.order - 1):
        image = sharp(Pi, Form.basis(chart, index))
        rows.append([evaluate(image.coefficient((k,)), point) for k in range(chart.dim)])
    return rows


def check_characteristic_match(Pi: NambuStructure, other: NambuStructure, sample_count: int = 50,
                               seed: int = 0) -> CheckResult:
    """
    Compare the characteristic distributions of two structures at random rational points

    Args:
        Pi: First structure
        other: Second structure on the same chart and of the same order
        sample_count: Number of points
        seed: Seed for the point sampler

    Returns:
        CheckResult with the first point where the spans of the sharp images differ
    """
    if Pi.chart != other.chart or Pi.order != other.order:
        raise GaugeException("Characteristic match needs structures of one order on one chart")
    chart = Pi.chart
    rng = random.Random(seed)

    @retry(max_retries=100, exceptions=(PoleAtPoint,))
    def sample():
        point = random_point(rng, chart)
        return point, _sharp_values(Pi, point), _sharp_values(other, point)

    checked = 0
    for _ in range(sample_count):
        try:
            point, first, second = sample()
        except PoleAtPoint:
            logger.warning("Skipped a sample point after 100 pole resamples")
            continue
        first_rank, second_rank = rank(first, chart.dim), rank(second, chart.dim)
        if not first_rank == second_rank == rank(first + second, chart.dim):
            witness = tuple(str(v) for v in point)
            return CheckResult(False, witness, f"characteristic spans differ at {witness}: "
                                               f"ranks {first_rank} and {second_rank}")
        checked += 1
    return CheckResult(True, None, f"characteristic spans agree at {checked} points")


def check_leibniz_iso(Pi: NambuStructure, B: Form, jobs: int = 1) -> CheckResult:
    """
    Check that Id + B~ o sharp intertwines anchors and Leibniz brackets of Pi and T_B(Pi)

    Args:
        Pi: Nambu structure
        B: Closed n-form
        jobs: Number of parallel shards over basis pairs

    Returns:
        CheckResult with the first failing pair of basis forms
    """
    data = gauge(Pi, B, jobs)
    transported = data.transported
    chart = Pi.chart
    forms = [Form.basis(chart, index) for index in data.indices]
    images = [apply_gauge_matrix(data, alpha) for alpha in forms]

    def check(pairs):
        for i, j in pairs:
            alpha, beta = forms[i], forms[j]
            if i == j and sharp(Pi, alpha) != sharp(transported, images[i]):
                return (alpha.render(), alpha.render(), 'anchor')
            lhs = leibniz_bracket(transported, images[i], images[j])
            rhs = apply_gauge_matrix(data, leibniz_bracket(Pi, alpha, beta))
            if lhs != rhs:
                return (alpha.render(), beta.render(), 'bracket')
        return None

    pairs = list(product(range(len(forms)), repeat=2))
    witness = next((w for w in run_sharded(check, pairs, jobs) if w is not None), None)
    if witness is not None:
        return CheckResult(False, witness, f"{witness[2]} mismatch on ({witness[0]}, {witness[1]})")
    return CheckResult(True, None, f"anchors and brackets intertwine on {len(pairs)} basis pairs")


def _tangent_frame_hypothesis(problem: ReductionProblem, B: Form) -> CheckResult:
    chart = problem.chart
    for row in problem.N.tangent_basis:
        image = btilde(B, row_vector(chart, row))
        for e in problem.E.spanning_vectors:
            contraction = problem.N.restrict_object(interior(e, image))
            if contraction:
                witness = row_vector(chart, row).render()
                return CheckResult(False, witness, f"B~({witness}) does not annihilate {e.render()} on N")
    return CheckResult(True, None, "B~(TN) lies in Ann1 E")


def gauge_reduce_commute(problem: ReductionProblem, B: Form, require_tangent_route: bool = False,
                         jobs: int = 1) -> CommuteResult:
    """
    Run both sides of the gauge and reduction square and compare the quotient tensors

    Hypothesis (a) asks B~(TN) to lie in Ann1 E. Hypothesis (b) asks the pullback of B
    to N, written in the adapted chart, to have no F differentials and coefficients free
    of the F coordinates; the surviving quotient terms form the projected form.

    Args:
        problem: Reduction problem
        B: Closed n-form
        require_tangent_route: Demand that the tangent route licenses the reduction
        jobs: Shards for the FI checks

    Returns:
        CommuteResult with both tensors and the exact equality verdict

    Raises:
        HypothesesFailed: Naming (a), (b), reducibility or invertibility
    """
    chart = problem.chart
    hypotheses = [('a', _tangent_frame_hypothesis(problem, B))]
    if not hypotheses[0][1].passed:
        raise HypothesesFailed('a', hypotheses[0][1].detail)

    adapted = adapt(problem.N, problem.E, problem.D, problem.adapted_map)
    moved = change_coordinates(adapted.map, B)
    quotient_chart = adapted.quotient_chart
    position = {i: k for k, i in enumerate(adapted.quotient_coordinates)}
    projected = {}
    for index, coefficient in moved.terms:
        if any(i in adapted.constraint_coordinates for i in index):
            continue
        value = adapted.restrict(coefficient)
        if is_zero(value):
            continue
        if any(i in adapted.f_coordinates for i in index):
            raise HypothesesFailed('b', f"pullback of B has an F differential at {index}")
        if any(not is_zero(partial(value, f)) for f in adapted.f_coordinates):
            raise HypothesesFailed('b', f"pullback coefficient {render(value)} depends on F coordinates")
        projected[tuple(position[i] for i in index)] = transfer(value, quotient_chart)
    projected_form = Form.build(quotient_chart, B.degree, projected)
    hypotheses.append(('b', CheckResult(True, None, f"B projects to {projected_form.render()}")))

    try:
        transported = gauge_transform(problem.Pi, B, jobs)
    except GaugeException as e:
        raise HypothesesFailed('invertibility', str(e))
    try:
        reduced = reduce(problem, jobs)
        first = reduce(ReductionProblem(transported, problem.N, problem.E, problem.D, adapted.map), jobs)
    except ReductionHypothesesFailed as e:
        raise HypothesesFailed('reducibility', str(e))
    licensed_by = reduced.hypothesis_report.licensed_by
    if require_tangent_route and licensed_by != TANGENT:
        raise HypothesesFailed('reducibility', f"reduction licensed by the {licensed_by} route, not {TANGENT}")

    if reduced.tensor.tensor:
        try:
            second = gauge_transform(reduced.tensor, projected_form, jobs)
        except GaugeException as e:
            raise HypothesesFailed('invertibility', str(e))
    else:
        second = reduced.tensor

    agree = first.tensor.tensor == second.tensor
    logger.info(f"Commutation on chart {quotient_chart.label()}: {first.tensor.render()} vs {second.render()}")
    return CommuteResult(agree, first, second, projected_form, tuple(hypotheses), licensed_by)
