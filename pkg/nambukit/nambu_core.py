import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, List, Optional, Sequence, Tuple

from nambukit.calculus import differential, exterior_d, lie_bracket, lie_derivative_form, lie_derivative_mv
from nambukit.coeffs import Chart, RationalFunction, is_zero, render
from nambukit.exterior import (
    DegreeMismatch,
    Form,
    Multivector,
    basis_indices,
    interior,
    interior_form,
    merge_sign,
    pair,
    wedge_all,
)
from utils.concurrency import run_sharded, run_sharded_async

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

UNVERIFIED = 'unverified'
VERIFIED = 'verified'
REFUTED = 'refuted'


class NambuException(Exception):
    """Custom exception for Nambu structure errors"""
    pass


class OrderError(NambuException):
    """Exception for orders outside an operation's range"""
    pass


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a decision procedure: verdict, first witness on failure, detail text"""
    passed: bool
    witness: Any = None
    detail: str = ''

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class NambuStructure:
    """Order-n multivector Pi with a cached fundamental identity verdict"""
    order: int
    tensor: Multivector
    _fi: List[CheckResult] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        if self.order < 2:
            raise OrderError(f"Nambu order must be at least 2, got {self.order}")
        if not isinstance(self.tensor, Multivector) or self.tensor.degree != self.order:
            raise DegreeMismatch(f"Tensor of an order-{self.order} structure must be a {self.order}-vector")

    @property
    def chart(self) -> Chart:
        return self.tensor.chart

    @property
    def fi_status(self) -> str:
        if not self._fi:
            return UNVERIFIED
        return VERIFIED if self._fi[0].passed else REFUTED

    def render(self) -> str:
        return self.tensor.render()


@dataclass(frozen=True)
class DorfmanPair:
    """Section (X, alpha) of TM + (n-1)-forms"""
    vec: Multivector
    form: Form

    def __post_init__(self):
        if self.vec.chart != self.form.chart:
            raise NambuException("Dorfman pair components live on different charts")


def _differentials(chart: Chart, functions: Sequence[RationalFunction]) -> Form:
    return wedge_all([differential(chart.lift(f), chart) for f in functions], chart, Form)


def bracket(Pi: NambuStructure, functions: Sequence[RationalFunction]) -> RationalFunction:
    """
    Nambu bracket {f1, ..., fn} = Pi(df1, ..., dfn)

    Args:
        Pi: Nambu structure of order n
        functions: n rational functions

    Returns:
        The bracket value
    """
    if len(functions) != Pi.order:
        raise OrderError(f"Bracket of order {Pi.order} takes {Pi.order} functions, got {len(functions)}")
    return pair(_differentials(Pi.chart, functions), Pi.tensor)


def sharp(Pi: NambuStructure, eta: Form) -> Multivector:
    """Sharp map: contraction of an (n-1)-form into the first slots of Pi"""
    if eta.degree != Pi.order - 1:
        raise DegreeMismatch(f"Sharp of an order-{Pi.order} structure needs a {Pi.order - 1}-form")
    return interior_form(eta, Pi.tensor)


def hamiltonian(Pi: NambuStructure, functions: Sequence[RationalFunction]) -> Multivector:
    """Hamiltonian vector field X_{f1...f(n-1)} = sharp(df1 ^ ... ^ df(n-1))"""
    if len(functions) != Pi.order - 1:
        raise OrderError(f"Hamiltonian of order {Pi.order} takes {Pi.order - 1} functions")
    return sharp(Pi, _differentials(Pi.chart, functions))


def fi_sides(Pi: NambuStructure, gs: Sequence[RationalFunction],
             fs: Sequence[RationalFunction]) -> Tuple[RationalFunction, RationalFunction]:
    """Both sides of the fundamental identity for functions g1..g(n-1) and f1..fn"""
    lhs = bracket(Pi, list(gs) + [bracket(Pi, fs)])
    rhs = Pi.chart.zero()
    for k in range(len(fs)):
        inner = bracket(Pi, list(gs) + [fs[k]])
        rhs += bracket(Pi, list(fs[:k]) + [inner] + list(fs[k + 1:]))
    return lhs, rhs


def _test_monomials(chart: Chart) -> List[RationalFunction]:
    linear = [chart.coordinate(a) for a in range(chart.dim)]
    quadratic = [linear[a] * linear[b] for a in range(chart.dim) for b in range(a, chart.dim)]
    return linear + quadratic


def _fi_shard(Pi: NambuStructure):
    chart = Pi.chart

    def check(g_tuples: List[Tuple[RationalFunction, ...]]) -> Optional[dict]:
        for gs in g_tuples:
            residual = lie_derivative_mv(hamiltonian(Pi, gs), Pi.tensor)
            if residual:
                index, value = residual.terms[0]
                logger.debug(f"FI residual {render(value)} for g = {[render(g) for g in gs]}")
                return {
                    'g': [render(g) for g in gs],
                    'f': [chart.coordinates[i] for i in index],
                    'residual': render(value),
                }
        return None

    return check


def _fi_result(Pi: NambuStructure, witnesses: List[Optional[dict]], count: int) -> CheckResult:
    witness = next((w for w in witnesses if w is not None), None)
    if witness is None:
        result = CheckResult(True, None, f"{count} residual checks vanish")
        logger.info(f"FI verified for order-{Pi.order} tensor after {count} checks")
    else:
        result = CheckResult(False, witness, f"FI residual {witness['residual']} for g = {witness['g']}, "
                                             f"f = {witness['f']}")
        logger.info(f"FI refuted: {result.detail}")
    Pi._fi[:] = [result]
    return result


def _fi_workload(Pi: NambuStructure) -> List[Tuple[RationalFunction, ...]]:
    if not Pi.tensor:
        return []
    return list(combinations(_test_monomials(Pi.chart), Pi.order - 1))


def check_fi(Pi: NambuStructure, jobs: int = 1) -> CheckResult:
    """
    Complete decision of the fundamental identity

    The FI residual for (g; f) equals (L_{X_g} Pi)(df1, ..., dfn), which is tensorial in
    the f's and depends on the g's through their 2-jets, so the g-tuples range over
    antisymmetrized combinations of the monomials x_a and x_a x_b.

    Args:
        Pi: Nambu structure candidate
        jobs: Number of parallel shards

    Returns:
        CheckResult; on failure the witness holds the g tuple, the coordinate f tuple
        and the residual value
    """
    if Pi._fi:
        return Pi._fi[0]
    workload = _fi_workload(Pi)
    witnesses = run_sharded(_fi_shard(Pi), workload, jobs)
    return _fi_result(Pi, witnesses, len(workload))


async def check_fi_async(Pi: NambuStructure, jobs: int = 2) -> CheckResult:
    """Awaitable variant of check_fi for callers already inside an event loop"""
    if Pi._fi:
        return Pi._fi[0]
    workload = _fi_workload(Pi)
    if not workload:
        return _fi_result(Pi, [], 0)
    witnesses = await run_sharded_async(_fi_shard(Pi), workload, jobs)
    return _fi_result(Pi, witnesses, len(workload))


def check_decomposable(Pi: NambuStructure) -> CheckResult:
    """
    Pointwise decomposability through the Plucker relations on the coefficients

    Args:
        Pi: Nambu structure of order n >= 3

    Returns:
        CheckResult with the first failing relation (I, J, value) as witness

    Raises:
        OrderError: If n < 3
    """
    n = Pi.order
    if n < 3:
        logger.error(f"Decomposability check needs order >= 3, got {n}")
        raise OrderError(f"Decomposability check needs order >= 3, got {n}")
    chart = Pi.chart
    for I in combinations(range(chart.dim), n - 1):
        for J in combinations(range(chart.dim), n + 1):
            total = chart.zero()
            for l, j in enumerate(J):
                if j in I:
                    continue
                head = I + (j,)
                sign = merge_sign(I, (j,))
                left = Pi.tensor.coefficient(tuple(sorted(head)))
                right = Pi.tensor.coefficient(J[:l] + J[l + 1:])
                term = left * right
                total += term if (sign * (-1) ** l) > 0 else -term
            if not is_zero(total):
                witness = ([chart.coordinates[i] for i in I], [chart.coordinates[j] for j in J], render(total))
                return CheckResult(False, witness, f"Plucker relation {witness[0]} | {witness[1]} = {witness[2]}")
    return CheckResult(True, None, "all Plucker relations vanish")


def dorfman(a: DorfmanPair, b: DorfmanPair) -> DorfmanPair:
    """Higher order Dorfman bracket ([X, Y], L_X beta - i_Y d alpha)"""
    vec = lie_bracket(a.vec, b.vec)
    form = lie_derivative_form(a.vec, b.form) - interior(b.vec, exterior_d(a.form))
    return DorfmanPair(vec, form)


def leibniz_bracket(Pi: NambuStructure, alpha: Form, beta: Form) -> Form:
    """{alpha, beta}_Pi = L_{sharp alpha} beta - i_{sharp beta} d alpha"""
    if alpha.degree != Pi.order - 1 or beta.degree != Pi.order - 1:
        raise DegreeMismatch(f"Leibniz bracket of order {Pi.order} acts on {Pi.order - 1}-forms")
    return lie_derivative_form(sharp(Pi, alpha), beta) - interior(sharp(Pi, beta), exterior_d(alpha))


def graph_closed(Pi: NambuStructure) -> CheckResult:
    """
    Closure of the graph of the sharp map under the Dorfman bracket

    The defect is tensorial in the second section and first order in the first, so the
    sections built from dx^I and x_a dx^I decide closure for all sections.

    Returns:
        CheckResult with the first pair of generating forms whose bracket leaves the graph
    """
    chart = Pi.chart
    forms = [Form.basis(chart, index) for index in basis_indices(chart.dim, Pi.order - 1)]
    multipliers = [chart.one()] + [chart.coordinate(a) for a in range(chart.dim)]
    for alpha in forms:
        for weight in multipliers:
            weighted = alpha * weight
            first = DorfmanPair(sharp(Pi, weighted), weighted)
            for beta in forms:
                result = dorfman(first, DorfmanPair(sharp(Pi, beta), beta))
                defect = result.vec - sharp(Pi, result.form)
                if defect:
                    witness = (weighted.render(), beta.render(), defect.render())
                    return CheckResult(False, witness, f"bracket of {witness[0]} and {witness[1]} leaves the graph "
                                                       f"by {witness[2]}")
    return CheckResult(True, None, "graph closed")
