"""
Session language: a lark LALR grammar, an expression evaluator over the coefficient
field, and a builder that turns a parse tree into a checked Session.

Expressions use `D<coord>` for coordinate vector fields, `d<coord>` for coordinate
differentials, `*` and `/` for scalar multiplication and division, and `^` for both the
wedge product and integer powers of scalars. Statements end with `;`.
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Set, Union

import lark
from lark import Lark, Token, Transformer, Tree

from nambukit.calculus import AffineMap, CalculusException
from nambukit.coeffs import (
    Chart,
    CoeffsException,
    RationalFunction,
    affine_coefficients,
    arith,
    is_constant,
    is_zero,
    render,
    to_rational,
)
from nambukit.exterior import ExteriorException, Form, Multivector, wedge
from nambukit.nambu_core import NambuStructure
from nambukit.reduction import ReductionException, SubbundleSpec, SubmanifoldSpec

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

GRAMMAR = r"""
start: (_statement ";")*

_statement: chart_decl | fn_decl | form_decl | nambu_decl | submanifold_decl | bundle_decl | map_decl | chart_map_decl
          | check_fi | bracket | sharp | hamiltonian | decomposable | ann1 | anntop | reduce
          | subordinate | canonicity | gauge | commute | oracle_fi | oracle_adjunction | oracle_anchor
          | oracle_bracket | oracle_reduce | oracle_commute
          | sharp_range | lie_criterion | compatible | charmatch | leibniz_iso | graph_closed

chart_decl: "chart" NAME+ params?
params: "params" NAME+
fn_decl: "fn" NAME "=" expr
form_decl: "form" NAME "=" expr
nambu_decl: "nambu" NAME "order" INT "=" expr
submanifold_decl: "submanifold" NAME ":" equation ("," equation)*
equation: expr "=" expr
bundle_decl: "bundle" NAME "=" "span" "(" (expr ("," expr)*)? ")" "on" NAME
map_decl: "map" NAME ":" assignment ("," assignment)*
chart_map_decl: "chart" "map" (NAME ":")? assignment ("," assignment)*
assignment: NAME "=" expr

check_fi: "check-fi" NAME
bracket: "bracket" NAME atom*
sharp: "sharp" NAME atom
hamiltonian: "hamiltonian" NAME atom*
decomposable: "decomposable" NAME
ann1: "ann1" NAME "order" INT
anntop: "anntop" NAME "order" INT
reduce: "reduce" NAME "on" NAME "by" NAME distribution? using? alias?
subordinate: "subordinate" NAME atom* alias?
canonicity: "canonicity" NAME "by" NAME bound?
gauge: "gauge" NAME "by" NAME alias?
commute: "commute" NAME "by" NAME "on" NAME "via" NAME distribution? using?
oracle_fi: "oracle" "fi" NAME points?
oracle_adjunction: "oracle" "adjunction" points?
oracle_anchor: "oracle" "anchor" NAME "by" NAME points?
oracle_bracket: "oracle" "bracket" NAME points?
oracle_reduce: "oracle" "reduce" NAME "on" NAME "by" NAME distribution? using? points?
oracle_commute: "oracle" "commute" NAME "by" NAME "on" NAME "via" NAME distribution? using? points?
sharp_range: "sharp-range" NAME "on" NAME "by" NAME distribution? "target" TARGET
lie_criterion: "lie-criterion" NAME "on" NAME "by" NAME distribution? "frame" NAME
compatible: "compatible" NAME "with" NAME bound?
charmatch: "charmatch" NAME NAME points?
leibniz_iso: "leibniz-iso" NAME "by" NAME
graph_closed: "graph-closed" NAME

distribution: "with" NAME "=" NAME
using: "using" NAME
alias: "as" NAME
bound: "bound" INT
points: "points" INT

?expr: sum
?sum: product
    | sum "+" product -> add
    | sum "-" product -> sub
?product: unary
    | product "*" unary -> mul
    | product "/" unary -> div
?unary: power
    | "-" unary -> neg
?power: atom
    | atom "^" unary -> caret
?atom: NAME -> name
    | INT -> number
    | "(" expr ")"

TARGET: "TN+D" | "TN+E" | "TN"
COMMENT: /#[^\n]*/

%import common.CNAME -> NAME
%import common.INT
%import common.WS
%ignore WS
%ignore COMMENT
"""

Value = Union[RationalFunction, Multivector, Form]

STRUCTURE_COMMANDS = {
    'check_fi', 'bracket', 'sharp', 'hamiltonian', 'decomposable', 'reduce', 'subordinate', 'canonicity',
    'gauge', 'commute', 'oracle_fi', 'oracle_anchor', 'oracle_bracket', 'oracle_reduce', 'oracle_commute',
    'sharp_range', 'lie_criterion', 'charmatch', 'leibniz_iso', 'graph_closed',
}

# commands that fall back to the unnamed chart map
REDUCTION_COMMANDS = {'reduce', 'commute', 'oracle_reduce', 'oracle_commute'}


class DSLException(Exception):
    """Custom exception for session language errors, carrying a source position"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.message, self.line, self.column = message, line, column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class DSLSyntaxError(DSLException):
    """Exception for text outside the grammar"""
    pass


class UnknownName(DSLException):
    """Exception for references to undeclared names"""
    pass


class DegreeError(DSLException):
    """Exception for ill-typed expressions or declarations"""
    pass


class ChartError(DSLException):
    """Exception for chart, submanifold, bundle or map declarations that do not fit the chart"""
    pass


@dataclass
class Command:
    """One command statement with its resolved arguments"""
    kind: str
    params: Dict[str, Any]
    echo: str
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class Session:
    """Declarations in scope plus the ordered command list"""
    chart: Optional[Chart] = None
    functions: Dict[str, RationalFunction] = field(default_factory=dict)
    forms: Dict[str, Form] = field(default_factory=dict)
    structures: Dict[str, NambuStructure] = field(default_factory=dict)
    submanifolds: Dict[str, SubmanifoldSpec] = field(default_factory=dict)
    bundles: Dict[str, SubbundleSpec] = field(default_factory=dict)
    maps: Dict[str, AffineMap] = field(default_factory=dict)
    chart_map: Optional[AffineMap] = None
    commands: List[Command] = field(default_factory=list)
    pending: Set[str] = field(default_factory=set, compare=False)

    def structure(self, name: str) -> NambuStructure:
        if name not in self.structures:
            raise UnknownName(f"Unknown Nambu structure '{name}'")
        return self.structures[name]

    def render(self) -> str:
        """Canonical session text; parsing it back yields an equal session"""
        lines = []
        if self.chart is not None:
            params = f" params {' '.join(self.chart.parameters)}" if self.chart.parameters else ''
            lines.append(f"chart {' '.join(self.chart.coordinates)}{params};")
        lines += [f"fn {name} = {render(f)};" for name, f in self.functions.items()]
        lines += [f"form {name} = {omega.render()};" for name, omega in self.forms.items()]
        lines += [f"nambu {name} order {Pi.order} = {Pi.render()};" for name, Pi in self.structures.items()]
        lines += [f"submanifold {name} : {N.render()};" for name, N in self.submanifolds.items() if N.constraints]
        for name, E in self.bundles.items():
            base = next(key for key, N in self.submanifolds.items() if N == E.base)
            spanning = ', '.join(v.render() for v in E.spanning_vectors)
            lines.append(f"bundle {name} = span({spanning}) on {base};")
        if self.chart_map is not None:
            lines.append(f"chart map {_render_map(self.chart_map)};")
        lines += [f"chart map {name} : {_render_map(T)};" for name, T in self.maps.items()]
        lines += [f"{command.echo};" for command in self.commands]
        return '\n'.join(lines) + '\n'


def _render_map(T: AffineMap) -> str:
    pieces = []
    for k, name in enumerate(T.target.coordinates):
        row, offset = T.matrix[k], T.offset[k]
        identity = name == T.source.coordinates[k] and offset == 0 and all(
            v == (1 if j == k else 0) for j, v in enumerate(row))
        if not identity:
            f = sum((T.source.coordinate(j) * T.source.constant(v) for j, v in enumerate(row) if v),
                    T.source.constant(offset))
            pieces.append(f"{name} = {render(f)}")
    if not pieces:
        name = T.target.coordinates[0]
        pieces.append(f"{name} = {name}")
    return ', '.join(pieces)


class _Evaluator(Transformer):
    """Evaluate an expression tree to a scalar, multivector or form on the session chart"""

    def __init__(self, session: Session):
        super().__init__()
        self.session = session

    @property
    def chart(self) -> Chart:
        return self.session.chart

    def name(self, children):
        token = children[0]
        text = str(token)
        chart = self.chart
        if text in chart.coordinates:
            return chart.coordinate(text)
        if text in chart.parameters:
            return chart.parameter(text)
        if text in self.session.functions:
            return self.session.functions[text]
        if text.startswith('D') and text[1:] in chart.coordinates:
            return Multivector.basis(chart, (chart.index(text[1:]),))
        if text.startswith('d') and text[1:] in chart.coordinates:
            return Form.basis(chart, (chart.index(text[1:]),))
        if text in self.session.forms:
            return self.session.forms[text]
        raise UnknownName(f"Unknown name '{text}'", token.line, token.column)

    def number(self, children):
        return self.chart.constant(int(children[0]))

    def add(self, children):
        return _combine(children[0], children[1], '+')

    def sub(self, children):
        return _combine(children[0], children[1], '-')

    def mul(self, children):
        return _combine(children[0], children[1], '*')

    def div(self, children):
        return _combine(children[0], children[1], '/')

    def neg(self, children):
        return -children[0]

    def caret(self, children):
        left, right = children
        if _is_scalar(left) and _is_scalar(right):
            if not is_constant(right) or to_rational(right).denominator != 1:
                raise DegreeError(f"Exponent must be a constant integer, got {render(right)}")
            exponent = int(to_rational(right))
            if exponent < 0 and is_zero(left):
                raise DegreeError("Negative power of zero")
            return left ** exponent
        if _is_scalar(left):
            return right * left
        if _is_scalar(right):
            return left * right
        if type(left) is not type(right):
            raise DegreeError("Cannot wedge a form with a multivector")
        return wedge(left, right)


def _is_scalar(value: Value) -> bool:
    return not isinstance(value, (Multivector, Form))


def _combine(left: Value, right: Value, op: str) -> Value:
    if _is_scalar(left) and _is_scalar(right):
        try:
            return arith(left, right, op)
        except CoeffsException as e:
            raise DegreeError(str(e))
    if op in '+-':
        if _is_scalar(left) and is_zero(left):
            return right if op == '+' else -right
        if _is_scalar(right) and is_zero(right):
            return left
        if _is_scalar(left) or _is_scalar(right) or type(left) is not type(right) or left.degree != right.degree:
            raise DegreeError(f"Cannot add terms of different kinds or degrees with '{op}'")
        return left + right if op == '+' else left - right
    if op == '*':
        if _is_scalar(left):
            return right * left
        if _is_scalar(right):
            return left * right
        raise DegreeError("Use '^' for the wedge product of two fields")
    if not _is_scalar(right):
        raise DegreeError("Only division by a scalar is allowed")
    if is_zero(right):
        raise DegreeError("Division by zero")
    return left * (left.chart.one() / right)


class _SessionBuilder:
    """Walk the statements of a parse tree in order, declaring names and recording commands"""

    def __init__(self, source: str):
        self.source = source
        self.session = Session()

    def build(self, tree: Tree) -> Session:
        for statement in tree.children:
            handler = getattr(self, f"_{statement.data}", None)
            try:
                if handler is not None:
                    handler(statement, *statement.children)
                else:
                    self._command(statement)
            except DSLException as e:
                if e.line is None:
                    raise type(e)(e.message, statement.meta.line, statement.meta.column)
                raise
            except (CoeffsException, ExteriorException, CalculusException, ReductionException) as e:
                logger.error(f"Declaration at line {statement.meta.line} failed: {str(e)}")
                raise ChartError(str(e), statement.meta.line, statement.meta.column)
        return self.session

    def _require_chart(self) -> Chart:
        if self.session.chart is None:
            raise ChartError("Declare a chart before using expressions")
        return self.session.chart

    def _evaluate(self, tree) -> Value:
        self._require_chart()
        try:
            return _Evaluator(self.session).transform(tree)
        except lark.exceptions.VisitError as e:
            if isinstance(e.orig_exc, DSLException):
                raise e.orig_exc
            raise DegreeError(str(e.orig_exc))

    def _scalar(self, tree) -> RationalFunction:
        value = self._evaluate(tree)
        if not _is_scalar(value):
            raise DegreeError("Expected a scalar function")
        return value

    def _declare(self, name: Token, kind: str):
        text = str(name)
        chart = self.session.chart
        taken = set(self.session.functions) | set(self.session.forms) | set(self.session.structures) | \
            set(self.session.submanifolds) | set(self.session.bundles) | set(self.session.maps) | self.session.pending
        if text in taken or (chart is not None and text in chart.names):
            raise ChartError(f"Name '{text}' is already declared", name.line, name.column)
        logger.debug(f"Declared {kind} {text}")
        return text

    def _chart_decl(self, statement, *children):
        if self.session.chart is not None:
            raise ChartError("Only one chart per session")
        coordinates = tuple(str(c) for c in children if isinstance(c, Token))
        params = next((c for c in children if isinstance(c, Tree)), None)
        parameters = tuple(str(p) for p in params.children) if params is not None else ()
        self.session.chart = Chart(coordinates, parameters)

    def _fn_decl(self, statement, name, expr):
        self.session.functions[self._declare(name, 'fn')] = self._scalar(expr)

    def _form_decl(self, statement, name, expr):
        value = self._evaluate(expr)
        if _is_scalar(value):
            value = Form.scalar(self.session.chart, value)
        if not isinstance(value, Form):
            raise DegreeError(f"Form '{name}' evaluates to a multivector")
        self.session.forms[self._declare(name, 'form')] = value

    def _nambu_decl(self, statement, name, order, expr):
        order = int(order)
        if order < 2:
            raise DegreeError(f"Nambu order must be at least 2, got {order}")
        value = self._evaluate(expr)
        if _is_scalar(value) and is_zero(value):
            value = Multivector.zero(self.session.chart, order)
        if not isinstance(value, Multivector) or value.degree != order:
            raise DegreeError(f"Structure '{name}' must be a {order}-vector")
        if not value:
            logger.warning(f"Structure '{name}' at line {statement.meta.line} evaluates to zero")
        self.session.structures[self._declare(name, 'nambu')] = NambuStructure(order, value)

    def _submanifold_decl(self, statement, name, *equations):
        chart = self._require_chart()
        functions = [self._scalar(eq.children[0]) - self._scalar(eq.children[1]) for eq in equations]
        self.session.submanifolds[self._declare(name, 'submanifold')] = SubmanifoldSpec.from_functions(chart,
                                                                                                      functions)

    def _submanifold(self, token: Token) -> SubmanifoldSpec:
        text = str(token)
        if text not in self.session.submanifolds:
            chart = self._require_chart()
            if text == 'M':
                return SubmanifoldSpec(chart)
            raise UnknownName(f"Unknown submanifold '{text}'", token.line, token.column)
        return self.session.submanifolds[text]

    def _bundle(self, token: Token) -> SubbundleSpec:
        if str(token) not in self.session.bundles:
            raise UnknownName(f"Unknown bundle '{token}'", token.line, token.column)
        return self.session.bundles[str(token)]

    def _bundle_decl(self, statement, name, *rest):
        *spanning, base = rest
        N = self._submanifold(base)
        if str(base) not in self.session.submanifolds:
            self.session.submanifolds[str(base)] = N
        vectors = []
        for expr in spanning:
            value = self._evaluate(expr)
            if not isinstance(value, Multivector) or value.degree != 1:
                raise DegreeError(f"Bundle '{name}' must be spanned by vector fields")
            vectors.append(value)
        self.session.bundles[self._declare(name, 'bundle')] = SubbundleSpec(N, tuple(vectors))

    def _affine_map(self, assignments) -> AffineMap:
        chart = self._require_chart()
        m = chart.dim
        names = list(chart.coordinates)
        matrix = [tuple(Fraction(int(i == j)) for j in range(m)) for i in range(m)]
        offset = [Fraction(0)] * m
        replaced: Set[int] = set()
        for assignment in assignments:
            target, expr = assignment.children
            row, constant = affine_coefficients(self._scalar(expr), chart)
            slots = [j for j, v in enumerate(row) if v != 0 and j not in replaced]
            if not slots:
                raise ChartError(f"'{target}' has no coordinate left to replace", target.line, target.column)
            slot = slots[-1]
            replaced.add(slot)
            names[slot], matrix[slot], offset[slot] = str(target), row, constant
        target_chart = Chart(tuple(names), chart.parameters)
        return AffineMap(chart, target_chart, tuple(matrix), tuple(offset))

    def _map_decl(self, statement, name, *assignments):
        self.session.maps[self._declare(name, 'map')] = self._affine_map(assignments)

    def _chart_map_decl(self, statement, *children):
        assignments = [c for c in children if isinstance(c, Tree)]
        names = [c for c in children if isinstance(c, Token)]
        if names:
            self.session.maps[self._declare(names[0], 'map')] = self._affine_map(assignments)
            return
        if self.session.chart_map is not None:
            raise ChartError("Only one unnamed chart map per session", statement.meta.line, statement.meta.column)
        self.session.chart_map = self._affine_map(assignments)

    def _options(self, children) -> Dict[str, Any]:
        options: Dict[str, Any] = {}
        for child in children:
            if not isinstance(child, Tree):
                continue
            if child.data == 'distribution':
                label, bundle = child.children
                if str(label) != 'D':
                    raise DSLSyntaxError(f"Expected 'with D = ...', got '{label}'", label.line, label.column)
                options['D'] = self._bundle(bundle)
            elif child.data == 'using':
                token = child.children[0]
                if str(token) not in self.session.maps:
                    raise UnknownName(f"Unknown map '{token}'", token.line, token.column)
                options['map'] = self.session.maps[str(token)]
            elif child.data == 'alias':
                options['alias'] = str(child.children[0])
            elif child.data in ('bound', 'points'):
                options[child.data] = int(child.children[0])
        return options

    def _structure_name(self, token: Token) -> str:
        text = str(token)
        if text not in self.session.structures and text not in self.session.pending:
            raise UnknownName(f"Unknown Nambu structure '{text}'", token.line, token.column)
        return text

    def _form(self, token: Token) -> Form:
        if str(token) not in self.session.forms:
            raise UnknownName(f"Unknown form '{token}'", token.line, token.column)
        return self.session.forms[str(token)]

    def _command(self, statement: Tree):
        kind = statement.data
        children = statement.children
        tokens = [c for c in children if isinstance(c, Token)]
        expressions = [c for c in children if isinstance(c, Tree) and c.data not in
                       ('distribution', 'using', 'alias', 'bound', 'points')]
        params = self._options(children)
        self._require_chart()

        if kind in STRUCTURE_COMMANDS and kind not in ('charmatch',):
            params['P'] = self._structure_name(tokens[0])
        if kind in ('bracket', 'hamiltonian', 'subordinate'):
            params['functions'] = [self._scalar(expr) for expr in expressions]
        elif kind == 'sharp':
            value = self._evaluate(expressions[0])
            params['eta'] = Form.scalar(self.session.chart, value) if _is_scalar(value) else value
            if not isinstance(params['eta'], Form):
                raise DegreeError("sharp takes a form")
        elif kind == 'ann1':
            params['E'] = self._bundle(tokens[0])
            params['order'] = int(tokens[1])
        elif kind == 'anntop':
            params['N'] = self._submanifold(tokens[0])
            params['order'] = int(tokens[1])
        elif kind in ('reduce', 'oracle_reduce', 'sharp_range', 'lie_criterion'):
            params['N'] = self._submanifold(tokens[1])
            params['E'] = self._bundle(tokens[2])
            if kind == 'sharp_range':
                params['target'] = str(tokens[3])
            if kind == 'lie_criterion':
                frame = str(tokens[3])
                if frame not in ('F', 'theta_D'):
                    raise DSLSyntaxError(f"Frame must be F or theta_D, got '{frame}'", tokens[3].line,
                                         tokens[3].column)
                params['frame'] = frame
        elif kind == 'canonicity':
            params['E'] = self._bundle(tokens[1])
        elif kind in ('gauge', 'oracle_anchor', 'leibniz_iso'):
            params['B'] = self._form(tokens[1])
        elif kind in ('commute', 'oracle_commute'):
            params['B'] = self._form(tokens[1])
            params['N'] = self._submanifold(tokens[2])
            params['E'] = self._bundle(tokens[3])
        elif kind == 'compatible':
            params['theta'] = self._bundle(tokens[0])
            params['E'] = self._bundle(tokens[1])
        elif kind == 'charmatch':
            params['P'] = self._structure_name(tokens[0])
            params['Q'] = self._structure_name(tokens[1])

        if kind in REDUCTION_COMMANDS and 'map' not in params and self.session.chart_map is not None:
            params['map'] = self.session.chart_map

        if 'alias' in params:
            self._declare(Token('NAME', params['alias'], line=statement.meta.line,
                                column=statement.meta.column), 'result')
            self.session.pending.add(params['alias'])

        echo = ' '.join(self.source[statement.meta.start_pos:statement.meta.end_pos].split())
        self.session.commands.append(Command(kind, params, echo, statement.meta.line, statement.meta.column))


_PARSER = Lark(GRAMMAR, parser='lalr', propagate_positions=True)


def parse(source: str) -> Session:
    """
    Parse and check a session

    Args:
        source: Session text

    Returns:
        Session with evaluated declarations and resolved commands

    Raises:
        DSLSyntaxError: If the text is outside the grammar
        UnknownName: If a name is used before it is declared
        DegreeError: If an expression or declaration is ill-typed
        ChartError: If a declaration does not fit the chart
    """
    try:
        tree = _PARSER.parse(source)
    except lark.exceptions.UnexpectedInput as e:
        logger.error(f"Syntax error at line {e.line}, column {e.column}")
        raise DSLSyntaxError(f"Unexpected input near '{_context(source, e)}'", e.line, e.column)
    session = _SessionBuilder(source).build(tree)
    logger.info(f"Parsed session with {len(session.commands)} command(s)")
    return session


def _context(source: str, error: lark.exceptions.UnexpectedInput) -> str:
    try:
        return error.get_context(source, span=12).splitlines()[0].strip()
    except Exception:
        return ''
