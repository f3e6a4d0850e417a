import pytest
from nambukit.dsl import ChartError, DegreeError, DSLSyntaxError, UnknownName, parse
from nambukit.exterior import Form, Multivector

HEADER = "chart x y z w params c;\n"

SESSION = HEADER + """
fn f = x*y;
form B = c*dx^dy^dz;
nambu W order 3 = w*Dx^Dy^Dz;
submanifold N : w = x;
bundle E = span(Dw) on N;
map T : u = w - x;
reduce W on N by E using T;
gauge W by B;
"""


def test_parse_declarations():
    """Test declarations evaluate on the session chart"""
    session = parse(SESSION)
    chart = session.chart
    assert chart.coordinates == ('x', 'y', 'z', 'w')
    assert chart.parameters == ('c',)
    assert session.functions['f'] == chart.coordinate('x') * chart.coordinate('y')
    assert session.forms['B'] == Form.basis(chart, (0, 1, 2)) * chart.parameter('c')
    assert session.structures['W'].tensor == Multivector.basis(chart, (0, 1, 2)) * chart.coordinate('w')
    assert session.submanifolds['N'].constraints == (((-1, 0, 0, 1), 0),)
    assert session.maps['T'].target.coordinates == ('x', 'y', 'z', 'u')


def test_parse_commands():
    """Test commands keep their order, kinds and resolved arguments"""
    session = parse(SESSION)
    reduce_command, gauge_command = session.commands
    assert reduce_command.kind == 'reduce'
    assert reduce_command.params['P'] == 'W'
    assert reduce_command.params['E'] is session.bundles['E']
    assert reduce_command.params['map'] is session.maps['T']
    assert reduce_command.echo == 'reduce W on N by E using T'
    assert reduce_command.line == 9
    assert gauge_command.params['B'] is session.forms['B']


def test_named_chart_map():
    """Test `chart map NAME : ...` declares the same map as `map NAME : ...`"""
    session = parse(SESSION.replace("map T :", "chart map T :"))
    assert session.maps == parse(SESSION).maps
    assert session.chart_map is None


def test_unnamed_chart_map():
    """Test an unnamed chart map is used by reduce and commute without `using`"""
    source = SESSION.replace("map T : u = w - x;", "chart map u = w - x;").replace(" using T", "")
    session = parse(source.replace("chart map u", "map S : v = w - x;\nchart map u") +
                    "commute W by B on N via E;\nreduce W on N by E using S;\n")
    reduce_command, _, commute_command, explicit = session.commands
    assert session.chart_map.target.coordinates == ('x', 'y', 'z', 'u')
    assert reduce_command.params['map'] is session.chart_map
    assert commute_command.params['map'] is session.chart_map
    assert explicit.params['map'] is session.maps['S']
    assert parse(session.render()) == session
    with pytest.raises(ChartError):
        parse(source + "chart map v = w - x;")


def test_render_roundtrip():
    """Test the canonical text parses back to an equal session"""
    session = parse(SESSION)
    assert parse(session.render()) == session


def test_echo_normalizes_whitespace():
    """Test echoed commands collapse whitespace"""
    session = parse(HEADER + "nambu P order 3 = Dx^Dy^Dz;\ncheck-fi\n    P ;")
    assert session.commands[0].echo == 'check-fi P'


def test_powers_and_wedges():
    """Test caret means power on scalars and wedge on fields"""
    session = parse(HEADER + "fn g = x^2 - 1/2;\nform a = dx^dy;\nnambu P order 3 = Dx^Dy^(Dz + x*Dw);")
    chart = session.chart
    x = chart.coordinate('x')
    assert session.functions['g'] == x * x - chart.constant(1) / chart.constant(2)
    assert session.forms['a'] == Form.basis(chart, (0, 1))
    expected = Multivector.basis(chart, (0, 1, 2)) + Multivector.basis(chart, (0, 1, 3)) * x
    assert session.structures['P'].tensor == expected


def test_comments_ignored():
    """Test hash comments are skipped"""
    session = parse("# header\nchart x y; # inline\nnambu P order 2 = Dx^Dy;\n")
    assert 'P' in session.structures


def test_syntax_error():
    """Test text outside the grammar reports its line"""
    with pytest.raises(DSLSyntaxError) as exc_info:
        parse(HEADER + "nambu P order = Dx^Dy;")
    assert exc_info.value.line == 2


def test_unknown_name():
    """Test undeclared names are reported with their position"""
    with pytest.raises(UnknownName) as exc_info:
        parse(HEADER + "nambu P order 2 = q*Dx^Dy;")
    assert exc_info.value.line == 2
    assert "'q'" in str(exc_info.value)


def test_unknown_structure():
    """Test commands must reference declared structures"""
    with pytest.raises(UnknownName):
        parse(HEADER + "check-fi P;")


def test_degree_error():
    """Test a structure whose tensor has the wrong degree"""
    with pytest.raises(DegreeError) as exc_info:
        parse(HEADER + "nambu P order 3 = Dx^Dy;")
    assert exc_info.value.line == 2


def test_mixed_kinds():
    """Test adding a form to a multivector"""
    with pytest.raises(DegreeError):
        parse(HEADER + "fn f = Dx + dx;")


def test_order_too_small():
    """Test structures of order below two"""
    with pytest.raises(DegreeError):
        parse(HEADER + "nambu P order 1 = Dx;")


def test_zero_structure_accepted():
    """Test a zero tensor is accepted"""
    session = parse(HEADER + "nambu P order 2 = 0;")
    assert not session.structures['P'].tensor


def test_duplicate_name():
    """Test names cannot be declared twice or shadow coordinates"""
    with pytest.raises(ChartError):
        parse(HEADER + "fn f = x;\nfn f = y;")
    with pytest.raises(ChartError):
        parse(HEADER + "fn x = y;")


def test_expression_before_chart():
    """Test expressions need a chart"""
    with pytest.raises(ChartError):
        parse("fn f = 1;")


def test_nonaffine_submanifold():
    """Test submanifolds must be affine"""
    with pytest.raises(ChartError) as exc_info:
        parse(HEADER + "submanifold N : x*y = 0;")
    assert exc_info.value.line == 2


def test_bundle_on_whole_chart():
    """Test the base M is available without a declaration"""
    session = parse(HEADER + "bundle E = span(Dx) on M;")
    assert session.bundles['E'].base.codim == 0


def test_distribution_label():
    """Test the distribution option must be named D"""
    source = HEADER + "nambu P order 3 = Dx^Dy^Dz;\nsubmanifold Z : z = 0;\nbundle E = span(Dz) on Z;\n"
    assert parse(source + "reduce P on Z by E with D = E;").commands[0].params['D'] is not None
    with pytest.raises(DSLSyntaxError):
        parse(source + "reduce P on Z by E with X = E;")


def test_frame_name():
    """Test lie-criterion frames are F or theta_D"""
    source = HEADER + "nambu P order 3 = Dx^Dy^Dz;\nsubmanifold Z : z = 0;\nbundle E = span(Dz) on Z;\n"
    assert parse(source + "lie-criterion P on Z by E frame F;").commands[0].params['frame'] == 'F'
    with pytest.raises(DSLSyntaxError):
        parse(source + "lie-criterion P on Z by E frame G;")


def test_alias_reserves_name():
    """Test results bound with `as` can be used by later commands"""
    source = SESSION + "reduce W on N by E as Q;\ncheck-fi Q;\n"
    session = parse(source)
    assert session.commands[-1].params['P'] == 'Q'
    assert 'Q' in session.pending
    with pytest.raises(ChartError):
        parse(source + "fn Q = x;")


def test_oracle_and_target_commands():
    """Test oracle point counts and sharp-range targets"""
    session = parse(SESSION + "oracle fi W points 7;\nsharp-range W on N by E target TN+E;\noracle adjunction points 3;")
    oracle, target, adjunction = session.commands[-3:]
    assert oracle.params['points'] == 7
    assert target.params['target'] == 'TN+E'
    assert adjunction.kind == 'oracle_adjunction'


def test_oracle_reduction_commands():
    """Test oracle reduce and commute resolve like reduce and commute, with points optional"""
    session = parse(SESSION + "oracle reduce W on N by E using T;\noracle commute W by B on N via E points 4;\n"
                    "oracle bracket W;")
    reduce_oracle, commute_oracle, bracket_oracle = session.commands[-3:]
    assert reduce_oracle.params['map'] is session.maps['T']
    assert reduce_oracle.params['N'] is session.submanifolds['N']
    assert commute_oracle.params['B'] is session.forms['B']
    assert commute_oracle.params['points'] == 4
    assert 'points' not in bracket_oracle.params
    assert bracket_oracle.params['P'] == 'W'
