import pytest
from nambukit.calculus import differential, directional
from nambukit.coeffs import Chart
from nambukit.exterior import DegreeMismatch, Form, Multivector, wedge
from nambukit.nambu_core import (
    REFUTED,
    UNVERIFIED,
    VERIFIED,
    NambuStructure,
    OrderError,
    bracket,
    check_decomposable,
    check_fi,
    check_fi_async,
    fi_sides,
    graph_closed,
    hamiltonian,
    leibniz_bracket,
    sharp,
)

R2 = Chart(('x', 'y'))
R3 = Chart(('x', 'y', 'z'))
R4 = Chart(('x', 'y', 'z', 'w'))
R6 = Chart(('x1', 'x2', 'x3', 'x4', 'x5', 'x6'))


def D(chart, names):
    return Multivector.basis(chart, [chart.index(name) for name in names.split()])


def v(chart, name):
    return chart.coordinate(name)


def _non_poisson():
    return D(R3, 'x y') - D(R3, 'y z') * v(R3, 'y') - D(R3, 'x z') * v(R3, 'x')


def _twist():
    return D(R4, 'x y z') + D(R4, 'x y w') * v(R4, 'x')


def _split_volume():
    return D(R6, 'x1 x2 x3') + D(R6, 'x4 x5 x6')


BATTERY = [
    # order 3 and 4
    ('constant volume on R3', 3, lambda: D(R3, 'x y z'), True),
    ('weighted volume on R4', 3, lambda: D(R4, 'x y z') * v(R4, 'w'), True),
    ('polynomial weight', 3, lambda: D(R4, 'x y z') * (v(R4, 'x') * v(R4, 'x') + v(R4, 'w')), True),
    ('rational weight', 3, lambda: D(R4, 'x y z') * (R4.one() / (R4.one() + v(R4, 'w') * v(R4, 'w'))), True),
    ('integrable sheared blade', 3,
     lambda: D(R4, 'x y z') + D(R4, 'x y w') * v(R4, 'z') * v(R4, 'w'), True),
    ('constant blade with w', 3, lambda: D(R4, 'x y w'), True),
    ('top degree on R4', 4, lambda: D(R4, 'x y z w') * v(R4, 'x') * v(R4, 'y') * v(R4, 'z') * v(R4, 'w'), True),
    ('constant top degree', 4, lambda: D(R4, 'x y z w'), True),
    ('twisted blade', 3, _twist, False),
    ('blade with y twist', 3, lambda: D(R4, 'x y z') * v(R4, 'y') + D(R4, 'x y w'), False),
    ('split volume on R6', 3, _split_volume, False),
    # order 2
    ('symplectic R4', 2, lambda: D(R4, 'x y') + D(R4, 'z w'), True),
    ('so(3)', 2, lambda: D(R3, 'y z') * v(R3, 'x') - D(R3, 'x z') * v(R3, 'y') + D(R3, 'x y') * v(R3, 'z'), True),
    ('affine algebra', 2, lambda: D(R3, 'x y') * v(R3, 'x'), True),
    ('heisenberg', 2, lambda: D(R3, 'x y') * v(R3, 'z'), True),
    ('radial weight', 2, lambda: D(R4, 'x y') * (v(R4, 'x') * v(R4, 'x') + v(R4, 'y') * v(R4, 'y')), True),
    ('cubic weight', 2, lambda: D(R3, 'x y') * v(R3, 'x') * v(R3, 'y') * v(R3, 'z'), True),
    ('plane', 2, lambda: D(R2, 'x y'), True),
    ('zero bivector', 2, lambda: Multivector.zero(R3, 2), True),
    ('non-poisson linear', 2, _non_poisson, False),
    ('coupled symplectic', 2, lambda: D(R4, 'x y') + D(R4, 'z w') * v(R4, 'x'), False),
    ('non-closed linear', 2, lambda: D(R3, 'x y') * v(R3, 'x') + D(R3, 'x z') * v(R3, 'y'), False),
]


@pytest.mark.parametrize('name,order,build,expected', BATTERY, ids=[entry[0] for entry in BATTERY])
def test_fundamental_identity_battery(name, order, build, expected):
    """Test the FI decision against tensors with known answers"""
    Pi = NambuStructure(order, build())
    result = check_fi(Pi)
    assert result.passed is expected
    assert Pi.fi_status == (VERIFIED if expected else REFUTED)
    if not expected:
        assert set(result.witness) == {'g', 'f', 'residual'}


def test_order_too_small(r3):
    """Test order 1 is rejected"""
    with pytest.raises(OrderError):
        NambuStructure(1, Multivector.basis(r3, (0,)))


def test_tensor_degree_mismatch(r3, blade):
    """Test the tensor degree must equal the order"""
    with pytest.raises(DegreeMismatch):
        NambuStructure(3, blade(r3, 'x', 'y'))


def test_bracket(weighted, r4):
    """Test {x, y, z} = w for w*Dx^Dy^Dz"""
    x, y, z = r4.coordinate('x'), r4.coordinate('y'), r4.coordinate('z')
    assert bracket(weighted, [x, y, z]) == r4.coordinate('w')
    assert bracket(weighted, [y, x, z]) == -r4.coordinate('w')
    assert bracket(weighted, [x, x, z]) == r4.zero()


def test_bracket_wrong_arity(weighted, r4):
    """Test bracket needs exactly n functions"""
    with pytest.raises(OrderError):
        bracket(weighted, [r4.coordinate('x')])


def test_sharp(weighted, r4, blade):
    """Test sharp contracts into the first slots"""
    w = r4.coordinate('w')
    assert sharp(weighted, blade(r4, 'y', 'z', kind=Form)) == blade(r4, 'x') * w
    assert sharp(weighted, blade(r4, 'x', 'z', kind=Form)) == -(blade(r4, 'y') * w)


def test_sharp_degree(weighted, r4, blade):
    """Test sharp rejects forms of the wrong degree"""
    with pytest.raises(DegreeMismatch):
        sharp(weighted, blade(r4, 'x', kind=Form))


def test_hamiltonian(volume, r4, blade):
    """Test X_{x, y} = Dz and its action matches the bracket"""
    x, y, z = r4.coordinate('x'), r4.coordinate('y'), r4.coordinate('z')
    assert hamiltonian(volume, [x, y]) == blade(r4, 'z')
    assert bracket(volume, [x, y, z * z]) == r4.constant(2) * z


def test_fi_sides_agree(weighted, r4):
    """Test both FI sides agree for a Nambu structure"""
    x, y, z, w = (r4.coordinate(name) for name in ('x', 'y', 'z', 'w'))
    lhs, rhs = fi_sides(weighted, [x * y, w], [z, x * x, y + w])
    assert lhs == rhs


def test_fi_sides_disagree(r4):
    """Test the sides differ for the twisted blade on coordinate functions"""
    Pi = NambuStructure(3, _twist())
    x, y, z, w = (R4.coordinate(name) for name in ('x', 'y', 'z', 'w'))
    checks = [fi_sides(Pi, gs, fs) for gs in ([x, y], [y, z], [x, z]) for fs in ([x, y, z], [x, y, w], [y, z, w])]
    assert any(lhs != rhs for lhs, rhs in checks)


def test_check_fi_count(volume):
    """Test R4 with order 3 runs the antisymmetrized 2-jet workload"""
    result = check_fi(volume)
    assert result.passed
    assert result.detail == '91 residual checks vanish'


def test_check_fi_cached(weighted):
    """Test the verdict is cached on the structure"""
    assert weighted.fi_status == UNVERIFIED
    first = check_fi(weighted)
    assert weighted.fi_status == VERIFIED
    assert check_fi(weighted) is first


def test_check_fi_parallel_matches_serial():
    """Test sharded FI checks reach the serial verdict"""
    serial = check_fi(NambuStructure(3, _twist()), jobs=1)
    parallel = check_fi(NambuStructure(3, _twist()), jobs=3)
    assert serial.passed is parallel.passed is False


@pytest.mark.asyncio
async def test_check_fi_async(volume):
    """Test the awaitable FI check"""
    result = await check_fi_async(volume, jobs=2)
    assert result.passed


def test_decomposable(volume, weighted):
    """Test single blades satisfy the Plucker relations"""
    assert check_decomposable(volume).passed
    assert check_decomposable(weighted).passed
    assert check_decomposable(NambuStructure(3, _twist())).passed


def test_not_decomposable():
    """Test a sum of complementary blades fails the Plucker relations"""
    result = check_decomposable(NambuStructure(3, _split_volume()))
    assert not result.passed
    assert len(result.witness) == 3


def test_decomposable_needs_order_three():
    """Test decomposability is only decided for n >= 3"""
    with pytest.raises(OrderError):
        check_decomposable(NambuStructure(2, _non_poisson()))


def test_leibniz_bracket_of_hamiltonian_forms(volume, r4, blade):
    """Test {dx^dy, dy^dz} for the constant volume vanishes"""
    result = leibniz_bracket(volume, blade(r4, 'x', 'y', kind=Form), blade(r4, 'y', 'z', kind=Form))
    assert not result


def test_leibniz_bracket_exact_generators(weighted, r4):
    """Test {df1^df2, dg1^dg2} expands through the Nambu bracket"""
    x, y, z, w = (r4.coordinate(name) for name in ('x', 'y', 'z', 'w'))
    f = [x, z * w]
    g = [y * w, x + y]
    alpha = wedge(differential(f[0], r4), differential(f[1], r4))
    beta = wedge(differential(g[0], r4), differential(g[1], r4))
    expected = (wedge(differential(bracket(weighted, f + [g[0]]), r4), differential(g[1], r4))
                + wedge(differential(g[0], r4), differential(bracket(weighted, f + [g[1]]), r4)))
    assert leibniz_bracket(weighted, alpha, beta) == expected


def test_graph_closed(volume):
    """Test the graph of a constant volume is Dorfman closed"""
    assert graph_closed(volume).passed


def test_graph_not_closed():
    """Test the graph of a non-Poisson bivector is not closed"""
    result = graph_closed(NambuStructure(2, _non_poisson()))
    assert not result.passed
    assert 'leaves the graph' in result.detail


@pytest.mark.parametrize('name,order,build,expected', BATTERY, ids=[entry[0] for entry in BATTERY])
def test_graph_closed_agrees_with_fi(name, order, build, expected):
    """Test Dorfman closure of the graph decides the FI on the whole battery"""
    Pi = NambuStructure(order, build())
    assert graph_closed(Pi).passed is check_fi(Pi).passed is expected


CONSTANT = [
    ('volume on R3', 3, lambda: D(R3, 'x y z'), True),
    ('blade with w', 3, lambda: D(R4, 'x y w'), True),
    ('any 3-vector on R4', 3, lambda: D(R4, 'x y z') + D(R4, 'x z w') * R4.constant(2) - D(R4, 'y z w'), True),
    ('top degree on R4', 4, lambda: D(R4, 'x y z w') * R4.constant(-3), True),
    ('shared pair', 3, lambda: D(R6, 'x1 x2 x3') + D(R6, 'x1 x2 x4'), True),
    ('shared line', 3, lambda: D(R6, 'x1 x2 x3') + D(R6, 'x1 x4 x5'), False),
    ('split volume on R6', 3, _split_volume, False),
]


@pytest.mark.parametrize('name,order,build,expected', CONSTANT, ids=[entry[0] for entry in CONSTANT])
def test_constant_fi_is_decomposability(name, order, build, expected):
    """Test a constant-coefficient tensor of order >= 3 satisfies the FI exactly when decomposable"""
    Pi = NambuStructure(order, build())
    assert check_fi(Pi).passed is check_decomposable(Pi).passed is expected


def test_hamiltonian_bracket_identity(weighted, r4):
    """Test X_{f1 f2}(g) = {f1, f2, g}"""
    x, y, z, w = (r4.coordinate(name) for name in ('x', 'y', 'z', 'w'))
    fs = [x * y + w, z * z - x]
    X = hamiltonian(weighted, fs)
    for g in (x, y * w, x * z + y, w * w):
        assert directional(X, g) == bracket(weighted, fs + [g])
