import pytest
from nambukit.exterior import DegreeMismatch, Form
from nambukit.gauge import (
    HypothesesFailed,
    NotClosed,
    SingularEverywhere,
    apply_gauge_matrix,
    check_characteristic_match,
    check_leibniz_iso,
    gauge,
    gauge_matrix,
    gauge_reduce_commute,
    gauge_transform,
    vanishing_locus,
)
from nambukit.nambu_core import VERIFIED, NambuStructure, sharp
from nambukit.reduction import ReductionProblem


@pytest.fixture
def volume3(r3, blade):
    """Dx^Dy^Dz on R^3"""
    return NambuStructure(3, blade(r3, 'x', 'y', 'z'))


def test_gauge_determinant(volume3, r3, blade):
    """Test det(Id + B~ o sharp) = (1 + c)^3 for B = c dx^dy^dz"""
    c = r3.parameter('c')
    data = gauge_matrix(volume3, blade(r3, 'x', 'y', 'z', kind=Form) * c)
    assert data.det == (r3.one() + c) ** 3
    assert data.vanishing_locus == ['c = -1']


def test_gauge_transform_constant(volume3, r3, blade):
    """Test T_B(Pi) = Pi / (1 + c)"""
    c = r3.parameter('c')
    transformed = gauge_transform(volume3, blade(r3, 'x', 'y', 'z', kind=Form) * c)
    assert transformed.tensor == volume3.tensor * (r3.one() / (r3.one() + c))
    assert transformed.fi_status == VERIFIED


def test_gauge_transform_varying(volume3, r3, blade):
    """Test B = x dx^dy^dz gives Pi / (1 + x) with locus x = -1"""
    x = r3.coordinate('x')
    data = gauge(volume3, blade(r3, 'x', 'y', 'z', kind=Form) * x)
    assert data.transported.tensor == volume3.tensor * (r3.one() / (r3.one() + x))
    assert data.vanishing_locus == ['x = -1']


def test_vanishing_locus_constant(r3):
    """Test a constant determinant vanishes nowhere"""
    assert vanishing_locus(r3.constant(5)) == []


def test_not_closed(volume, r4, blade):
    """Test a gauge form with nonzero exterior derivative"""
    B = blade(r4, 'y', 'z', 'w', kind=Form) * r4.coordinate('x')
    with pytest.raises(NotClosed):
        gauge_matrix(volume, B)


def test_wrong_degree(volume, r4, blade):
    """Test the gauge form must have the structure's order"""
    with pytest.raises(DegreeMismatch):
        gauge_matrix(volume, blade(r4, 'x', 'y', kind=Form))


def test_singular_everywhere(volume3, r3, blade):
    """Test B = -dx^dy^dz makes the gauge matrix singular"""
    with pytest.raises(SingularEverywhere):
        gauge_matrix(volume3, -blade(r3, 'x', 'y', 'z', kind=Form))


def test_zero_structure(r3, blade):
    """Test the zero structure is fixed by every gauge form"""
    Pi = NambuStructure(3, blade(r3, 'x', 'y', 'z') * 0)
    assert not gauge_transform(Pi, blade(r3, 'x', 'y', 'z', kind=Form)).tensor


def test_anchor_intertwines(volume, gauge_form, r4, blade):
    """Test sharp_Pi = sharp_T o (Id + B~ o sharp_Pi) on a basis form"""
    data = gauge(volume, gauge_form)
    alpha = blade(r4, 'x', 'y', kind=Form)
    assert sharp(volume, alpha) == sharp(data.transported, apply_gauge_matrix(data, alpha))


def test_leibniz_iso(volume, gauge_form):
    """Test the gauge matrix is a Leibniz algebroid isomorphism"""
    result = check_leibniz_iso(volume, gauge_form)
    assert result.passed
    assert '36 basis pairs' in result.detail


def test_leibniz_iso_varying(volume3, r3, blade):
    """Test the isomorphism for a non-constant gauge form"""
    B = blade(r3, 'x', 'y', 'z', kind=Form) * r3.coordinate('x')
    assert check_leibniz_iso(volume3, B, jobs=2).passed


def test_characteristic_match(volume, gauge_form):
    """Test Pi and T_B(Pi) share characteristic spans"""
    assert check_characteristic_match(volume, gauge_transform(volume, gauge_form), 10).passed


def test_characteristic_mismatch(volume, r4, blade):
    """Test structures with different spans are told apart"""
    other = NambuStructure(3, blade(r4, 'x', 'y', 'w'))
    result = check_characteristic_match(volume, other, 5)
    assert not result.passed


def test_commute_diagonal(diagonal_problem, gauge_form):
    """Test both paths give x / (1 + c x) on {w = x}"""
    result = gauge_reduce_commute(diagonal_problem, gauge_form)
    assert result.agree
    quotient = result.gauge_then_reduce.quotient_chart
    x, c = quotient.coordinate('x'), quotient.parameter('c')
    assert result.reduce_then_gauge.tensor.coefficient((0, 1, 2)) == x / (quotient.one() + c * x)
    assert result.licensed_by == 'definition'
    assert [name for name, _ in result.hypotheses] == ['a', 'b']


def test_commute_zero_quotient(volume, plane, plane_bundle, r4, blade):
    """Test a gauge form with dw gives zero on both paths over {z = 0}"""
    B = blade(r4, 'x', 'y', 'w', kind=Form) * r4.parameter('c')
    problem = ReductionProblem(volume, plane, plane_bundle, plane_bundle)
    result = gauge_reduce_commute(problem, B)
    assert result.agree
    assert not result.gauge_then_reduce.tensor.tensor


def test_commute_tangent_route_required(diagonal_problem, gauge_form):
    """Test demanding the tangent route when only the definition route applies"""
    with pytest.raises(HypothesesFailed) as exc_info:
        gauge_reduce_commute(diagonal_problem, gauge_form, require_tangent_route=True)
    assert exc_info.value.hypothesis == 'reducibility'


def test_commute_hypothesis_a(volume, plane, plane_bundle, gauge_form):
    """Test B~(TN) must annihilate E"""
    problem = ReductionProblem(volume, plane, plane_bundle, plane_bundle)
    with pytest.raises(HypothesesFailed) as exc_info:
        gauge_reduce_commute(problem, gauge_form)
    assert exc_info.value.hypothesis == 'a'


def test_gauge_composition(volume3, r3, blade):
    """Test gauging by B then B' equals gauging by B + B'"""
    c = r3.parameter('c')
    B = blade(r3, 'x', 'y', 'z', kind=Form) * c
    B_prime = blade(r3, 'x', 'y', 'z', kind=Form) * r3.coordinate('y')
    twice = gauge_transform(gauge_transform(volume3, B), B_prime)
    assert twice.tensor == gauge_transform(volume3, B + B_prime).tensor
