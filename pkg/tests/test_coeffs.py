import random
from fractions import Fraction

import pytest
from nambukit.coeffs import (
    Chart,
    CoeffsException,
    DivisionByZero,
    NotAffine,
    PoleAtPoint,
    affine_coefficients,
    arith,
    evaluate,
    is_constant,
    is_zero,
    partial,
    random_point,
    render,
    substitute,
    to_rational,
    transfer,
)


def test_duplicate_names():
    """Test chart rejects a parameter that repeats a coordinate"""
    with pytest.raises(CoeffsException):
        Chart(('x', 'y'), ('x',))


def test_unknown_coordinate(r3):
    """Test lookup of a missing coordinate"""
    with pytest.raises(CoeffsException) as exc_info:
        r3.index('w')
    assert "'w' is not a coordinate" in str(exc_info.value)


def test_canonical_form(r3):
    """Test equal rational functions compare equal after cancellation"""
    x = r3.coordinate('x')
    one = r3.one()
    assert (x * x - one) / (x - one) == x + one
    assert is_zero(x / (x + one) - x / (x + one))


def test_division_by_zero(r3):
    """Test division by the zero function"""
    with pytest.raises(DivisionByZero):
        arith(r3.coordinate('x'), r3.zero(), '/')


def test_unknown_operator(r3):
    """Test unknown arithmetic operator"""
    with pytest.raises(CoeffsException):
        arith(r3.one(), r3.one(), '%')


def test_partial(r3):
    """Test exact partial derivatives of a rational function"""
    x, y = r3.coordinate('x'), r3.coordinate('y')
    f = x * x * y
    assert partial(f, 0) == r3.constant(2) * x * y
    assert partial(f, 2) == r3.zero()
    assert partial(r3.one() / x, 0) == -r3.one() / (x * x)


def test_parameters_are_constants_for_derivatives(r3):
    """Test the gauge parameter has no coordinate derivative"""
    c = r3.parameter('c')
    for i in range(r3.dim):
        assert is_zero(partial(c * c, i))
    assert not is_constant(c)


def test_to_rational(r3):
    """Test conversion of constants and rejection of functions"""
    assert to_rational(r3.constant(Fraction(3, 4))) == Fraction(3, 4)
    assert to_rational(r3.zero()) == 0
    with pytest.raises(CoeffsException):
        to_rational(r3.coordinate('z'))


def test_evaluate(r3):
    """Test exact evaluation including the parameter slot"""
    x, c = r3.coordinate('x'), r3.parameter('c')
    f = x / (r3.one() + c)
    assert evaluate(f, [Fraction(1, 2), 0, 0, 3]) == Fraction(1, 8)


def test_evaluate_pole(r3):
    """Test evaluation at a zero of the denominator"""
    f = r3.one() / (r3.one() + r3.parameter('c'))
    with pytest.raises(PoleAtPoint):
        evaluate(f, [0, 0, 0, -1])


def test_evaluate_wrong_length(r3):
    """Test evaluation with a point of the wrong size"""
    with pytest.raises(CoeffsException):
        evaluate(r3.one(), [1, 2])


def test_substitute(r4):
    """Test simultaneous substitution of polynomials"""
    x, w = r4.coordinate('x'), r4.coordinate('w')
    assert substitute(w * w + x, {3: x}) == x * x + x


def test_substitute_pole(r4):
    """Test substitution that kills the denominator"""
    x, w = r4.coordinate('x'), r4.coordinate('w')
    with pytest.raises(PoleAtPoint):
        substitute(r4.one() / (w - x), {3: x})


def test_transfer(r3, r4):
    """Test moving functions between charts by symbol name"""
    f = r3.coordinate('x') * r3.parameter('c')
    assert transfer(f, r4) == r4.coordinate('x') * r4.parameter('c')
    with pytest.raises(CoeffsException):
        transfer(r4.coordinate('w'), r3)


def test_affine_coefficients(r4):
    """Test splitting an affine function into gradient and constant"""
    x, w = r4.coordinate('x'), r4.coordinate('w')
    row, constant = affine_coefficients(r4.constant(2) * x - w + r4.constant(3), r4)
    assert row == (2, 0, 0, -1)
    assert constant == 3


def test_not_affine(r4):
    """Test rejection of nonlinear and parametric expressions"""
    x, y = r4.coordinate('x'), r4.coordinate('y')
    with pytest.raises(NotAffine):
        affine_coefficients(x * y, r4)
    with pytest.raises(NotAffine):
        affine_coefficients(r4.one() / x, r4)
    with pytest.raises(NotAffine):
        affine_coefficients(r4.parameter('c') + x, r4)


def test_render_uses_caret(r3):
    """Test rendered powers parse back in the session language"""
    x = r3.coordinate('x')
    assert render(x * x) == 'x^2'
    assert render(r3.constant(Fraction(-1, 2))) == '-1/2'


def test_random_point_height(r4):
    """Test random points cover every name and respect the height"""
    rng = random.Random(7)
    for _ in range(20):
        point = random_point(rng, r4, 5)
        assert len(point) == len(r4.names)
        assert all(abs(v.numerator) <= 5 and 0 < v.denominator <= 5 for v in point)
