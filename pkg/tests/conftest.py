import pytest
import sys
from pathlib import Path

# Add parent directory to path to import modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from nambukit.coeffs import Chart
from nambukit.exterior import Form, Multivector
from nambukit.nambu_core import NambuStructure
from nambukit.reduction import ReductionProblem, SubbundleSpec, SubmanifoldSpec


def make_blade(chart, *names, kind=Multivector):
    """Coordinate blade D<a>^D<b>^... (or d<a>^d<b>^... for forms)"""
    return kind.basis(chart, [chart.index(name) for name in names])


@pytest.fixture
def r3():
    """R^3 with a gauge parameter c"""
    return Chart(('x', 'y', 'z'), ('c',))


@pytest.fixture
def r4():
    """R^4 with a gauge parameter c"""
    return Chart(('x', 'y', 'z', 'w'), ('c',))


@pytest.fixture
def r6():
    """R^6 without parameters"""
    return Chart(('x1', 'x2', 'x3', 'x4', 'x5', 'x6'))


@pytest.fixture
def blade():
    """Factory for coordinate blades"""
    return make_blade


@pytest.fixture
def volume(r4):
    """Constant structure Dx^Dy^Dz on R^4"""
    return NambuStructure(3, make_blade(r4, 'x', 'y', 'z'))


@pytest.fixture
def weighted(r4):
    """Structure w*Dx^Dy^Dz on R^4"""
    return NambuStructure(3, make_blade(r4, 'x', 'y', 'z') * r4.coordinate('w'))


@pytest.fixture
def diagonal(r4):
    """Submanifold {w = x}"""
    return SubmanifoldSpec.from_functions(r4, [r4.coordinate('w') - r4.coordinate('x')])


@pytest.fixture
def diagonal_problem(weighted, diagonal, r4):
    """w*Dx^Dy^Dz on {w = x} with E spanned by Dw"""
    return ReductionProblem(weighted, diagonal, SubbundleSpec(diagonal, (make_blade(r4, 'w'),)))


@pytest.fixture
def plane(r4):
    """Submanifold {z = 0}"""
    return SubmanifoldSpec.from_functions(r4, [r4.coordinate('z')])


@pytest.fixture
def plane_bundle(plane, r4):
    """E spanned by Dz over {z = 0}"""
    return SubbundleSpec(plane, (make_blade(r4, 'z'),))


@pytest.fixture
def gauge_form(r4):
    """Closed 3-form c*dx^dy^dz on R^4"""
    return make_blade(r4, 'x', 'y', 'z', kind=Form) * r4.parameter('c')
