"""Exact calculus for Nambu-Poisson structures: brackets, reduction and gauge transformations"""

from .coeffs import Chart, evaluate, render
from .exterior import Form, Multivector, interior, interior_form, pair, wedge
from .calculus import AffineMap, change_coordinates, exterior_d, lie_derivative_form, lie_derivative_mv
from .nambu_core import (
    CheckResult,
    NambuStructure,
    bracket,
    check_decomposable,
    check_fi,
    graph_closed,
    hamiltonian,
    sharp,
)
from .reduction import (
    ReductionProblem,
    SubbundleSpec,
    SubmanifoldSpec,
    ann1,
    ann_top,
    canonical_bundle,
    falsify_canonicity,
    reduce,
    subordinate,
)
from .gauge import check_leibniz_iso, gauge_matrix, gauge_reduce_commute, gauge_transform
from .dsl import parse
from .runner import run

__all__ = [
    'Chart', 'evaluate', 'render',
    'Form', 'Multivector', 'interior', 'interior_form', 'pair', 'wedge',
    'AffineMap', 'change_coordinates', 'exterior_d', 'lie_derivative_form', 'lie_derivative_mv',
    'CheckResult', 'NambuStructure', 'bracket', 'check_decomposable', 'check_fi', 'graph_closed',
    'hamiltonian', 'sharp',
    'ReductionProblem', 'SubbundleSpec', 'SubmanifoldSpec', 'ann1', 'ann_top', 'canonical_bundle',
    'falsify_canonicity', 'reduce', 'subordinate',
    'check_leibniz_iso', 'gauge_matrix', 'gauge_reduce_commute', 'gauge_transform',
    'parse', 'run',
]
