"""
XDiff numerics: grids, influence functions, steppers and stability checks
"""

from .field import Grid, HalfPointField, ScalarField, VectorField, norm_h, norm_h_star
from .influence import InfluenceSet, RbfBasis, init_ncdf
from .scheme import SchemeConfig, StepTrace, initial_state, run
from .stability import StabilityReport, check_explicit_gershgorin, check_lambda_bound, check_semi_implicit

__all__ = [
    'Grid', 'HalfPointField', 'ScalarField', 'VectorField', 'norm_h', 'norm_h_star',
    'InfluenceSet', 'RbfBasis', 'init_ncdf',
    'SchemeConfig', 'StepTrace', 'initial_state', 'run',
    'StabilityReport', 'check_explicit_gershgorin', 'check_lambda_bound', 'check_semi_implicit',
]
