"""Hybrid proximal-gradient / semismooth-Newton solver for ``f + g``.

The nonsmooth part ``g`` may be nonconvex (``l_q`` quasi-norms, zero norms
with box constraints, fused zero norms); proxes of the fused regularizers
are computed by changepoint dynamic programming.
"""

from ._base import (Certificate, DegenerateProxError, ProxNotSingleValued,
                    ProxResult)
from .envelope import (EnvelopeContext, fbe, fbe_gradient, q_matrix,
                       residual, second_order_element, t_map)
from .problem import (Logistic, LeastSquares, Problem, logistic_oracle,
                      ls_oracle)
from .regularizers import (BoxConstraint, FusedLq, FusedZeroNorm, LqNorm,
                           ZeroNormBox)
from .solver import SolveReport, SolverConfig, run
from .subproblem import TrsProblem, solve_trs

__all__ = ['Certificate', 'DegenerateProxError', 'ProxNotSingleValued',
           'ProxResult', 'EnvelopeContext', 'fbe', 'fbe_gradient', 'q_matrix',
           'residual', 'second_order_element', 't_map', 'Logistic',
           'LeastSquares', 'Problem', 'logistic_oracle', 'ls_oracle',
           'BoxConstraint', 'FusedLq', 'FusedZeroNorm', 'LqNorm',
           'ZeroNormBox', 'SolveReport', 'SolverConfig', 'run', 'TrsProblem',
           'solve_trs']
