"""Linearly convergent first-order solvers for bilinear saddle-point problems.

``min_x max_y f1(x) + f2(x) + y^T B x - g1(y) - g2(y)``

Two solvers are provided: the primal-dual proximal gradient method
(:mod:`saddlekit.pdpg`) and the inexact dual accelerated proximal gradient
method (:mod:`saddlekit.idapg`), together with the spectral analysis that
certifies their rates (:mod:`saddlekit.analysis`).
"""

from .analysis import (CaseLabel, ProblemConstants, check_assumption2, classify_case,
                       derive_constants, mu_phi_lower_bound, predicted_complexities)
from .apg import ApgResult, CompositeObjective, apg_iteration_bound, apg_minimize
from .errors import (DimensionError, DivergenceError, InfeasiblePointError, InstanceError,
                     NotConvergedError, SaddleError, UncertifiedConfigError)
from .idapg import (DualConstants, IdapgState, ToleranceSchedule, dual_constants,
                    epsilon1_gap_bound, idapg_run, idapg_step, momentum_beta, theorem3_schedule)
from .pdpg import (PdpgConfig, PdpgRate, PdpgState, StoppingRule, pdpg_default_config,
                   pdpg_rate, pdpg_run, pdpg_step)
from .problem import (Coupling, MinimaxProblem, ProxTerm, SmoothTerm, StructuredDualSmooth,
                      dual_residual_certificate, eval_lagrangian, primal_residual_certificate,
                      saddle_certificate, saddle_residuals)
from .prox import prox_instantiate, quadratic_term, square_loss_conjugate

__version__ = "0.1.0"
