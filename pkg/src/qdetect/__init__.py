"""Minimum-error quantum measurements for partially known states.

Nominal, worst-case and average-case designs with optimality certificates.
"""

from .average import design_average, effective_states, equiprobable_shortcut, measurement_weights, nominal_coincidence
from .linalg import Povm, UncertainEnsemble, frobenius_distance, min_eigenvalue, trace_inner
from .random_states import McEstimate, RandomStateSampler, expected_trace_mc
from .robust import (
    Regime,
    design_worst_case,
    effective_priors,
    guess_measurement,
    orthogonal_worst_case_value,
    uniform_threshold,
)
from .scenarios import ADVERSARIAL, BEST, MAXIMALLY_MIXED, NOMINAL, Realization, evaluate, q_sweep
from .solver import (
    DetectionProblem,
    solve_nominal,
    solve_worst_case_program,
    two_state_oracle,
    verify_nominal_certificate,
    verify_worst_case_certificate,
)

__version__ = "0.1.0"
