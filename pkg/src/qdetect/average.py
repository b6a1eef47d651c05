"""Measurements optimal on average over Haar-rotated unknown components.

Averaging ``Tr(Pi rho_1)`` over a Haar-random rotation gives ``Tr(Pi) / n``, so
the average-case problem is the nominal problem on the states
``q_i rho_i + (1 - q_i) I / n`` with the original priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Povm, UncertainEnsemble, frobenius_distance
from .solver import DEFAULT_TOL, DesignSolution, DetectionProblem, solve_nominal

__all__ = [
    "AverageProblem",
    "MeasurementWeights",
    "effective_states",
    "design_average",
    "average_value",
    "measurement_weights",
    "equiprobable_shortcut",
    "nominal_coincidence",
]

_EQUIPROBABLE_TOL = 1e-12


@dataclass(frozen=True)
class AverageProblem:
    states: np.ndarray
    priors: np.ndarray

    def problem(self) -> DetectionProblem:
        return DetectionProblem(self.states, self.priors)


@dataclass(frozen=True)
class MeasurementWeights:
    """Trace weights, normalized shapes and outcome distribution of a measurement.

    ``shapes[i]`` is ``Pi_i / sigma_i`` (zero where ``sigma_i == 0``) and
    ``outcome_probs[i] = sum_j p_j Tr(Pi_i rho_j)`` uses the known states.
    """

    sigma: np.ndarray
    shapes: np.ndarray
    outcome_probs: np.ndarray


def effective_states(ensemble: UncertainEnsemble) -> AverageProblem:
    n = ensemble.dim
    q = ensemble.bounds[:, None, None]
    states = q * ensemble.states + (1 - q) / n * np.eye(n)[None]
    return AverageProblem(states, ensemble.priors)


def average_value(povm: Povm, ensemble: UncertainEnsemble) -> float:
    """Expected probability of correct detection over Haar-random unknown components."""
    avg = effective_states(ensemble)
    return float(np.sum(avg.priors * np.einsum("ijk,ikj->i", povm.operators, avg.states).real))


def design_average(ensemble: UncertainEnsemble, tol: float = DEFAULT_TOL) -> DesignSolution:
    return solve_nominal(effective_states(ensemble).problem(), tol)


def measurement_weights(povm: Povm, ensemble: UncertainEnsemble) -> MeasurementWeights:
    if povm.dim != ensemble.dim or povm.m != ensemble.m:
        raise ValueError("measurement and ensemble dimensions differ")
    ops = povm.operators
    sigma = np.einsum("ijj->i", ops).real
    shapes = np.zeros_like(ops)
    nz = sigma > 0
    shapes[nz] = ops[nz] / sigma[nz, None, None]
    avg_state = np.einsum("j,jkl->kl", ensemble.priors, ensemble.states)
    probs = np.einsum("ijk,kj->i", ops, avg_state).real
    return MeasurementWeights(sigma, shapes, probs)


def equiprobable_shortcut(ensemble: UncertainEnsemble,
                          tol: float = DEFAULT_TOL) -> tuple[bool, Povm | None]:
    """Nominal measurement as the average-optimal design for equiprobable, uniform-q ensembles.

    With equal priors the identity term contributes a constant ``(1 - q) / m``,
    so the nominal optimum is also average-optimal for every ``q > 0``.
    Returns ``(False, None)`` when the ensemble does not qualify.
    """
    p, q = ensemble.priors, ensemble.bounds
    uniform_q = np.all(q == q[0]) and q[0] > 0
    equiprobable = np.all(np.abs(p - 1.0 / ensemble.m) <= _EQUIPROBABLE_TOL)
    if not (uniform_q and equiprobable):
        return False, None
    sol = solve_nominal(DetectionProblem(ensemble.states, p), tol)
    return True, sol.povm


COINCIDENCE_TOL = 1e-4


def nominal_coincidence(ensemble: UncertainEnsemble, tol: float = DEFAULT_TOL,
                        distance_tol: float = COINCIDENCE_TOL) -> tuple[bool, float]:
    """Whether the average-optimal design coincides with the nominal one.

    Compares the two solver outputs in Frobenius distance; no structural rule
    is assumed, so a False here only means the solver iterates differ.
    """
    nom = solve_nominal(DetectionProblem(ensemble.states, ensemble.priors), tol)
    avg = design_average(ensemble, tol)
    d = frobenius_distance(avg.povm.operators, nom.povm.operators)
    return d < distance_tol, d
