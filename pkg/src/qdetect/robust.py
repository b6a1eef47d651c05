"""Worst-case optimal measurements via the effective (reweighted) ensemble."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .linalg import Povm, UncertainEnsemble
from .solver import (
    DEFAULT_TOL,
    DetectionProblem,
    DesignSolution,
    WorstCaseSolution,
    solve_nominal,
    solve_worst_case_program,
)

__all__ = [
    "EffectiveEnsemble",
    "Regime",
    "RobustDesign",
    "effective_priors",
    "guess_measurement",
    "guess_bounds",
    "design_worst_case",
    "orthogonal_worst_case_value",
    "uniform_threshold",
    "ORTHOGONALITY_TOL",
]

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-9
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class EffectiveEnsemble:
    """Known states reweighted by how certain they are.

    ``priors`` is None when ``eta == 0``, i.e. every state is completely unknown.
    """

    states: np.ndarray
    priors: np.ndarray | None
    eta: float

    @property
    def degenerate(self) -> bool:
        return self.priors is None


class Regime(enum.Enum):
    EFFECTIVE = "effective"
    GUESS = "guess"


@dataclass(frozen=True)
class RobustDesign:
    chosen_povm: Povm
    regime: Regime
    worst_case_value: float
    threshold_margin: float
    effective: EffectiveEnsemble
    # certificate for the worst-case program built from the effective solve
    certificate: WorstCaseSolution
    nominal: DesignSolution | None = None
    program_value: float | None = None

    @property
    def converged(self) -> bool:
        return self.nominal is None or self.nominal.converged


def effective_priors(ensemble: UncertainEnsemble) -> EffectiveEnsemble:
    p, q = ensemble.priors, ensemble.bounds
    eta = float(np.sum(p * q))
    if eta <= 0.0:
        return EffectiveEnsemble(ensemble.states, None, 0.0)
    if np.all(q == q[0]):
        # uniform bounds leave the priors unchanged; skip the rounding of p q / eta
        return EffectiveEnsemble(ensemble.states, ensemble.priors, eta)
    return EffectiveEnsemble(ensemble.states, p * q / eta, eta)


def _max_mask(priors: np.ndarray) -> np.ndarray:
    priors = np.asarray(priors, dtype=float)
    return priors >= priors.max() - _TIE_TOL


def guess_measurement(priors, dim: int) -> Povm:
    """State-independent measurement that guesses uniformly among the most likely messages."""
    mask = _max_mask(priors)
    weights = mask / mask.sum()
    return Povm(weights[:, None, None] * np.eye(dim)[None])


def guess_bounds(priors) -> np.ndarray:
    """Eigenvalue bounds lambda_i of the guess measurement (it is a multiple of I)."""
    mask = _max_mask(priors)
    return mask / mask.sum()


def _guess_certificate(ensemble: UncertainEnsemble, u: np.ndarray) -> WorstCaseSolution:
    p, q = ensemble.priors, ensemble.bounds
    povm = guess_measurement(p, ensemble.dim)
    lam = guess_bounds(p)
    c = (p * q)[:, None, None] * ensemble.states
    value = ensemble.p_max
    return WorstCaseSolution(povm=povm, bounds=lam, value=value, dual=u,
                             multipliers_z=u[None] - c, multipliers_w=np.trace(u).real - p,
                             gap=float(np.trace(u).real - value), iterations=0, converged=True)


def design_worst_case(ensemble: UncertainEnsemble, tol: float = DEFAULT_TOL,
                      cross_check: bool = True) -> RobustDesign:
    """Measurement maximizing the worst-case probability of correct detection.

    Solves the nominal problem on the effective ensemble (known states with
    priors ``p_i q_i / eta``) and compares ``eta`` times its value against the
    guess measurement; ties go to the guess. The returned certificate is a
    feasible primal-dual pair for the explicit worst-case program. With
    `cross_check` the explicit program is also solved and the two values are
    compared (a mismatch beyond ``10 tol`` is logged).
    """
    p_max = ensemble.p_max
    n = ensemble.dim
    eff = effective_priors(ensemble)
    if eff.degenerate:
        u = p_max / n * np.eye(n, dtype=complex)
        cert = _guess_certificate(ensemble, u)
        return RobustDesign(cert.povm, Regime.GUESS, p_max, -p_max, eff, cert,
                            program_value=p_max if cross_check else None)

    nominal = solve_nominal(DetectionProblem(eff.states, eff.priors), tol)
    scaled = eff.eta * nominal.value
    margin = scaled - p_max
    if margin > 0:
        lam = np.zeros(ensemble.m)
        u = eff.eta * nominal.dual
        c = (ensemble.priors * ensemble.bounds)[:, None, None] * ensemble.states
        cert = WorstCaseSolution(povm=nominal.povm, bounds=lam, value=scaled, dual=u,
                                 multipliers_z=u[None] - c,
                                 multipliers_w=np.trace(u).real - ensemble.priors,
                                 gap=eff.eta * nominal.gap, iterations=nominal.iterations,
                                 converged=nominal.converged)
        regime, value = Regime.EFFECTIVE, scaled
    else:
        # pad the scaled effective dual up to trace p_max; still dominates every p_i q_i rho_i
        u = eff.eta * nominal.dual
        u = u + max(p_max - np.trace(u).real, 0.0) / n * np.eye(n)
        cert = _guess_certificate(ensemble, u)
        regime, value = Regime.GUESS, p_max

    program_value = None
    if cross_check:
        program_value = solve_worst_case_program(ensemble, tol).value
        if abs(program_value - value) > 10 * tol:
            logger.warning("effective-ensemble value %.12g disagrees with explicit program %.12g",
                           value, program_value)
    return RobustDesign(cert.povm, regime, value, margin, eff, cert, nominal, program_value)


def _check_orthogonal(states: np.ndarray, tol: float):
    m = states.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            overlap = abs(np.einsum("jk,kj->", states[i], states[j]))
            if overlap > tol:
                raise ValueError(f"states {i} and {j} are not orthogonal (overlap {overlap:.3g})")


def orthogonal_worst_case_value(ensemble: UncertainEnsemble, tol: float = ORTHOGONALITY_TOL) -> float:
    """Closed-form worst-case value for mutually orthogonal known states.

    Every state with ``q_i > 0`` keeps a positive effective prior and is
    perfectly distinguishable, while fully unknown states get zero effective
    weight, so the effective ensemble is always discriminated perfectly and
    the value is ``max(p_max, eta)``.
    """
    _check_orthogonal(ensemble.states, tol)
    eta = float(np.sum(ensemble.priors * ensemble.bounds))
    return max(ensemble.p_max, eta)


def uniform_threshold(ensemble: UncertainEnsemble, tol: float = DEFAULT_TOL) -> float:
    """Uniform mixing bound below which guessing is worst-case optimal.

    Equals ``p_max / P_nom`` where ``P_nom`` is the nominal optimum on the
    known states; the ensemble's own bounds are ignored.
    """
    nominal = solve_nominal(DetectionProblem(ensemble.states, ensemble.priors), tol)
    return ensemble.p_max / nominal.value
