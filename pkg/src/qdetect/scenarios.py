"""Evaluate measurements against concrete choices of the unknown state components.

The adversarial and best-case realizations depend on the measurement being
evaluated (the minimizing state lives in the lowest eigenspace of each
``Pi_i``), so they are always resolved against the POVM passed in.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .average import design_average
from .linalg import Povm, UncertainEnsemble, density_operator, frobenius_distance
from .robust import design_worst_case
from .solver import DEFAULT_TOL, DetectionProblem, solve_nominal

__all__ = [
    "RealizationKind",
    "Realization",
    "ADVERSARIAL",
    "BEST",
    "NOMINAL",
    "MAXIMALLY_MIXED",
    "CRITERIA",
    "SWEEP_REALIZATIONS",
    "SweepRecord",
    "evaluate",
    "q_grid",
    "q_sweep",
    "measurement_difference",
]

logger = logging.getLogger(__name__)


class RealizationKind(enum.Enum):
    ADVERSARIAL = "wc"
    BEST = "bc"
    NOMINAL = "nominal"
    MAXIMALLY_MIXED = "mm"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Realization:
    kind: RealizationKind
    states: np.ndarray | None = None

    @classmethod
    def explicit(cls, states) -> "Realization":
        arr = np.stack([density_operator(s) for s in np.asarray(states, dtype=complex)])
        return cls(RealizationKind.EXPLICIT, arr)

    @property
    def label(self) -> str:
        return self.kind.value


ADVERSARIAL = Realization(RealizationKind.ADVERSARIAL)
BEST = Realization(RealizationKind.BEST)
NOMINAL = Realization(RealizationKind.NOMINAL)
MAXIMALLY_MIXED = Realization(RealizationKind.MAXIMALLY_MIXED)

CRITERIA = ("nom", "wc", "avg")
SWEEP_REALIZATIONS = (NOMINAL, ADVERSARIAL, BEST, MAXIMALLY_MIXED)


def _unknown_overlaps(ops: np.ndarray, ensemble: UncertainEnsemble, realization: Realization) -> np.ndarray:
    kind = realization.kind
    if kind is RealizationKind.ADVERSARIAL:
        return np.array([np.linalg.eigvalsh(o)[0] for o in ops])
    if kind is RealizationKind.BEST:
        return np.array([np.linalg.eigvalsh(o)[-1] for o in ops])
    if kind is RealizationKind.NOMINAL:
        return np.einsum("ijk,ikj->i", ops, ensemble.states).real
    if kind is RealizationKind.MAXIMALLY_MIXED:
        return np.einsum("ijj->i", ops).real / ensemble.dim
    if realization.states is None or realization.states.shape != ensemble.states.shape:
        raise ValueError("explicit realization must supply one state per message of matching dimension")
    return np.einsum("ijk,ikj->i", ops, realization.states).real


def evaluate(povm: Povm, ensemble: UncertainEnsemble, realization: Realization) -> float:
    """Probability of correct detection when the unknown components follow `realization`."""
    if povm.dim != ensemble.dim or povm.m != ensemble.m:
        raise ValueError("measurement and ensemble dimensions differ")
    ops = povm.operators
    p, q = ensemble.priors, ensemble.bounds
    known = np.einsum("ijk,ikj->i", ops, ensemble.states).real
    unknown = _unknown_overlaps(ops, ensemble, realization)
    return float(np.sum(p * (q * known + (1 - q) * unknown)))


def measurement_difference(povm_at_q: Povm, povm_at_q_minus: Povm) -> float:
    return frobenius_distance(povm_at_q.operators, povm_at_q_minus.operators)


@dataclass
class SweepRecord:
    """One grid point of a uniform-q sweep.

    ``values[(criterion, realization_label)]`` holds the probability of
    correct detection of the criterion's design under that realization.
    Differences are taken against the previous grid point (NaN on the first).
    """

    q: float
    values: dict = field(default_factory=dict)
    dist_wc_nom: float = float("nan")
    dist_avg_nom: float = float("nan")
    diff_wc: float = float("nan")
    diff_avg: float = float("nan")
    status: str = "ok"
    povms: dict = field(default_factory=dict, repr=False)
    regime: str = ""


def q_grid(q_from: float, q_to: float, step: float) -> np.ndarray:
    """Grid q_from, q_from + step, ... not exceeding q_to (at least one point)."""
    if not (0.0 <= q_from <= q_to <= 1.0):
        raise ValueError("need 0 <= q_from <= q_to <= 1")
    if step <= 0:
        raise ValueError("step must be positive")
    count = int(np.floor((q_to - q_from) / step + 1e-9)) + 1
    return np.round(q_from + step * np.arange(count), 12)


def _sweep_row(ensemble: UncertainEnsemble, nominal: Povm, q: float, realizations, tol: float) -> SweepRecord:
    rec = SweepRecord(q=float(q))
    ens = ensemble.with_bounds(q)
    try:
        robust = design_worst_case(ens, tol, cross_check=False)
        avg = design_average(ens, tol)
    except Exception as exc:  # recorded per row, the sweep continues
        logger.warning("sweep row q=%g failed: %s", q, exc)
        rec.status = f"failed:{type(exc).__name__}"
        return rec
    designs = {"nom": nominal, "wc": robust.chosen_povm, "avg": avg.povm}
    rec.povms = designs
    rec.regime = robust.regime.value
    for crit, povm in designs.items():
        for r in realizations:
            rec.values[(crit, r.label)] = evaluate(povm, ens, r)
    rec.dist_wc_nom = frobenius_distance(robust.chosen_povm.operators, nominal.operators)
    rec.dist_avg_nom = frobenius_distance(avg.povm.operators, nominal.operators)
    if not (robust.converged and avg.converged):
        rec.status = "nonconverged"
    return rec


def q_sweep(ensemble: UncertainEnsemble, q_from: float = 0.0, q_to: float = 1.0, step: float = 0.005,
            realizations: Sequence[Realization] = SWEEP_REALIZATIONS, tol: float = DEFAULT_TOL,
            workers: int = 1) -> list[SweepRecord]:
    """Nominal, worst-case and average designs across a grid of uniform mixing bounds.

    The ensemble's own bounds are ignored. Rows are independent and may be
    computed by `workers` threads; output is ordered by q either way.
    """
    grid = q_grid(q_from, q_to, step)
    nominal = solve_nominal(DetectionProblem(ensemble.states, ensemble.priors), tol)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda q: _sweep_row(ensemble, nominal.povm, q, realizations, tol), grid))
    else:
        rows = [_sweep_row(ensemble, nominal.povm, q, realizations, tol) for q in grid]
    if not nominal.converged:
        for r in rows:
            if r.status == "ok":
                r.status = "nonconverged"
    for prev, cur in zip(rows, rows[1:]):
        if prev.povms and cur.povms:
            cur.diff_wc = measurement_difference(cur.povms["wc"], prev.povms["wc"])
            cur.diff_avg = measurement_difference(cur.povms["avg"], prev.povms["avg"])
    return rows
