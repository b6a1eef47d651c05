"""Dense Hermitian linear algebra and validated quantum objects.

Operators are plain complex ``numpy`` arrays. The constructors here validate
their input, symmetrize it exactly and hand back read-only arrays, so every
downstream routine can treat an operator as an immutable value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "HERMITIAN_ATOL",
    "STATE_PSD_TOL",
    "SOLVER_PSD_TOL",
    "EIG_CLUSTER_TOL",
    "hermitian",
    "density_operator",
    "min_eigenvalue",
    "min_eigenspace",
    "max_eigenvalue",
    "is_psd",
    "trace_inner",
    "frobenius_distance",
    "Povm",
    "UncertainEnsemble",
]

HERMITIAN_ATOL = 1e-12
STATE_PSD_TOL = 1e-10
SOLVER_PSD_TOL = 1e-9
EIG_CLUSTER_TOL = 1e-9
POVM_SUM_TOL = 1e-8
SPAN_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def hermitian(a, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a square matrix as Hermitian and return its exact symmetrization.

    Raises ``ValueError`` if the matrix is not square or deviates from its
    conjugate transpose by more than `atol` in any entry.
    """
    a = np.array(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T))
    if dev > atol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3g} > {atol:g})")
    return _frozen(0.5 * (a + a.conj().T))


def density_operator(a, tol: float = STATE_PSD_TOL, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a density operator: Hermitian, PSD within `tol`, unit trace within `tol`."""
    rho = hermitian(a, atol=atol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density operator must have unit trace, got {tr:.12g}")
    lmin = min_eigenvalue(rho)
    if lmin < -tol:
        raise ValueError(f"density operator is not PSD (min eigenvalue {lmin:.3g})")
    return rho


def min_eigenvalue(op: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(op)[0])


def max_eigenvalue(op: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(op)[-1])


def min_eigenspace(op: np.ndarray, cluster_tol: float = EIG_CLUSTER_TOL) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and an orthonormal basis of its eigenspace.

    Eigenvalues within `cluster_tol` of the minimum are treated as degenerate
    with it. The basis is returned as the columns of an ``(n, k)`` array.
    """
    w, v = np.linalg.eigh(op)
    k = int(np.count_nonzero(w <= w[0] + cluster_tol))
    return float(w[0]), v[:, :k]


def is_psd(op: np.ndarray, tol: float = STATE_PSD_TOL) -> bool:
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    return min_eigenvalue(op) >= -tol


def trace_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Tr(AB) for Hermitian A, B; the (rounding-level) imaginary part is dropped."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # Tr(AB) = sum_jk A_jk B_kj
    return float(np.einsum("jk,kj->", a, b).real)


def frobenius_distance(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    """Frobenius norm of the difference of two operator lists stacked side by side."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)))


@dataclass(frozen=True)
class Povm:
    """An ordered set of PSD operators resolving the identity.

    Parameters
    ----------
    operators : array_like, shape (m, n, n)
        Measurement operators; element ``i`` is the operator for outcome ``i``.
    psd_tol : float
        Allowed negative eigenvalue on each operator.
    sum_tol : float
        Allowed Frobenius deviation of the operator sum from the identity.
    """

    operators: np.ndarray
    psd_tol: float = field(default=SOLVER_PSD_TOL, repr=False)
    sum_tol: float = field(default=POVM_SUM_TOL, repr=False)

    def __post_init__(self):
        ops = np.array(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"POVM operators must have shape (m, n, n), got {ops.shape}")
        ops = np.stack([hermitian(o, atol=1e-9) for o in ops])
        for i, o in enumerate(ops):
            lmin = min_eigenvalue(o)
            if lmin < -self.psd_tol:
                raise ValueError(f"POVM operator {i} is not PSD (min eigenvalue {lmin:.3g})")
        dev = np.linalg.norm(ops.sum(axis=0) - np.eye(ops.shape[1]))
        if dev > self.sum_tol:
            raise ValueError(f"POVM operators do not sum to identity (deviation {dev:.3g})")
        object.__setattr__(self, "operators", _frozen(ops))

    @property
    def m(self) -> int:
        return self.operators.shape[0]

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> np.ndarray:
        return self.operators[i]

    def __iter__(self):
        return iter(self.operators)


@dataclass(frozen=True)
class UncertainEnsemble:
    """Known states, prior probabilities and mixing bounds of an uncertain ensemble.

    The actual state of message ``i`` is ``q[i] * states[i] + (1 - q[i]) * rho1``
    for some unknown density operator ``rho1``. The known states must jointly
    span the Hilbert space.
    """

    states: np.ndarray
    priors: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=complex)
        if states.ndim != 3 or states.shape[1] != states.shape[2]:
            raise ValueError(f"states must have shape (m, n, n), got {states.shape}")
        states = np.stack([density_operator(s) for s in states])
        m, n = states.shape[0], states.shape[1]
        priors = np.array(self.priors, dtype=float).reshape(-1)
        bounds = np.array(self.bounds, dtype=float).reshape(-1)
        if priors.shape != (m,) or bounds.shape != (m,):
            raise ValueError(f"need {m} priors and {m} bounds")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-10:
            raise ValueError("priors must be positive and sum to 1")
        if np.any(bounds < 0) or np.any(bounds > 1):
            raise ValueError("mixing bounds must lie in [0, 1]")
        rank = int(np.count_nonzero(np.linalg.eigvalsh(states.sum(axis=0)) > SPAN_TOL))
        if rank != n:
            raise ValueError(
                f"known states span a {rank}-dimensional subspace of the {n}-dimensional space"
            )
        object.__setattr__(self, "states", _frozen(states))
        object.__setattr__(self, "priors", _frozen(priors))
        object.__setattr__(self, "bounds", _frozen(bounds))

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def p_max(self) -> float:
        return float(self.priors.max())

    def with_bounds(self, bounds) -> "UncertainEnsemble":
        b = np.broadcast_to(np.asarray(bounds, dtype=float), (self.m,))
        return UncertainEnsemble(self.states, self.priors, b)
