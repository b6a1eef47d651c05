"""Minimum-error detection programs and their optimality certificates.

Both programs are solved through their duals,

    nominal:     min Tr(U)  s.t.  U >= p_i rho_i
    worst case:  min Tr(U)  s.t.  U >= p_i q_i rho_i,  Tr(U) >= p_i

with a log-barrier path-following method. On the central path the barrier
gradient gives the measurement directly, ``Pi_i = mu (U - C_i)^{-1}`` (plus
``lambda_i I`` with ``lambda_i = mu / (Tr U - p_i)`` in the worst-case
program), so every iterate carries a primal-dual pair whose gap is known.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import Povm, UncertainEnsemble, density_operator, min_eigenvalue

__all__ = [
    "DetectionProblem",
    "DesignSolution",
    "WorstCaseSolution",
    "CertificateReport",
    "SolverError",
    "solve_nominal",
    "solve_worst_case_program",
    "verify_nominal_certificate",
    "verify_worst_case_certificate",
    "two_state_oracle",
    "brute_force_oracle",
]

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
MAX_ITERATIONS = 10_000
MU_FACTOR = 0.05
CENTERING_TARGET = 0.1


class SolverError(RuntimeError):
    """Raised when a program cannot be set up (not for slow convergence)."""


@dataclass(frozen=True)
class DetectionProblem:
    """States to be discriminated and their prior probabilities."""

    states: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        states = np.stack([density_operator(s) for s in np.asarray(self.states, dtype=complex)])
        priors = np.asarray(self.priors, dtype=float).reshape(-1)
        if priors.shape != (states.shape[0],):
            raise ValueError(f"need {states.shape[0]} priors, got {priors.shape[0]}")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-10:
            raise ValueError("priors must be non-negative and sum to 1")
        states.setflags(write=False)
        priors.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", priors)

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def weighted(self) -> np.ndarray:
        return self.priors[:, None, None] * self.states


@dataclass(frozen=True)
class DesignSolution:
    povm: Povm
    value: float
    dual: np.ndarray
    gap: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class WorstCaseSolution:
    """Solution of the explicit worst-case program.

    ``multipliers_z[i] = U - p_i q_i rho_i`` and ``multipliers_w[i] = Tr(U) - p_i``
    are the Lagrange multipliers of the constraints ``Pi_i >= lambda_i I`` and
    ``lambda_i >= 0``.
    """

    povm: Povm
    bounds: np.ndarray
    value: float
    dual: np.ndarray
    multipliers_z: np.ndarray
    multipliers_w: np.ndarray
    gap: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class CertificateReport:
    """Per-condition margins and residuals of an optimality certificate.

    ``margins`` are minimum eigenvalues (or scalar slacks) that must be
    non-negative; ``residuals`` are norms that must vanish. Both are keyed by a
    short condition label.
    """

    margins: dict
    residuals: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v >= -self.tol for v in self.margins.values()) and all(
            v <= self.tol for v in self.residuals.values()
        )

    @property
    def worst_margin(self) -> float:
        return min(self.margins.values()) if self.margins else 0.0

    @property
    def worst_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def lines(self) -> list[str]:
        out = []
        for k, v in self.margins.items():
            out.append(f"margin   {k:<28s} {v: .3e}  {'ok' if v >= -self.tol else 'FAIL'}")
        for k, v in self.residuals.items():
            out.append(f"residual {k:<28s} {v: .3e}  {'ok' if v <= self.tol else 'FAIL'}")
        return out


# --------------------------------------------------------------------------
# barrier machinery


def _hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal basis (real trace inner product) of n x n Hermitian matrices."""
    basis = []
    for j in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[j, k] = e[k, j] = s
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[j, k] = -1j * s
            e[k, j] = 1j * s
            basis.append(e)
    return np.array(basis)


def _inv_psd(z: np.ndarray) -> np.ndarray | None:
    """Inverse of a Hermitian positive definite matrix, or None if not PD."""
    try:
        low = np.linalg.cholesky(z)
    except np.linalg.LinAlgError:
        return None
    li = np.linalg.inv(low)
    w = li.conj().T @ li
    return 0.5 * (w + w.conj().T)


@dataclass
class _BarrierResult:
    u: np.ndarray
    x: np.ndarray  # PSD parts Pi_i - lambda_i I
    lam: np.ndarray
    iterations: int
    converged: bool


def _barrier_solve(
    c: np.ndarray,
    floors: np.ndarray | None,
    tol: float,
    max_iter: int = MAX_ITERATIONS,
) -> _BarrierResult:
    """Path-following on  min Tr U - mu sum log det(U - C_i) - mu sum log(Tr U - f_i).

    `floors` holds the scalar lower bounds f_i on Tr U (worst-case program);
    None for the nominal program.
    """
    m, n = c.shape[0], c.shape[1]
    basis = _hermitian_basis(n)
    tr_basis = np.einsum("ajj->a", basis).real
    nscal = 0 if floors is None else len(floors)
    nu = m * n + nscal

    top = max(np.linalg.eigvalsh(ci)[-1] for ci in c)
    shift = max(top, 0.0) + 1.0
    if floors is not None:
        shift = max(shift, (float(np.max(floors)) + 1.0) / n)
    u = shift * np.eye(n, dtype=complex)

    # vec(W E W) = kron(W, W^T) vec(E) for row-major vec; Tr(E_a M) = vec(conj E_a) . vec(M)
    bvec = basis.reshape(len(basis), n * n).T
    bvec_h = bvec.conj().T

    mu = 1.0 / m
    mu_final = 0.25 * tol / nu
    iterations = 0
    dec = np.inf

    def centering(u, mu, target, max_steps):
        nonlocal iterations
        dec = np.inf
        for _ in range(max_steps):
            if iterations >= max_iter:
                return u, None
            iterations += 1
            linv = np.linalg.inv(np.linalg.cholesky(u[None] - c))
            ws = np.conj(np.transpose(linv, (0, 2, 1))) @ linv
            grad = tr_basis - mu * (bvec_h @ ws.sum(axis=0).reshape(-1)).real
            kron = sum(np.kron(w, w.T) for w in ws)
            hess = mu * (bvec_h @ kron @ bvec).real
            tr_u = np.trace(u).real
            if floors is not None:
                t = tr_u - floors
                grad -= mu * np.sum(1.0 / t) * tr_basis
                hess += mu * np.sum(1.0 / t**2) * np.outer(tr_basis, tr_basis)
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = float(np.sqrt(max(-grad @ step, 0.0) / mu))
            du = (bvec @ step).reshape(n, n)
            alpha = 1.0 if dec < 0.25 else 1.0 / (1.0 + dec)
            # self-concordance keeps the damped step feasible; guard against rounding
            low = np.linalg.eigvalsh(linv @ du @ np.conj(np.transpose(linv, (0, 2, 1))))[:, 0]
            if low.min() < 0:
                alpha = min(alpha, 0.99 / -low.min())
            if floors is not None:
                dt = np.trace(du).real
                if dt < 0:
                    alpha = min(alpha, 0.99 * float(np.min(tr_u - floors)) / -dt)
            u = u + alpha * du
            u = 0.5 * (u + u.conj().T)
            if dec < target:
                break
        return u, dec

    while True:
        final = mu <= mu_final
        u, dec = centering(u, mu, 1e-6 if final else CENTERING_TARGET, 30 if final else 100)
        if dec is None or final:
            break
        mu = max(MU_FACTOR * mu, mu_final)
    converged = dec is not None

    zs = u[None] - c
    x = np.array([mu * _inv_psd(z) for z in zs])
    lam = np.zeros(m)
    if floors is not None:
        lam = mu / (np.trace(u).real - floors)
    x, lam = _polish(u, c, floors, x, lam, mu, basis)
    return _BarrierResult(u=u, x=x, lam=lam, iterations=iterations, converged=converged)


def _coords(h: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.einsum("ajk,...kj->...a", basis, h).real


def _polish(u, c, floors, x, lam, mu, basis):
    """Restore the identity resolution lost to cancellation in U - C_i.

    Near the optimum each Pi_i - lambda_i I lives in the near-null space of
    Z_i = U - C_i. The barrier estimate is compressed onto that space and a
    minimal-norm correction within the same spaces (plus the active lambda_i)
    enforces sum_i Pi_i = I. Falls back to a congruence rescaling, which keeps
    every operator PSD, if the correction is not PSD.
    """
    m, n = c.shape[0], c.shape[1]
    eye = np.eye(n)
    thresh = np.sqrt(mu)
    projectors, cols, owners = [], [], []
    for i, z in enumerate(u[None] - c):
        w, v = np.linalg.eigh(z)
        vi = v[:, w <= thresh]
        projectors.append(vi @ vi.conj().T)
        k = vi.shape[1]
        if k:
            for b in _hermitian_basis(k):
                cols.append(_coords(vi @ b @ vi.conj().T, basis))
                owners.append((i, vi, b))
    active = np.zeros(m, dtype=bool)
    if floors is not None:
        active = np.trace(u).real - floors <= thresh
    for i in np.flatnonzero(active):
        cols.append(_coords(eye, basis))
        owners.append((i, None, None))
    x0 = np.array([q @ xi @ q for q, xi in zip(projectors, x)])
    lam0 = np.where(active, lam, 0.0)
    resid = eye - x0.sum(axis=0) - lam0.sum() * eye
    if cols:
        a = np.array(cols).T
        coef = np.linalg.lstsq(a, _coords(resid, basis), rcond=None)[0]
        for t, (i, vi, b) in zip(coef, owners):
            if vi is None:
                lam0[i] += t
            else:
                x0[i] += t * (vi @ b @ vi.conj().T)
    x0 = 0.5 * (x0 + np.conj(np.transpose(x0, (0, 2, 1))))
    ok = (
        np.linalg.norm(x0.sum(axis=0) + lam0.sum() * eye - eye) <= 1e-12
        and min(np.linalg.eigvalsh(xi)[0] for xi in x0) >= -1e-12
        and lam0.min() >= 0
    )
    if ok:
        return x0, lam0
    return _rescale(x, lam)


def _rescale(x, lam):
    n = x.shape[1]
    s = x.sum(axis=0) + lam.sum() * np.eye(n)
    w, v = np.linalg.eigh(s)
    t = (v / np.sqrt(w)) @ v.conj().T
    s_inv = (v / w) @ v.conj().T
    floor = 1.0 / w[-1]
    x = np.array([t @ xi @ t + li * (s_inv - floor * np.eye(n)) for xi, li in zip(x, lam)])
    x = 0.5 * (x + np.conj(np.transpose(x, (0, 2, 1))))
    return x, lam * floor


def _check_tol(tol: float):
    if not (0 < tol <= 1e-4):
        raise ValueError(f"tolerance must lie in (0, 1e-4], got {tol}")


def solve_nominal(problem: DetectionProblem, tol: float = DEFAULT_TOL) -> DesignSolution:
    """Measurement maximizing the probability of correct detection.

    Returns the measurement together with the dual operator ``U`` certifying
    it: ``U >= p_i rho_i`` and ``(U - p_i rho_i) Pi_i = 0``. If the iteration
    cap is reached the best iterate is returned with ``converged=False``.
    """
    _check_tol(tol)
    c = problem.weighted
    res = _barrier_solve(c, None, tol)
    povm = Povm(res.x)
    value = float(np.einsum("ijk,ikj->", povm.operators, c).real)
    u = 0.5 * (res.u + res.u.conj().T)
    gap = float(np.trace(u).real - value)
    cert = verify_nominal_certificate(problem, povm, u, tol=10 * tol)
    converged = res.converged and gap <= tol and cert.passed
    if not converged:
        logger.warning("nominal solve did not reach tol %.1e (gap %.3e)", tol, gap)
    return DesignSolution(povm=povm, value=value, dual=u, gap=gap,
                          iterations=res.iterations, converged=converged)


def worst_case_objective(povm_ops: np.ndarray, bounds: np.ndarray, ensemble: UncertainEnsemble) -> float:
    p, q = ensemble.priors, ensemble.bounds
    overlaps = np.einsum("ijk,ikj->i", povm_ops, ensemble.states).real
    return float(np.sum(p * (q * overlaps + (1 - q) * bounds)))


def solve_worst_case_program(ensemble: UncertainEnsemble, tol: float = DEFAULT_TOL) -> WorstCaseSolution:
    """Solve the explicit worst-case program over measurements and eigenvalue bounds.

    Maximizes ``sum_i p_i [q_i Tr(Pi_i rho_i) + (1 - q_i) lambda_i]`` subject to
    ``Pi_i >= lambda_i I``, ``lambda_i >= 0`` and ``sum_i Pi_i = I``.
    """
    _check_tol(tol)
    p, q = ensemble.priors, ensemble.bounds
    c = (p * q)[:, None, None] * ensemble.states
    res = _barrier_solve(c, p.copy(), tol)
    n = ensemble.dim
    ops = res.x + res.lam[:, None, None] * np.eye(n)[None]
    povm = Povm(ops)
    value = worst_case_objective(povm.operators, res.lam, ensemble)
    u = 0.5 * (res.u + res.u.conj().T)
    gap = float(np.trace(u).real - value)
    cert = verify_worst_case_certificate(ensemble, povm, res.lam, u, tol=10 * tol)
    converged = res.converged and gap <= tol and cert.passed
    if not converged:
        logger.warning("worst-case solve did not reach tol %.1e (gap %.3e)", tol, gap)
    z = u[None] - c
    w = np.trace(u).real - p
    return WorstCaseSolution(povm=povm, bounds=res.lam, value=value, dual=u,
                             multipliers_z=z, multipliers_w=w, gap=gap,
                             iterations=res.iterations, converged=converged)


# --------------------------------------------------------------------------
# certificates


def verify_nominal_certificate(problem: DetectionProblem, povm: Povm | np.ndarray,
                               dual: np.ndarray, tol: float = 1e-6) -> CertificateReport:
    ops = povm.operators if isinstance(povm, Povm) else np.asarray(povm)
    dual = np.asarray(dual)
    if ops.shape != problem.states.shape or dual.shape != problem.states.shape[1:]:
        raise ValueError("solution dimensions do not match the problem")
    margins, residuals = {}, {}
    n = problem.dim
    residuals["sum Pi - I"] = float(np.linalg.norm(ops.sum(axis=0) - np.eye(n)))
    for i, (pi, ci) in enumerate(zip(ops, problem.weighted)):
        z = dual - ci
        margins[f"Pi_{i} psd"] = min_eigenvalue(pi)
        margins[f"U - p_{i} rho_{i}"] = min_eigenvalue(z)
        residuals[f"(U - p_{i} rho_{i}) Pi_{i}"] = float(np.linalg.norm(z @ pi))
    return CertificateReport(margins=margins, residuals=residuals, tol=tol)


def verify_worst_case_certificate(ensemble: UncertainEnsemble, povm: Povm | np.ndarray,
                                  bounds: Sequence[float], dual: np.ndarray,
                                  tol: float = 1e-6) -> CertificateReport:
    """Check the five-condition optimality system of the worst-case program."""
    ops = povm.operators if isinstance(povm, Povm) else np.asarray(povm)
    lam = np.asarray(bounds, dtype=float)
    dual = np.asarray(dual)
    if ops.shape != ensemble.states.shape or lam.shape != (ensemble.m,) or \
            dual.shape != ensemble.states.shape[1:]:
        raise ValueError("solution dimensions do not match the ensemble")
    n = ensemble.dim
    eye = np.eye(n)
    p, q = ensemble.priors, ensemble.bounds
    tr_u = float(np.trace(dual).real)
    margins, residuals = {}, {}
    residuals["sum Pi - I"] = float(np.linalg.norm(ops.sum(axis=0) - eye))
    for i in range(ensemble.m):
        z = dual - p[i] * q[i] * ensemble.states[i]
        x = ops[i] - lam[i] * eye
        margins[f"lambda_{i} >= 0"] = float(lam[i])
        margins[f"Pi_{i} - lambda_{i} I"] = min_eigenvalue(x)
        margins[f"U - p_{i} q_{i} rho_{i}"] = min_eigenvalue(z)
        margins[f"Tr U - p_{i}"] = tr_u - p[i]
        residuals[f"(U - C_{i})(Pi_{i} - lambda_{i} I)"] = float(np.linalg.norm(z @ x))
        residuals[f"(Tr U - p_{i}) lambda_{i}"] = abs((tr_u - p[i]) * lam[i])
    return CertificateReport(margins=margins, residuals=residuals, tol=tol)


# --------------------------------------------------------------------------
# independent oracles


def two_state_oracle(rho_a, rho_b, p_a: float, p_b: float) -> float:
    """Closed-form optimum for two states: (1 + ||p_a rho_a - p_b rho_b||_1) / 2."""
    if abs(p_a + p_b - 1.0) > 1e-10:
        raise ValueError("priors must sum to 1")
    delta = p_a * np.asarray(rho_a) - p_b * np.asarray(rho_b)
    delta = 0.5 * (delta + delta.conj().T)
    return float(0.5 * (1.0 + np.sum(np.abs(np.linalg.eigvalsh(delta)))))


def brute_force_oracle(problem: DetectionProblem, grid_density: int = 2000) -> float:
    """Grid search over projective qubit measurements for a two-state problem.

    Scans projectors onto ``cos(t/2)|0> + e^{i f} sin(t/2)|1>`` on a
    `grid_density` x `grid_density` grid in (t, f), plus the two
    state-independent assignments.
    """
    if problem.m != 2 or problem.dim != 2:
        raise ValueError("brute-force oracle supports two qubit states only")
    (pa, pb), (ra, rb) = problem.priors, problem.states
    delta = pa * ra - pb * rb
    best = max(pa, pb)
    theta = np.linspace(0.0, np.pi, grid_density)
    phi = np.linspace(0.0, 2 * np.pi, grid_density, endpoint=False)
    a = np.cos(theta / 2)[:, None]
    b = np.sin(theta / 2)[:, None] * np.exp(1j * phi)[None, :]
    # <psi|delta|psi> for psi = (a, b)
    quad = (
        a * a * delta[0, 0].real
        + (np.abs(b) ** 2) * delta[1, 1].real
        + 2 * (a * (delta[0, 1] * b)).real
    )
    return float(max(best, pb + quad.max()))
