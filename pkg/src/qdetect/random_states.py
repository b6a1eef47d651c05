"""Haar-random states and Monte Carlo checks of rotation averages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import Povm, UncertainEnsemble

__all__ = [
    "RandomStateSampler",
    "McEstimate",
    "expected_trace_mc",
    "mc_detection_probability",
]

_BATCH = 20_000


@dataclass(frozen=True)
class McEstimate:
    mean: float
    standard_error: float
    samples: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "McEstimate":
        x = np.asarray(x, dtype=float)
        # constant samples: report se 0 exactly rather than rounding noise
        se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 and np.ptp(x) > 0 else 0.0
        return cls(float(np.mean(x)), se, len(x))

    def agrees_with(self, value: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= max(k * self.standard_error, floor)


@dataclass
class RandomStateSampler:
    """Seeded source of Haar-distributed states and unitaries.

    Independent streams for different messages come from :meth:`spawn`, which
    splits the underlying ``SeedSequence``; a given (seed, dim) pair always
    reproduces the same stream.
    """

    dim: int
    seed: int | np.random.SeedSequence = 0
    draws: int = field(default=0, init=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        ss = self.seed if isinstance(self.seed, np.random.SeedSequence) else np.random.SeedSequence(self.seed)
        self._seq = ss
        self._rng = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, k: int) -> list["RandomStateSampler"]:
        return [RandomStateSampler(self.dim, s) for s in self._seq.spawn(k)]

    def _count(self, k: int):
        self.draws += k

    def simplex_probabilities(self, size: int | None = None) -> np.ndarray:
        """Point on the probability simplex: i.i.d. Exp(1) variables normalized to sum one."""
        shape = (self.dim,) if size is None else (size, self.dim)
        self._count(1 if size is None else size)
        y = self._rng.exponential(1.0, size=shape)
        return y / y.sum(axis=-1, keepdims=True)

    def haar_vector(self, size: int | None = None, method: str = "gaussian") -> np.ndarray:
        """Uniformly random unit vector(s) in C^n.

        ``"gaussian"`` normalizes a standard complex Gaussian vector;
        ``"simplex"`` draws squared moduli from the exponential simplex law
        and attaches independent uniform phases. Both have the same law.
        """
        shape = (self.dim,) if size is None else (size, self.dim)
        self._count(1 if size is None else size)
        if method == "gaussian":
            z = self._rng.standard_normal(shape) + 1j * self._rng.standard_normal(shape)
            return z / np.linalg.norm(z, axis=-1, keepdims=True)
        if method == "simplex":
            y = self._rng.exponential(1.0, size=shape)
            sigma = y / y.sum(axis=-1, keepdims=True)
            phase = np.exp(2j * np.pi * self._rng.random(shape))
            return np.sqrt(sigma) * phase
        raise ValueError(f"unknown method {method!r}")

    def sample_haar_pure(self, method: str = "gaussian") -> np.ndarray:
        v = self.haar_vector(method=method)
        return np.outer(v, v.conj())

    def haar_unitary(self, size: int | None = None) -> np.ndarray:
        """Haar unitary via QR of a complex Ginibre matrix with the R-diagonal phases removed."""
        n = self.dim
        shape = (n, n) if size is None else (size, n, n)
        self._count(1 if size is None else size)
        z = (self._rng.standard_normal(shape) + 1j * self._rng.standard_normal(shape)) / np.sqrt(2)
        q, r = np.linalg.qr(z)
        d = np.diagonal(r, axis1=-2, axis2=-1)
        ph = d / np.abs(d)
        return q * ph[..., None, :]

    def sample_product_mixed(self, g: np.ndarray) -> np.ndarray:
        u = self.haar_unitary()
        rho = u @ g @ u.conj().T
        return 0.5 * (rho + rho.conj().T)

    def random_spectrum_state(self) -> np.ndarray:
        """Diagonal density operator with simplex-distributed eigenvalues."""
        return np.diag(self.simplex_probabilities()).astype(complex)


def _rotated_traces(sampler: RandomStateSampler, op: np.ndarray, g: np.ndarray, samples: int) -> np.ndarray:
    """Tr(op U g U^*) for `samples` independent Haar unitaries U."""
    out = np.empty(samples)
    done = 0
    while done < samples:
        k = min(_BATCH, samples - done)
        u = sampler.haar_unitary(size=k)
        # Tr(op U g U^*) = Tr(U^* op U g)
        rot = np.conj(np.transpose(u, (0, 2, 1))) @ op @ u
        out[done:done + k] = np.einsum("sjk,kj->s", rot, g).real
        done += k
    return out


def expected_trace_mc(sampler: RandomStateSampler, op: np.ndarray, g: np.ndarray,
                      samples: int = 100_000) -> McEstimate:
    """Monte Carlo estimate of E[Tr(op U g U^*)] over Haar U; the exact value is Tr(op)/n."""
    if samples < 100:
        raise ValueError("need at least 100 samples")
    return McEstimate.from_samples(_rotated_traces(sampler, np.asarray(op), np.asarray(g), samples))


def mc_detection_probability(povm: Povm, ensemble: UncertainEnsemble,
                             sampler: RandomStateSampler, samples: int = 100_000) -> McEstimate:
    """Monte Carlo mean of P_d with each unknown component drawn as U_i G_i U_i^*.

    Each message gets its own spawned stream; G_i has simplex-distributed
    eigenvalues and is redrawn per sample.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    p, q = ensemble.priors, ensemble.bounds
    known = np.einsum("ijk,ikj->i", povm.operators, ensemble.states).real
    total = np.full(samples, float(np.sum(p * q * known)))
    for i, sub in enumerate(sampler.spawn(ensemble.m)):
        if q[i] == 1.0:
            continue
        vals = np.empty(samples)
        done = 0
        while done < samples:
            k = min(_BATCH, samples - done)
            u = sub.haar_unitary(size=k)
            g = sub.simplex_probabilities(size=k)
            # Tr(Pi U diag(g) U^*) = sum_k g_k <u_k|Pi|u_k>
            diag = np.einsum("sjk,jl,slk->sk", u.conj(), povm.operators[i], u).real
            vals[done:done + k] = np.sum(diag * g, axis=1)
            done += k
        total += p[i] * (1 - q[i]) * vals
    return McEstimate.from_samples(total)
