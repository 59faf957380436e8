"""Continuous-time quantum walk on a cycle and its time-averaged mixing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import averaging_kernel


@dataclass(frozen=True)
class CycleWalk:
    """Walk with Hamiltonian a S + conj(a) S^dagger on an N-cycle (S|l> = |l+1>)."""

    N: int
    a: complex = 0.5

    def __post_init__(self):
        if self.N < 2 or self.N % 2:
            raise ValueError(f"cycle length must be even and >= 2, got {self.N}")

    @property
    def r(self) -> float:
        return abs(self.a)

    @property
    def phi(self) -> float:
        return float(np.angle(self.a))

    def shift(self) -> np.ndarray:
        return np.roll(np.eye(self.N), 1, axis=0)

    def hamiltonian(self) -> np.ndarray:
        s = self.shift()
        return self.a * s + np.conj(self.a) * s.T


def eigenvalues(w: CycleWalk) -> np.ndarray:
    """2 r cos(phi + 2 pi k / N), k = 0..N-1."""
    k = np.arange(w.N)
    return 2 * w.r * np.cos(w.phi + 2 * np.pi * k / w.N)


def averaged_distribution(w: CycleWalk, start: int = 0, T: float | None = None) -> np.ndarray:
    """Site distribution of the walk started at ``start``, averaged over [0, T].

    Works in the Fourier basis: plane wave ``k`` has amplitude
    ``exp(2 pi i k l / N) / sqrt(N)`` on site ``l`` and energy
    ``2 r cos(phi - 2 pi k / N)``.  ``T=None`` gives the infinite-time limit.
    """
    if not 0 <= start < w.N:
        raise ValueError(f"start site {start} outside 0..{w.N - 1}")
    N = w.N
    k = np.arange(N)
    energy = 2 * w.r * np.cos(w.phi - 2 * np.pi * k / N)
    kernel = averaging_kernel(energy, T)
    # P(l) = N^-2 sum_{k,k'} K_{kk'} omega^{(k-k')(l-start)}
    diff = (k[:, None] - k[None, :]) % N
    coeff = np.bincount(diff.ravel(), weights=kernel.real.ravel(), minlength=N) + 1j * np.bincount(
        diff.ravel(), weights=kernel.imag.ravel(), minlength=N
    )
    # coeff[d] collects sum over pairs with k - k' = d; P(l) = N^-2 sum_d coeff[d] omega^{d l}
    probs = np.real(np.fft.ifft(coeff) * N) / N**2
    probs = np.roll(probs, start)
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def averaged_distribution_dense(w: CycleWalk, start: int = 0, T: float | None = None) -> np.ndarray:
    """Reference path through a dense Hermitian eigendecomposition."""
    lam, q = np.linalg.eigh(w.hamiltonian())
    psi = np.zeros(w.N, dtype=complex)
    psi[start] = 1.0
    coef = q.conj().T @ psi
    rho = q @ (np.outer(coef, coef.conj()) * averaging_kernel(lam, T)) @ q.conj().T
    return np.real(np.diag(rho))


def uniform(N: int) -> np.ndarray:
    return np.full(N, 1.0 / N)


def tv_distance(P, Q) -> float:
    P, Q = np.asarray(P, dtype=float), np.asarray(Q, dtype=float)
    if P.shape != Q.shape:
        raise ValueError(f"distributions have different supports: {P.shape} vs {Q.shape}")
    return 0.5 * float(np.sum(np.abs(P - Q)))


def fourier_mixing_bound(R) -> float:
    """(1/4) sum_{m != 0} |R_hat(m)|^2, which bounds TV(R, uniform)**2."""
    r_hat = np.fft.fft(np.asarray(R, dtype=float))
    return 0.25 * float(np.sum(np.abs(r_hat[1:]) ** 2))


def mixing_time(N: int, delta: float, eps: float) -> float:
    """Waiting time after which the averaged walk is delta-close to uniform."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < eps <= 0.5:
        raise ValueError(f"eps must lie in (0, 1/2], got {eps}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    gap = math.sin((delta / 7) ** 2)
    return 16 * N / (gap**2 * delta * eps) * math.log(2 * N / gap)


@dataclass(frozen=True)
class MixingReport:
    N: int
    a: complex
    delta: float
    eps: float
    T: float | None
    tv: float
    bound: float
    degenerate: bool

    @property
    def satisfied(self) -> bool:
        return not self.degenerate and self.tv <= self.delta


def verify_mixing(w: CycleWalk, delta: float, eps: float) -> MixingReport:
    """Average the walk for the prescribed time and compare TV against delta."""
    if w.r == 0:
        dist = averaged_distribution(w, 0, None)
        tv = tv_distance(dist, uniform(w.N))
        return MixingReport(w.N, w.a, delta, eps, None, tv, fourier_mixing_bound(dist), True)
    T = mixing_time(w.N, delta, eps)
    dist = averaged_distribution(w, 0, T)
    tv = tv_distance(dist, uniform(w.N))
    return MixingReport(w.N, w.a, delta, eps, T, tv, fourier_mixing_bound(dist), False)
