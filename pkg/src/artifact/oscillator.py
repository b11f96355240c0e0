"""Harmonic-oscillator cooling.

Covers the Gaussian swap sequence on thermal modes, the non-Gaussian
two-level exchange ladder, and the generator of the cyclic mode permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

MAX_CYCLIC_N = 64
BRANCH_TOL = 1e-12


def _bose(x: float) -> float:
    return math.exp(-x) / -math.expm1(-x)


def _mode_entropy(n: float) -> float:
    # entropy of a thermal mode with mean occupation n
    if n <= 0:
        return 0.0
    return (n + 1) * math.log1p(n) - n * math.log(n)


@dataclass(frozen=True)
class GaussianMode:
    """Zero-mean thermal mode; the covariance is ``cov_scale`` times the identity."""

    omega: float
    cov_scale: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.cov_scale >= 1:
            raise ValueError("cov_scale must be at least 1")

    @classmethod
    def thermal(cls, beta: float, omega: float) -> "GaussianMode":
        return cls(omega, 1.0 / math.tanh(beta * omega / 2))

    @property
    def occupation(self) -> float:
        return (self.cov_scale - 1) / 2

    @property
    def energy(self) -> float:
        return self.omega * self.cov_scale / 2

    @property
    def entropy(self) -> float:
        return _mode_entropy(self.occupation)


@dataclass(frozen=True, eq=False)
class GaussianTrace:
    """Swap sequence on one target mode. ``occupations[0]`` is the initial
    mean occupation, ``occupations[n]`` the value after step n."""

    beta: float
    omega_S: float
    omegas: np.ndarray
    occupations: np.ndarray
    dE_S_steps: np.ndarray
    dE_M_steps: np.ndarray

    @property
    def n_steps(self) -> int:
        return int(self.dE_S_steps.size)

    @property
    def dE_S(self) -> float:
        return math.fsum(self.dE_S_steps)

    @property
    def dE_M(self) -> float:
        return math.fsum(self.dE_M_steps)

    @property
    def work(self) -> float:
        return self.dE_S + self.dE_M

    @property
    def cov_scales(self) -> np.ndarray:
        return 2 * self.occupations + 1

    @property
    def final_mode(self) -> GaussianMode:
        return GaussianMode(self.omega_S, float(self.cov_scales[-1]))

    @property
    def final_beta(self) -> float:
        n = self.occupations[-1]
        return math.log1p(1 / n) / self.omega_S

    @property
    def dS_tilde_S(self) -> float:
        return _mode_entropy(self.occupations[0]) - _mode_entropy(self.occupations[-1])

    @property
    def slack(self) -> float:
        return self.beta * self.dE_M - self.dS_tilde_S


def gaussian_swap_sequence(beta: float, omega_S: float, omega_max: float, N: int
                           ) -> GaussianTrace:
    """Swap a thermal target mode with N fresh thermal modes of frequency
    omega_S + n (omega_max - omega_S)/N, n = 1..N.

    Each swap hands the machine covariance to the target, so after step n the
    target occupation is that of the n-th machine mode.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not omega_S > 0:
        raise ValueError("omega_S must be positive")
    if not omega_max >= omega_S:
        raise ValueError("omega_max must be at least omega_S")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    w = omega_S + (omega_max - omega_S) * np.arange(N + 1) / N
    w[-1] = omega_max
    n = np.array([_bose(beta * x) for x in w])
    dE_S = omega_S * np.diff(n)
    dE_M = w[1:] * (n[:-1] - n[1:])
    return GaussianTrace(beta, omega_S, w, n, dE_S, dE_M)


# ---------------------------------------------------------------- ladder

def _ladder_tails(x: float, K: int) -> tuple[float, float]:
    """Mass and machine-energy weight (in units of omega) above total quantum number K."""
    mass, en = [], []
    k = K + 1
    c = (1 - x) ** 2
    while True:
        p = c * x**k
        mass.append((k + 1) * p)
        en.append(0.5 * k * (k + 1) * (k + 2) * p)
        if en[-1] < 1e-18 * max(1.0, math.fsum(en)) or p == 0.0:
            break
        k += 1
    return math.fsum(mass), math.fsum(en)


def ladder_required_K(beta: float, omega: float, tail: float = 1e-12) -> int:
    """Smallest K whose mass and energy tails are both below ``tail``."""
    x = math.exp(-beta * omega)
    # geometric decay: start from a lower estimate and walk up
    K = max(1, int(math.log(tail) / math.log(x)) - 1) if x > 0 else 1
    K = max(1, min(K, 10))
    while True:
        m, e = _ladder_tails(x, K)
        if m < tail and e < tail:
            return K
        K += max(1, K // 8)


@dataclass(frozen=True)
class LadderResult:
    K: int
    ground_pop: float
    dE_M_over_omega: float
    beta_dE_M_minus_dS: float
    exchanges: int
    tail_mass: float
    history: np.ndarray | None = field(default=None, repr=False)


def nongaussian_ladder(beta: float, omega: float, K: int | None = None, tail: float = 1e-12,
                       max_exchanges: int | None = None, record: bool = False) -> LadderResult:
    """Greedy two-level exchanges that move the largest joint eigenvalues of
    two identical thermal oscillators into the target ground subspace.

    Joint states with k total quanta share eigenvalue x^k (1-x)^2, x = e^{-beta omega};
    k of them have the target excited. Ground slot l (machine in |l>) takes
    the largest excited eigenvalue below it whenever that one is larger.
    Everything is tracked as counts per k. The target is taken as pure at the
    end, up to the discarded tail above K.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not omega > 0:
        raise ValueError("omega must be positive")
    need = ladder_required_K(beta, omega, tail)
    if K is None:
        K = need
    elif K < need:
        raise ValueError(f"K={K} leaves a tail above {tail}; need K >= {need}")
    x = math.exp(-beta * omega)
    n_slots = (K + 1) * (K + 2) // 2
    p = (1 - x) ** 2 * x ** np.arange(K + 1, dtype=float)
    # excited-target states per total quantum number
    pool = np.arange(K + 1, dtype=np.int64)
    # k held by each ground slot; -1 marks a slot above the truncation
    slot = np.where(np.arange(n_slots) <= K, np.arange(n_slots), -1)
    ground = math.fsum(p)
    hist = [ground] if record else None
    done = 0
    kmin = 1
    for l in range(1, n_slots):
        if max_exchanges is not None and done >= max_exchanges:
            break
        while kmin <= K and pool[kmin] == 0:
            kmin += 1
        if kmin > K or kmin >= l:
            continue
        pool[kmin] -= 1
        if slot[l] >= 0:
            pool[slot[l]] += 1
            ground -= p[slot[l]]
        ground += p[kmin]
        slot[l] = kmin
        done += 1
        if record:
            hist.append(ground)
    held = np.where(slot >= 0, p[np.maximum(slot, 0)], 0.0)
    e_final = math.fsum(np.arange(n_slots) * held)
    n_init = x / (1 - x)
    dE = e_final - n_init
    S_init = _mode_entropy(n_init)
    tail_mass, _ = _ladder_tails(x, K)
    return LadderResult(K, math.fsum(held), dE, beta * omega * dE - S_init, done, tail_mass,
                        np.array(hist) if record else None)


def ladder_cost_closed_form(beta: float, omega: float) -> float:
    """Machine energy increase over omega for the fully executed ladder."""
    x = math.exp(-beta * omega)
    return x * (2 + x) / (1 - x) ** 2


def ladder_normalisation(beta: float, omega: float, K: int) -> float:
    x = math.exp(-beta * omega)
    k = np.arange(K + 1)
    return math.fsum((k + 1) * x**k * (1 - x) ** 2)


# ---------------------------------------------------------------- cyclic generator

@dataclass(frozen=True, eq=False)
class CompiledHamiltonian:
    """Generator of the cyclic mode map a -> i b_1, b_k -> -b_{k+1}, b_N -> i a.

    ``A`` satisfies expm(-i A) = alpha. ``h`` is the coefficient matrix on
    (a, b_1..b_N, a^dag, b_1^dag..b_N^dag) with expm(-i K h) = S^T, where
    S = diag(alpha, conj(alpha)) and K = diag(1, -1).
    """

    N: int
    alpha: np.ndarray
    eigenvalues: np.ndarray
    V: np.ndarray
    A: np.ndarray
    h: np.ndarray
    symmetrization_defect: float
    permutation_error: float
    branch_cut: tuple[int, ...]


def cyclic_alpha(N: int) -> np.ndarray:
    a = np.zeros((N + 1, N + 1), dtype=complex)
    a[0, N] = 1j
    a[1, 0] = 1j
    for k in range(1, N):
        a[k + 1, k] = -1
    return a


def compile_cyclic_hamiltonian(N: int) -> CompiledHamiltonian:
    if int(N) != N or not 1 <= N <= MAX_CYCLIC_N:
        raise ValueError(f"N must be an integer in [1, {MAX_CYCLIC_N}]")
    N = int(N)
    n = N + 1
    k = np.arange(1, n + 1)
    lam = -np.exp(-1j * np.pi * (2 * k - 1) / n)
    rows = np.arange(1, n + 1)[:, None]
    V = -(-lam[None, :]) ** (-rows.astype(float)) / math.sqrt(n)
    V[0, :] *= 1j
    branch = tuple(int(i) for i in k[np.abs(lam + 1) < BRANCH_TOL])
    # principal branch: arg in (-pi, pi]
    A = -(V * np.angle(lam)) @ V.conj().T
    defect = float(np.max(np.abs(A - A.conj().T)))
    A = (A + A.conj().T) / 2
    alpha = cyclic_alpha(N)
    h = sla.block_diag(A.T, A)
    Kmat = np.diag(np.r_[np.ones(n), -np.ones(n)])
    S = sla.block_diag(alpha, alpha.conj())
    err = float(np.max(np.abs(sla.expm(-1j * Kmat @ h) - S.T)))
    return CompiledHamiltonian(N, alpha, lam, V, A, h, defect, err, branch)


def cyclic_A_sum(N: int) -> np.ndarray:
    """Entry-wise finite sum for A (1-based j, k in the phase factors)."""
    n = N + 1
    p = np.arange(1, n + 1)
    j = np.arange(1, n + 1)
    diff = j[:, None] - j[None, :]
    ph = np.exp(-1j * np.pi * np.multiply.outer(diff, 2 * p - 1) / n)
    s = (ph * (2 * p - 2 - N)).sum(axis=-1) * np.pi / n**2
    first = (j == 1)
    return -(1j ** first)[:, None] * ((-1j) ** first)[None, :] * s


def cyclic_A_limit(size: int) -> np.ndarray:
    """Large-N limit of the leading ``size`` x ``size`` block of A."""
    j = np.arange(1, size + 1)
    diff = (j[:, None] - j[None, :]).astype(float)
    first = (j == 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = -1j * (1j ** first)[:, None] * ((-1j) ** first)[None, :] / diff
    np.fill_diagonal(L, 0)
    return L
