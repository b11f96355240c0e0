"""Coherent-control cooling: swaps, diverging-time sequences, max-cooling
permutations and the degeneracy-doubling machine family."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

from .spectra import (
    DiagonalState,
    NumericalError,
    PermutationUnitary,
    ProductSpace,
    Spectrum,
    energy,
    entropy,
    marginal,
    thermal_state,
)

SERIES_TOL = 1e-16
SERIES_CAP = 10**6
FLOOR_TOL = 1e-12


# ---------------------------------------------------------------- traces

@dataclass(frozen=True)
class StepRecord:
    n: int
    dE_S: float
    dE_M: float
    rho_S: DiagonalState


@dataclass(frozen=True, eq=False)
class ProtocolTrace:
    """Per-step energy changes of a sequential protocol.

    ``probs[0]`` is the initial system state and ``probs[n]`` the state after
    step ``n``. Arrays are indexed by step, starting at step 1.
    """

    beta: float
    H_S: Spectrum
    dE_S_steps: np.ndarray
    dE_M_steps: np.ndarray
    probs: np.ndarray

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

    def state(self, n: int) -> DiagonalState:
        return DiagonalState.from_probs(self.probs[n])

    @property
    def final_state(self) -> DiagonalState:
        return self.state(self.n_steps)

    @property
    def dS_tilde_S(self) -> float:
        return entropy(self.state(0)) - entropy(self.final_state)

    @property
    def slack(self) -> float:
        """beta * dE_M minus the entropy decrease of the target."""
        return self.beta * self.dE_M - self.dS_tilde_S

    @property
    def steps(self) -> list[StepRecord]:
        return [StepRecord(n + 1, float(self.dE_S_steps[n]), float(self.dE_M_steps[n]),
                           self.state(n + 1)) for n in range(self.n_steps)]


def _thermal_rows(H: Spectrum, betas: np.ndarray) -> np.ndarray:
    w = -np.outer(betas, H.energies)
    return np.exp(w - logsumexp(w, axis=1, keepdims=True))


# ---------------------------------------------------------------- swaps

@dataclass(frozen=True)
class SwapResult:
    rho_S: DiagonalState
    cost: float
    dE_S: float
    dE_M: float
    lower_bound: float


def single_swap_protocol(H_S: Spectrum, beta: float, omega_M: float) -> SwapResult:
    """Swap a thermal target with one thermal machine of gap ``omega_M``.

    The machine is ``omega_M * diag(0, .., d-1)`` at the same temperature.
    """
    if H_S.is_compressed:
        raise ValueError("explicit system spectrum required")
    if omega_M < H_S.max_energy:
        raise ValueError("omega_M must be at least the largest system energy")
    d = H_S.n_levels
    H_M = Spectrum(omega_M * np.arange(d))
    rho_S, rho_M = thermal_state(H_S, beta), thermal_state(H_M, beta)
    new_S = DiagonalState(rho_M.log_probs)
    new_M = DiagonalState(rho_S.log_probs)
    dE_S = energy(new_S, H_S) - energy(rho_S, H_S)
    dE_M = energy(new_M, H_M) - energy(rho_M, H_M)
    lb = 0.0
    if d > 1:
        lb = (rho_S.probs[1] - rho_M.probs[1]) * (omega_M - H_S.energies[1])
    return SwapResult(new_S, dE_S + dE_M, dE_S, dE_M, float(lb))


def linear_sequence_protocol(H_S: Spectrum, beta: float, beta_max: float, N: int
                             ) -> ProtocolTrace:
    """N swaps with fresh machines ``(1 + n eps) H_S``, eps = (beta_max - beta)/(N beta).

    After step n the target is thermal at ``beta (1 + n eps)``.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not beta_max > beta:
        raise ValueError("beta_max must exceed beta")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    if H_S.is_compressed:
        raise ValueError("explicit system spectrum required")
    N = int(N)
    eps = (beta_max - beta) / (N * beta)
    scale = 1.0 + eps * np.arange(N + 1)
    betas = beta * scale
    betas[-1] = beta_max
    P = _thermal_rows(H_S, betas)
    E = P @ H_S.energies
    dE_S = np.diff(E)
    dE_M = scale[1:] * (E[:-1] - E[1:])
    # step n cannot push the smallest eigenvalue below e^{-beta w_max} times its old value
    lam = P.min(axis=1)
    floor = np.exp(-beta * scale[1:] * H_S.max_energy) * lam[:-1]
    if np.any(lam[1:] < floor - FLOOR_TOL):
        raise NumericalError("purity floor violated in linear sequence")
    return ProtocolTrace(beta, H_S, dE_S, dE_M, P)


def _mean_excitation(beta_omega: float, d: float) -> float:
    """Mean level index of a d-level ladder with Boltzmann ratio e^{-beta_omega}."""
    n = _bose(beta_omega)
    if not math.isinf(d):
        n -= d * _bose(d * beta_omega)
    return n


def _bose(x: float) -> float:
    # 1/(e^x - 1) without overflow for large x
    return math.exp(-x) / -math.expm1(-x)


def _ramp_term(c: float, a: float, b: float) -> float:
    # integral of (a - w) d(e^{-c w}) from a to b
    return (a - b) * math.exp(-c * b) - math.expm1(-c * (b - a)) * math.exp(-c * a) / c


def _ramp_series(beta: float, a: float, b: float, d: float) -> float:
    total = 0.0
    for k in range(1, SERIES_CAP + 1):
        t = _ramp_term(k * beta, a, b)
        if not math.isinf(d):
            t -= d * _ramp_term(d * k * beta, a, b)
        total += t
        if abs(t) < SERIES_TOL * max(1.0, abs(total)):
            return total
    raise NumericalError(f"series did not converge within {SERIES_CAP} terms")


def equally_spaced_cost(d: int | float, beta: float, omega_S: float, omega_max: float,
                        N: int | float | None = None) -> float:
    """Total work (system plus machine energy change) to cool an equally spaced
    d-level target from gap ``omega_S`` to effective gap ``omega_max``.

    Machine gaps run over ``omega_S + alpha (omega_max - omega_S)/N``. ``N=None``
    or ``inf`` evaluates the continuum limit as a series in ``e^{-k beta w}``.
    ``d`` may be ``inf`` (harmonic oscillator).
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not (d >= 2):
        raise ValueError("d must be at least 2")
    if not omega_S > 0 or omega_max < omega_S:
        raise ValueError("need 0 < omega_S <= omega_max")
    if omega_max == omega_S:
        return 0.0
    if N is None or math.isinf(N):
        w = _ramp_series(beta, omega_S, omega_max, d)
    else:
        if int(N) != N or N < 1:
            raise ValueError("N must be a positive integer")
        gaps = omega_S + (omega_max - omega_S) * np.arange(int(N) + 1) / int(N)
        n = np.array([_mean_excitation(beta * g, d) for g in gaps])
        w = math.fsum((omega_S - gaps[1:]) * np.diff(n))
    if w < 0:
        if w < -1e-14:
            raise NumericalError(f"negative work {w}")
        w = 0.0
    return w


def equally_spaced_landauer(d: int | float, beta: float, omega_S: float, omega_max: float
                            ) -> float:
    """Continuum limit as a free-energy difference: dS_tilde/beta + dE_S."""
    def logZ(g):
        z = -math.log(-math.expm1(-beta * g))
        if not math.isinf(d):
            z += math.log(-math.expm1(-d * beta * g))
        return z
    n_max = _mean_excitation(beta * omega_max, d)
    return ((logZ(omega_S) - logZ(omega_max)) / beta
            - omega_max * n_max + omega_S * n_max)


def binary_entropy(q: float) -> float:
    """Entropy in nats of a qubit with excited population q."""
    if q <= 0 or q >= 1:
        return 0.0
    return -q * math.log(q) - (1 - q) * math.log1p(-q)


@dataclass(frozen=True)
class QubitSequenceResult:
    gaps: np.ndarray
    populations: np.ndarray
    dE_S: float
    dE_M: float

    @property
    def p_final(self) -> float:
        return float(self.populations[-1])

    @property
    def dS_tilde_S(self) -> float:
        return binary_entropy(self.populations[0]) - binary_entropy(self.populations[-1])

    def excess(self, beta: float) -> float:
        """beta * dE_M minus the entropy decrease of the target."""
        return beta * self.dE_M - self.dS_tilde_S


def qubit_swap_sequence(gaps: Sequence[float], beta: float, p_excited: float = 0.5,
                        omega_S: float = 0.0) -> QubitSequenceResult:
    """Swap a qubit target with thermal machine qubits of the given gaps in turn.

    The target starts with excited population ``p_excited``; ``omega_S = 0``
    is a degenerate target, for which only the machine energy changes.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    g = np.asarray(gaps, dtype=float)
    if g.ndim != 1 or g.size == 0 or np.any(g < 0):
        raise ValueError("gaps must be a non-empty list of non-negative energies")
    q = np.exp(-beta * g) / (1 + np.exp(-beta * g))
    pops = np.concatenate(([p_excited], q))
    dE_M = math.fsum(g * (pops[:-1] - pops[1:]))
    dE_S = omega_S * (pops[-1] - pops[0])
    return QubitSequenceResult(g, pops, dE_S, dE_M)


# ---------------------------------------------------------------- max cooling

@dataclass(frozen=True)
class MaxCoolResult:
    U: PermutationUnitary
    rho_S: DiagonalState
    rho_M: DiagonalState


def max_cool_permutation(joint: DiagonalState, space: ProductSpace | Sequence[int]
                         ) -> MaxCoolResult:
    """Place the global eigenvalues in nonincreasing order along the
    system-major, machine-minor basis order.

    Equal eigenvalues keep their relative index order, so an already
    ordered input maps to the identity.
    """
    space = space if isinstance(space, ProductSpace) else ProductSpace(space)
    if space.n_factors != 2:
        raise ValueError("expected a bipartite system-machine space")
    joint = joint.expanded()
    if joint.dim != space.dim:
        raise ValueError("state does not match space")
    order = np.argsort(-joint.log_probs, kind="stable")
    mapping = np.empty(space.dim, dtype=np.int64)
    mapping[order] = np.arange(space.dim)
    U = PermutationUnitary(mapping, space)
    lp = np.empty_like(joint.log_probs)
    lp[mapping] = joint.log_probs
    out = DiagonalState(lp, check=False)
    return MaxCoolResult(U, marginal(out, space, 0), marginal(out, space, 1))


# ---------------------------------------------------------------- degeneracy-doubling machine

@dataclass(frozen=True)
class RWMachine:
    N: int
    epsilon: float
    beta: float
    gap: float
    spectrum: Spectrum

    @property
    def dim(self) -> int:
        return 2 ** (self.N + 1)


def _rw_eps(N: int, theta: float) -> float:
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    eps = theta / N
    if not 0 < eps < 1:
        raise ValueError(f"epsilon = theta/N = {eps} must lie in (0, 1)")
    return eps


def rw_machine(N: int, theta: float, beta: float = 1.0) -> RWMachine:
    """Equally spaced machine with level n carrying 2^n states (top level 2^N + 1),
    gap chosen so that e^{-beta gap} = (1 - eps)/2."""
    eps = _rw_eps(N, theta)
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    gap = math.log(2.0 / (1.0 - eps)) / beta
    mults = [2**n for n in range(N)] + [2**N + 1]
    return RWMachine(int(N), eps, beta, gap, Spectrum(gap * np.arange(N + 1), mults))


def halving_segments(counts: Sequence[int]) -> Iterator[tuple[int, int, int, int]]:
    """Split slot range [0, d) of a run-length list into pieces on which the
    run index of slot i, of slot i//2 and of slot d/2 + i//2 are all constant.
    No piece straddles d/2.

    Yields (length, run(i), run(i//2), run(d/2 + i//2)). Counts may be huge
    Python ints; the number of pieces is linear in ``len(counts)``.
    """
    ends = []
    acc = 0
    for c in counts:
        acc += int(c)
        ends.append(acc)
    d = acc
    if d % 2:
        raise ValueError("total dimension must be even")
    h = d // 2
    cuts = {0, h, d}
    for b in ends[:-1]:
        cuts.add(b)
        if 2 * b < d:
            cuts.add(2 * b)
        if b > h:
            cuts.add(2 * (b - h))
    cuts = sorted(cuts)

    def run(j):
        return bisect.bisect_right(ends, j)

    for s, e in zip(cuts[:-1], cuts[1:]):
        yield e - s, run(s), run(s // 2), run(h + s // 2)


@dataclass(frozen=True)
class RWResult:
    N: int
    theta: float
    epsilon: float
    modified: bool
    p0_final: float
    one_minus_p0: float
    beta_dE_M: float

    @property
    def dS_tilde_S(self) -> float:
        """ln 2 minus the binary entropy of the final target."""
        q = self.one_minus_p0
        h = -math.log1p(-q) * (1.0 - q) - (q * math.log(q) if q > 0 else 0.0)
        return math.log(2.0) - h

    @property
    def excess(self) -> float:
        return self.beta_dE_M - self.dS_tilde_S


def rw_protocol(N: int, theta: float, modified: bool = True) -> RWResult:
    """Max-cool a maximally mixed qubit with the degeneracy-doubling machine.

    Runs in compressed form: every quantity is a sum over O(N) runs of
    equal eigenvalues, with run lengths held as exact integers. ``modified``
    treats the single extra top-level state as the most populated slot.
    """
    eps = _rw_eps(N, theta)
    N = int(N)
    log_r = math.log1p(-eps) - math.log(2.0)
    beta_gap = -log_r
    if modified:
        runs = [(N, 1), (0, 1)] + [(n, 2**n) for n in range(1, N + 1)]
    else:
        runs = [(n, 2**n) for n in range(N)] + [(N, 2**N + 1)]
    levels = np.array([lv for lv, _ in runs], dtype=float)
    counts = [c for _, c in runs]
    log_c = np.array([math.log(c) for c in counts])
    log_lam = levels * log_r
    log_lam -= logsumexp(log_lam + log_c)

    d = sum(counts)
    h = d // 2
    # initial and final mean machine level, piece by piece
    init_terms = []
    fin_terms = []
    for length, ri, ra, rb in halving_segments(counts):
        lv = levels[ri]
        if lv == 0:
            continue
        lc = math.log(length) + math.log(lv)
        init_terms.append(math.exp(lc + log_lam[ri]))
        fin_terms.append(0.5 * (math.exp(lc + log_lam[ra]) + math.exp(lc + log_lam[rb])))
    mean_delta = math.fsum(fin_terms) - math.fsum(init_terms)

    # mass left outside the target ground block: slots h..d-1 of the machine order
    tail = []
    pos = 0
    for k, c in enumerate(counts):
        lo, hi = pos, pos + c
        pos = hi
        if hi <= h:
            continue
        n_in = hi - max(lo, h)
        tail.append(math.exp(math.log(n_in) + log_lam[k]))
    q = math.fsum(tail)
    return RWResult(N, float(theta), eps, bool(modified), 1.0 - q, q, beta_gap * mean_delta)


# ---------------------------------------------------------------- structural helpers

def truncate_machine(H_M: Spectrum, m: int, beta: float) -> Spectrum:
    """Keep levels 0..m and lump the rest into one level of the same Gibbs weight.

    The lumped level may sit below level m, so the result is unordered.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not 0 <= m < H_M.n_levels - 1:
        raise ValueError("m must leave a non-empty tail")
    lm = H_M.log_multiplicities
    tail = logsumexp(-beta * H_M.energies[m + 1:] + lm[m + 1:])
    e = np.append(H_M.energies[:m + 1], -tail / beta)
    mults = None
    if H_M.multiplicities is not None:
        mults = list(H_M.multiplicities[:m + 1]) + [1]
    return Spectrum(e, mults, ordered=False)


def compose_steps(steps: Sequence[PermutationUnitary]) -> PermutationUnitary:
    """Collapse a chronological list of steps into one permutation (last step outermost)."""
    if not steps:
        raise ValueError("no steps to compose")
    U = steps[0]
    for V in steps[1:]:
        if V.space != U.space:
            raise ValueError("steps act on different spaces")
        U = V.compose(U)
    return U
