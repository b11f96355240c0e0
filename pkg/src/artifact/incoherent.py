"""Heat-engine cooling with energy-conserving exchanges.

The machine is split into a cold part at ``beta`` and a hot part at
``beta_H``. After every exchange both machine parts are put back into
their thermal states; the heat drawn from the hot bath is the energy needed
to do so for the hot part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .spectra import (
    DiagonalState,
    NumericalError,
    ProductSpace,
    Spectrum,
    joint_energies,
    log_partition,
    relative_entropy,
    thermal_state,
)

DEGENERACY_RTOL = 1e-9
STEP_CAP = 10**7


@dataclass(frozen=True)
class EngineConfig:
    beta: float
    beta_H: float
    beta_star: float
    N: int
    delta: float | None = None

    def __post_init__(self):
        if not self.beta > 0 or math.isinf(self.beta):
            raise ValueError("beta must be positive and finite")
        if not 0 <= self.beta_H < self.beta:
            raise ValueError("need 0 <= beta_H < beta")
        if not self.beta_star >= self.beta or math.isinf(self.beta_star):
            raise ValueError("need finite beta_star >= beta")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    @property
    def eta(self) -> float:
        return 1.0 - self.beta_H / self.beta

    @property
    def delta_used(self) -> float:
        return 1.0 / self.N**2 if self.delta is None else self.delta


@dataclass(frozen=True)
class VirtualQubit:
    N_V: float
    omega_eff: float
    gibbs_ratio: float


def _qubit_pops(beta: float, omega: float) -> tuple[float, float]:
    # (ground, excited) of a thermal qubit
    e = float(expit(-beta * omega))
    return 1.0 - e, e


def virtual_qubit_params(beta: float, beta_H: float, omega_C: float, omega_H: float
                         ) -> VirtualQubit:
    """Norm, effective gap and Gibbs ratio of the |0_C 1_H>, |1_C 0_H> pair."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not 0 <= beta_H <= beta:
        raise ValueError("need 0 <= beta_H <= beta; a hotter cold bath cannot cool")
    if not omega_C > omega_H >= 0:
        raise ValueError("need omega_C > omega_H >= 0")
    c0, c1 = _qubit_pops(beta, omega_C)
    h0, h1 = _qubit_pops(beta_H, omega_H)
    return VirtualQubit(c0 * h1 + c1 * h0, omega_C - beta_H / beta * omega_H,
                        math.exp(-beta * omega_C + beta_H * omega_H))


@dataclass(frozen=True)
class ExchangeResult:
    state: DiagonalState
    dp: float
    dE: tuple[float, float, float]


def ec_exchange_step(joint: DiagonalState, spectra: Sequence[Spectrum],
                     pair: tuple[int, int]) -> ExchangeResult:
    """Swap the populations of two degenerate joint basis states of S x C x H.

    ``dp`` is source minus target population; ``dE`` lists the energy
    change of each factor, the hot one fixed so that the three sum to zero.
    """
    spectra = [h.expanded() for h in spectra]
    space = ProductSpace([h.dim for h in spectra])
    if joint.dim != space.dim:
        raise ValueError("state does not match spectra")
    s, t = (int(x) for x in pair)
    E = joint_energies(*spectra)
    if abs(E[s] - E[t]) > DEGENERACY_RTOL * max(abs(E[s]), abs(E[t]), 1.0):
        raise ValueError(f"indices {s} and {t} are not degenerate ({E[s]} vs {E[t]})")
    lp = np.array(joint.expanded().log_probs)
    dp = math.exp(lp[s]) - math.exp(lp[t])
    lp[s], lp[t] = lp[t], lp[s]
    fs, ft = space.factors(s), space.factors(t)
    dE_S = dp * (spectra[0].energies[ft[0]] - spectra[0].energies[fs[0]])
    dE_C = dp * (spectra[1].energies[ft[1]] - spectra[1].energies[fs[1]])
    return ExchangeResult(DiagonalState(lp, check=False), dp, (dE_S, dE_C, -(dE_S + dE_C)))


def nogo_ceiling(H_S: Spectrum, i_star: int, d_C: float, d_H: float, beta: float) -> float:
    """Largest ground population one energy-conserving interaction can reach."""
    if not 1 <= i_star < H_S.n_levels:
        raise ValueError("i_star must index an excited level")
    if math.isinf(d_C) or math.isinf(d_H):
        return 1.0
    lz = log_partition(H_S, beta)
    return -math.expm1(-2 * beta * H_S.energies[i_star] - lz - math.log(d_C * d_H))


def _free_energy_qubit(q: float, omega: float, beta: float) -> float:
    s = 0.0
    for x in (q, 1.0 - q):
        if x > 0:
            s += x * math.log(x)
    return q * omega + s / beta


# ---------------------------------------------------------------- qubit engine

@dataclass(frozen=True)
class StageRecord:
    n: int
    omega_C: float
    omega_H: float
    N_V: float
    m: int
    q: float
    p: float
    heat: float


@dataclass(frozen=True)
class EngineResult:
    cfg: EngineConfig
    omega_S: float
    theta: float
    p0: float
    stages: list[StageRecord] = field(repr=False)

    @property
    def p_final(self) -> float:
        return self.stages[-1].p if self.stages else self.p0

    @property
    def q_star(self) -> float:
        return _qubit_pops(self.cfg.beta_star, self.omega_S)[1]

    @property
    def heat(self) -> float:
        return math.fsum(s.heat for s in self.stages)

    @property
    def ops(self) -> int:
        return sum(s.m for s in self.stages)

    @property
    def dF(self) -> float:
        b = self.cfg.beta
        return _free_energy_qubit(self.p_final, self.omega_S, b) - \
            _free_energy_qubit(self.p0, self.omega_S, b)

    @property
    def dF_ideal(self) -> float:
        b = self.cfg.beta
        return _free_energy_qubit(self.q_star, self.omega_S, b) - \
            _free_energy_qubit(self.p0, self.omega_S, b)

    @property
    def excess(self) -> float:
        """eta * heat drawn minus the free-energy change actually achieved."""
        return self.cfg.eta * self.heat - self.dF

    @property
    def population_bound(self) -> float:
        return self.cfg.delta_used * self.cfg.N

    @property
    def excess_bound(self) -> float:
        c = self.cfg
        return self.omega_S * (c.beta_star - c.beta) / (c.beta - c.beta_H) * (1.0 / c.N + c.delta_used)

    @property
    def ops_bound(self) -> float:
        c = self.cfg
        return c.N * (4 * math.log(1 / c.delta_used)
                      * math.exp(self.omega_S * (c.beta_star - c.beta_H) / c.eta) + 1)


def qubit_engine_protocol(cfg: EngineConfig, omega_S: float) -> EngineResult:
    """Staged cooling of a thermal qubit through virtual qubits of growing gap.

    Stage n uses a cold qubit of gap omega_S + n theta and a hot qubit of gap
    n theta, repeated m_n times so the distance to the stage fixed point
    shrinks by at least delta.
    """
    if not omega_S > 0:
        raise ValueError("omega_S must be positive")
    b, bh, N = cfg.beta, cfg.beta_H, int(cfg.N)
    theta = omega_S / N * (cfg.beta_star - b) / (b - bh)
    p = _qubit_pops(b, omega_S)[1]
    p0 = p
    stages = []
    if theta == 0:
        return EngineResult(cfg, omega_S, 0.0, p0, stages)
    log_delta = math.log(cfg.delta_used)
    for n in range(1, N + 1):
        wC, wH = omega_S + n * theta, n * theta
        c0, c1 = _qubit_pops(b, wC)
        h0, h1 = _qubit_pops(bh, wH)
        nv = c0 * h1 + c1 * h0
        q = c1 * h0 / nv
        m = max(1, math.ceil(log_delta / math.log1p(-nv)))
        p_new = q + math.exp(m * math.log1p(-nv)) * (p - q)
        stages.append(StageRecord(n, wC, wH, nv, m, q, p_new, wH * (p - p_new)))
        p = p_new
    return EngineResult(cfg, omega_S, theta, p0, stages)


def engine_repetition(p: float, beta: float, beta_H: float, omega_C: float, omega_H: float
                      ) -> float:
    """Excited population after one exchange followed by machine rethermalisation."""
    c0, c1 = _qubit_pops(beta, omega_C)
    h0, h1 = _qubit_pops(beta_H, omega_H)
    return p * (1.0 - c0 * h1 - c1 * h0) + c1 * h0


@dataclass(frozen=True)
class VirtualSequenceResult:
    populations: np.ndarray
    heat: float
    eta: float

    @property
    def ops(self) -> int:
        return int(self.populations.size - 1)

    @property
    def p_final(self) -> float:
        return float(self.populations[-1])


def virtual_swap_sequence(hot_gaps, beta: float, beta_H: float, reps: int = 1,
                          p_excited: float = 0.5, omega_S: float = 0.0
                          ) -> VirtualSequenceResult:
    """Exchange a qubit target ``reps`` times with each virtual qubit in turn.

    Stage k pairs a hot qubit of gap ``hot_gaps[k]`` with a cold qubit of gap
    ``omega_S + hot_gaps[k]``; the machine rethermalises after every exchange.
    """
    if int(reps) != reps or reps < 1:
        raise ValueError("reps must be a positive integer")
    if not 0 <= beta_H < beta:
        raise ValueError("need 0 <= beta_H < beta")
    pops = [p_excited]
    heat = []
    p = p_excited
    for wH in np.asarray(hot_gaps, dtype=float):
        for _ in range(int(reps)):
            p_new = engine_repetition(p, beta, beta_H, omega_S + wH, wH)
            heat.append(wH * (p - p_new))
            pops.append(p_new)
            p = p_new
    return VirtualSequenceResult(np.array(pops), math.fsum(heat), 1.0 - beta_H / beta)


# ---------------------------------------------------------------- qudit max exchange

@dataclass(frozen=True)
class QuditStage:
    n: int
    beta_n: float
    steps: int
    heat: float
    energy_residual: float
    divergences: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class QuditResult:
    cfg: EngineConfig
    H_S: Spectrum
    theta: float
    delta_E: float
    initial: DiagonalState
    final: DiagonalState
    stages: list[QuditStage] = field(repr=False)

    @property
    def heat(self) -> float:
        return math.fsum(s.heat for s in self.stages)

    @property
    def ops(self) -> int:
        return sum(s.steps for s in self.stages)

    def _F(self, rho: DiagonalState) -> float:
        p = rho.probs
        nz = p > 0
        return math.fsum(p * self.H_S.energies) + math.fsum(p[nz] * np.log(p[nz])) / self.cfg.beta

    @property
    def dF(self) -> float:
        return self._F(self.final) - self._F(self.initial)

    @property
    def heat_bound(self) -> float:
        """dF/eta + theta tr[H (rho_0 - rho_N)] plus the stage-tolerance allowance."""
        c = self.cfg
        dE = math.fsum((self.initial.probs - self.final.probs) * self.H_S.energies)
        ratio = (c.beta_star - c.beta) / (c.beta - c.beta_H)
        return self.dF / c.eta + self.theta * dE + 2 * ratio * self.delta_E


def qudit_max_exchange_protocol(H_S: Spectrum, cfg: EngineConfig, delta_E: float | None = None,
                                record: bool = False) -> QuditResult:
    """Staged max-exchange cooling of an arbitrary finite target.

    Stage n targets inverse temperature beta + n theta (beta - beta_H). Each
    step exchanges, among all level pairs i < j, the one whose population
    flow is largest in magnitude (lexicographic tie-break); the stage ends
    once the mean energy is within ``delta_E`` of the stage Gibbs value.
    """
    if H_S.is_compressed:
        raise ValueError("explicit system spectrum required")
    b, bh, N = cfg.beta, cfg.beta_H, int(cfg.N)
    w = H_S.energies
    if delta_E is None:
        delta_E = 1e-10 * max(H_S.max_energy, 1e-300)
    theta = (cfg.beta_star - b) / (N * (b - bh))
    rho0 = thermal_state(H_S, b)
    p = rho0.probs.copy()
    pairs = [(i, j) for i, j in combinations(range(w.size), 2) if w[j] > w[i]]
    I = np.array([i for i, _ in pairs], dtype=np.int64)
    J = np.array([j for _, j in pairs], dtype=np.int64)
    stages = []
    for n in range(1, N + 1 if theta > 0 else 1):
        beta_n = b + n * theta * (b - bh)
        target = thermal_state(H_S, beta_n)
        E_target = float(target.probs @ w)
        lc = -b * (1 + n * theta) * w
        c = np.exp(lc - logsumexp(lc))
        g = n * theta * (w[J] - w[I])
        # hot qubit (ground, excited) per pair
        h1 = expit(-bh * g)
        h0 = 1.0 - h1
        heat = []
        divs = []
        steps = 0
        while abs(p @ w - E_target) > delta_E:
            if steps >= STEP_CAP:
                raise NumericalError(
                    f"stage {n} did not converge in {STEP_CAP} steps: "
                    f"|E - E_target| = {abs(p @ w - E_target)!r}, delta_E = {delta_E!r}")
            flow = p[I] * c[J] * h0 - p[J] * c[I] * h1
            k = int(np.argmax(np.abs(flow)))
            f = flow[k]
            if f == 0.0:
                raise NumericalError(f"stage {n} stalled with energy residual "
                                     f"{abs(p @ w - E_target)!r}")
            p[I[k]] -= f
            p[J[k]] += f
            heat.append(-g[k] * f)
            steps += 1
            if record:
                divs.append(relative_entropy(DiagonalState.from_probs(p / p.sum()), target))
        stages.append(QuditStage(n, beta_n, steps, math.fsum(heat),
                                 float(abs(p @ w - E_target)),
                                 np.array(divs) if record else None))
    return QuditResult(cfg, H_S, theta, delta_E, rho0, DiagonalState.from_probs(p / p.sum()),
                       stages)


def max_exchange_flows(p: np.ndarray, H_S: Spectrum, beta: float, beta_H: float, scale: float
                       ) -> np.ndarray:
    """Population flow of every level pair (i < j) for one exchange with a
    cold machine ``(1 + scale) H_S`` and hot qubits of gap ``scale (w_j - w_i)``."""
    w = H_S.energies
    I, J = np.triu_indices(w.size, 1)
    lc = -beta * (1 + scale) * w
    c = np.exp(lc - logsumexp(lc))
    h1 = expit(-beta_H * scale * (w[J] - w[I]))
    return p[I] * c[J] * (1.0 - h1) - p[J] * c[I] * h1
