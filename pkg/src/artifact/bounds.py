"""Landauer and Carnot-Landauer equality ledgers, plus structural floors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectra import (
    DiagonalState,
    NumericalError,
    PermutationUnitary,
    ProductSpace,
    Spectrum,
    apply_permutation,
    energy,
    entropy,
    joint_energies,
    marginal,
    mutual_information,
    relative_entropy,
    tensor,
    thermal_state,
)

LEDGER_TOL = 1e-10
THERMAL_TOL = 1e-12
RESONANCE_RTOL = 1e-9


class EnergyConservationError(ValueError):
    """A permutation links two joint basis states of different total energy."""

    def __init__(self, pair: tuple[int, int], energies: tuple[float, float]):
        self.pair = pair
        self.energies = energies
        super().__init__(f"permutation maps index {pair[0]} (E={energies[0]!r}) to "
                         f"index {pair[1]} (E={energies[1]!r})")


@dataclass(frozen=True)
class LandauerLedger:
    beta_dE_M: float
    dS_tilde_S: float
    mutual_info: float
    rel_entropy_M: float
    slack: float
    residual: float
    rank_increasing: bool = False


@dataclass(frozen=True)
class CarnotLandauerLedger:
    dF_S_beta: float
    eta: float
    dE_S: float
    dE_C: float
    dE_H: float
    dS_S: float
    dS_C: float
    dS_H: float
    D_C: float
    D_H: float
    residual: float
    cold_form: float
    rank_increasing: bool = False

    @property
    def entropy_bracket(self) -> float:
        return self.dS_S + self.dS_C + self.dS_H + self.D_C + self.D_H


def _is_thermal(rho: DiagonalState, H: Spectrum, beta: float) -> bool:
    if rho.n_levels != H.n_levels:
        return False
    return bool(np.max(np.abs(rho.probs - thermal_state(H, beta).probs)) <= THERMAL_TOL)


def landauer_ledger(rho_S: DiagonalState, rho_M: DiagonalState, H_S: Spectrum, H_M: Spectrum,
                    beta: float, U: PermutationUnitary) -> LandauerLedger:
    """Evaluate every term of the Landauer equality for one global permutation.

    The machine must start in the Gibbs state of ``H_M`` at ``beta``.
    """
    if not _is_thermal(rho_M, H_M, beta):
        raise ValueError("machine is not in the thermal state of H_M at beta")
    space = ProductSpace((rho_S.dim, rho_M.dim))
    if U.dim != space.dim:
        raise ValueError("permutation does not act on the system-machine space")
    out = apply_permutation(tensor(rho_S, rho_M), U)
    rs, rm = marginal(out, space, 0), marginal(out, space, 1)

    dE_M = energy(rm, H_M) - energy(rho_M, H_M)
    dS = entropy(rho_S) - entropy(rs)
    info = mutual_information(out, space)
    D = relative_entropy(rm, rho_M)
    b_dE = beta * dE_M if beta > 0 else 0.0
    if math.isinf(D):
        return LandauerLedger(b_dE, dS, info, D, math.inf, math.nan, rank_increasing=True)
    residual = b_dE - (dS + info + D)
    if b_dE < dS - LEDGER_TOL:
        raise NumericalError(f"Landauer bound violated: beta*dE_M={b_dE!r} < dS={dS!r}")
    return LandauerLedger(b_dE, dS, info, D, info + D, residual)


def carnot_landauer_ledger(rho_S: DiagonalState, H_S: Spectrum, H_C: Spectrum, H_H: Spectrum,
                           beta: float, beta_H: float, U: PermutationUnitary
                           ) -> CarnotLandauerLedger:
    """Heat-engine ledger for an energy-conserving permutation on S x C x H.

    Cold part thermal at ``beta``, hot part at ``beta_H``.
    """
    if not beta > 0 or math.isinf(beta):
        raise ValueError("beta must be positive and finite")
    if not 0 <= beta_H < beta:
        raise ValueError("need 0 <= beta_H < beta")
    space = ProductSpace((H_S.dim, H_C.dim, H_H.dim))
    if U.dim != space.dim or rho_S.dim != H_S.dim:
        raise ValueError("dimension mismatch")
    E = joint_energies(H_S, H_C, H_H)
    scale = np.maximum(np.maximum(np.abs(E), np.abs(E[U.mapping])), 1.0)
    bad = np.flatnonzero(np.abs(E[U.mapping] - E) > RESONANCE_RTOL * scale)
    if bad.size:
        i = int(bad[0])
        j = int(U.mapping[i])
        raise EnergyConservationError((i, j), (float(E[i]), float(E[j])))

    tau_C, tau_H = thermal_state(H_C, beta), thermal_state(H_H, beta_H)
    out = apply_permutation(tensor(rho_S, tau_C, tau_H), U)
    rs, rc, rh = (marginal(out, space, k) for k in range(3))

    dE_S = energy(rs, H_S) - energy(rho_S, H_S)
    dE_C = energy(rc, H_C) - energy(tau_C, H_C)
    dE_H = energy(rh, H_H) - energy(tau_H, H_H)
    dS_S = entropy(rs) - entropy(rho_S)
    dS_C = entropy(rc) - entropy(tau_C)
    dS_H = entropy(rh) - entropy(tau_H)
    D_C = relative_entropy(rc, tau_C)
    D_H = relative_entropy(rh, tau_H)
    eta = 1.0 - beta_H / beta
    dF = dE_S - dS_S / beta
    cold = dS_S - beta_H * dE_S + (beta - beta_H) * dE_C
    if math.isinf(D_C) or math.isinf(D_H):
        return CarnotLandauerLedger(dF, eta, dE_S, dE_C, dE_H, dS_S, dS_C, dS_H, D_C, D_H,
                                    math.nan, cold, rank_increasing=True)
    residual = dF + eta * dE_H + (dS_S + dS_C + dS_H + D_C + D_H) / beta
    return CarnotLandauerLedger(dF, eta, dE_S, dE_C, dE_H, dS_S, dS_C, dS_H, D_C, D_H,
                                residual, cold)


def purity_floor(rho_S: DiagonalState, H_M: Spectrum, beta: float) -> float:
    """Smallest reachable eigenvalue of the target after one interaction."""
    lam_min = float(np.min(rho_S.probs))
    if beta == 0:
        return lam_min
    return math.exp(-beta * H_M.max_energy) * lam_min


def deviation_floor(theta: float, n_pm: float) -> float:
    """Relative-entropy price of eigenvalue ratios off by at least ``theta``
    on probability mass ``n_pm``."""
    if not 0 <= theta < 1:
        raise ValueError("theta must lie in [0, 1)")
    if not 0 <= n_pm <= 1:
        raise ValueError("n_pm must lie in [0, 1]")
    return 0.5 * n_pm * theta**2
