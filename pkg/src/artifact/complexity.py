"""Control-complexity measures: effective dimension, energy-gap variety,
gap coverage and eigenvalue fine-tuning residuals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coherent import halving_segments
from .spectra import PermutationUnitary, Spectrum, thermal_state

DEFAULT_RESOLUTION = 1e-9


def effective_dimension(U: PermutationUnitary) -> int:
    """Number of basis states the permutation moves."""
    return int(U.moved().size)


def _check_interval(interval) -> tuple[float, float]:
    a, b = (float(x) for x in interval)
    if not a < b:
        raise ValueError("interval needs a < b")
    return a, b


def gap_set(H_M: Spectrum, interval, resolution: float = DEFAULT_RESOLUTION) -> np.ndarray:
    """Sorted distinct positive gaps w_i - w_j lying in [a, b).

    Gaps closer than ``resolution`` to an already kept gap are merged into it;
    gaps within ``resolution`` of an endpoint count as lying on it.
    """
    a, b = _check_interval(interval)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    e = np.unique(H_M.energies)
    g = (e[:, None] - e[None, :])[np.triu_indices(e.size, 1)[::-1]]
    g = np.sort(g[(g >= a - resolution) & (g < b - resolution)])
    kept = []
    for x in g:
        if not kept or x - kept[-1] >= resolution:
            kept.append(float(x))
    return np.array(kept)


def energy_gap_variety(H_M: Spectrum, interval, resolution: float = DEFAULT_RESOLUTION) -> int:
    return int(gap_set(H_M, interval, resolution).size)


def gap_coverage(H_M: Spectrum, interval, resolution: float = DEFAULT_RESOLUTION) -> float:
    """Largest hole in [a, b) left by the machine gaps, endpoints included."""
    a, b = _check_interval(interval)
    g = gap_set(H_M, (a, b), resolution)
    if g.size == 0:
        raise ValueError("no machine gap lies in the interval")
    pts = np.concatenate(([a], np.clip(g, a, b), [b]))
    return float(np.max(np.diff(pts)))


@dataclass(frozen=True)
class FinetuningResiduals:
    sum_top: float
    sum_bottom: float
    max_ratio_dev: float
    weighted_ratio_dev: float


def finetuning_residuals(H_M: Spectrum, beta: float) -> FinetuningResiduals:
    """Compare the thermal machine spectrum with its max-cooled image.

    With lam the nonincreasing eigenvalues, slot i of the cooled machine holds
    (lam[i//2] + lam[d/2 + i//2])/2. Returned: the mass of the top and bottom
    halves, the largest relative deviation of the cooled slot from lam[i], and
    the total absolute deviation. Works on compressed spectra.
    """
    rho = thermal_state(H_M, beta)
    order = np.argsort(-rho.log_probs, kind="stable")
    log_lam = rho.log_probs[order]
    mults = H_M.multiplicities or (1,) * H_M.n_levels
    counts = [mults[k] for k in order]
    d = sum(counts)
    if d % 2:
        raise ValueError("machine dimension must be even")
    h = d // 2
    top, bottom, weighted = [], [], []
    worst = 0.0
    pos = 0
    for length, ri, ra, rb in halving_segments(counts):
        lam = math.exp(log_lam[ri])
        mass = math.exp(math.log(length) + log_lam[ri])
        (top if pos < h else bottom).append(mass)
        pos += length
        if lam == 0.0:
            continue
        fin = 0.5 * (math.exp(log_lam[ra] - log_lam[ri]) + math.exp(log_lam[rb] - log_lam[ri]))
        worst = max(worst, abs(fin - 1.0))
        weighted.append(mass * abs(fin - 1.0))
    return FinetuningResiduals(math.fsum(top), math.fsum(bottom), worst, math.fsum(weighted))
