"""Diagonal thermal states, product spaces and permutation unitaries.

Probabilities are held in the log domain. A state may be degeneracy
compressed: one log-probability per level, shared by every state in that
level, with an integer multiplicity (arbitrary precision) per level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import kl_div

CLAMP = 1e-14
NORM_TOL = 1e-12
MAX_EXPLICIT_DIM = 2**24

# numpy's reduction: scipy's logsumexp carries ~0.1 ms of dispatch per call,
# which dominates on the small vectors used here
logsumexp = np.logaddexp.reduce


class NumericalError(ArithmeticError):
    """A provably non-negative quantity came out negative, a series failed
    to converge, or an iteration cap was hit."""


def _log_mults(mults: tuple[int, ...] | None, n: int) -> np.ndarray:
    if mults is None:
        return np.zeros(n)
    # math.log accepts arbitrarily large Python ints
    return np.array([math.log(m) for m in mults])


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if math.isnan(beta):
        raise ValueError("beta is NaN")
    if beta < 0:
        raise ValueError(f"negative inverse temperature {beta} is not supported")
    return beta


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Energy levels of one subsystem, ground level at zero.

    ``multiplicities`` switches on the compressed representation. ``ordered``
    may be turned off for spectra whose last level is synthetic (see
    :func:`artifact.coherent.truncate_machine`).
    """

    energies: np.ndarray
    multiplicities: tuple[int, ...] | None = None
    ordered: bool = True

    def __init__(self, energies: Iterable[float], multiplicities: Iterable[int] | None = None,
                 ordered: bool = True):
        e = np.array(list(energies) if not isinstance(energies, np.ndarray) else energies,
                     dtype=float).ravel()
        if e.size == 0:
            raise ValueError("empty spectrum")
        if not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite")
        if abs(e[0]) > 1e-12:
            raise ValueError(f"ground energy must be 0, got {e[0]}")
        e[0] = 0.0
        if ordered and np.any(np.diff(e) < 0):
            raise ValueError("energies must be nondecreasing")
        mults = None
        if multiplicities is not None:
            mults = tuple(int(m) for m in multiplicities)
            if len(mults) != e.size:
                raise ValueError("one multiplicity per level required")
            if any(m < 1 for m in mults):
                raise ValueError("multiplicities must be >= 1")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "multiplicities", mults)
        object.__setattr__(self, "ordered", bool(ordered))

    @classmethod
    def equally_spaced(cls, d: int, omega: float) -> "Spectrum":
        return cls(omega * np.arange(d))

    @property
    def n_levels(self) -> int:
        return int(self.energies.size)

    @property
    def dim(self) -> int:
        if self.multiplicities is None:
            return self.n_levels
        return sum(self.multiplicities)

    @property
    def is_compressed(self) -> bool:
        return self.multiplicities is not None

    @property
    def log_multiplicities(self) -> np.ndarray:
        return _log_mults(self.multiplicities, self.n_levels)

    @property
    def max_energy(self) -> float:
        return float(self.energies.max())

    def expanded(self) -> "Spectrum":
        if self.multiplicities is None:
            return self
        if self.dim > MAX_EXPLICIT_DIM:
            raise ValueError(f"dimension {self.dim} exceeds the explicit limit 2**24")
        return Spectrum(np.repeat(self.energies, self.multiplicities), ordered=self.ordered)

    def __len__(self) -> int:
        return self.n_levels

    def __repr__(self) -> str:
        tag = "" if self.multiplicities is None else f", multiplicities={self.multiplicities}"
        return f"Spectrum({self.energies.tolist()}{tag})"


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Probability vector stored as log-probabilities.

    For a compressed state ``log_probs[k]`` is the log-probability of each
    single state in level ``k``; the level carries ``multiplicities[k]``
    such states.
    """

    log_probs: np.ndarray
    multiplicities: tuple[int, ...] | None = None

    def __init__(self, log_probs: Iterable[float], multiplicities: Iterable[int] | None = None,
                 check: bool = True):
        lp = np.array(list(log_probs) if not isinstance(log_probs, np.ndarray) else log_probs,
                      dtype=float).ravel()
        if lp.size == 0:
            raise ValueError("empty state")
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise ValueError("invalid log-probabilities")
        mults = None if multiplicities is None else tuple(int(m) for m in multiplicities)
        if mults is not None and len(mults) != lp.size:
            raise ValueError("one multiplicity per level required")
        if check:
            total = math.exp(logsumexp(lp + _log_mults(mults, lp.size)))
            if abs(total - 1.0) > NORM_TOL:
                raise ValueError(f"state not normalised: total probability {total!r}")
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)
        object.__setattr__(self, "multiplicities", mults)

    @classmethod
    def from_probs(cls, probs: Iterable[float], multiplicities: Iterable[int] | None = None
                   ) -> "DiagonalState":
        p = np.array(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=float)
        if np.any(p < -CLAMP):
            raise ValueError("negative probability")
        p = np.clip(p, 0.0, None)
        with np.errstate(divide="ignore"):
            return cls(np.log(p), multiplicities)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def n_levels(self) -> int:
        return int(self.log_probs.size)

    @property
    def dim(self) -> int:
        if self.multiplicities is None:
            return self.n_levels
        return sum(self.multiplicities)

    @property
    def is_compressed(self) -> bool:
        return self.multiplicities is not None

    def level_log_masses(self) -> np.ndarray:
        """log of the total probability held by each level."""
        return self.log_probs + _log_mults(self.multiplicities, self.n_levels)

    def level_masses(self) -> np.ndarray:
        return np.exp(self.level_log_masses())

    def expanded(self) -> "DiagonalState":
        if self.multiplicities is None:
            return self
        if self.dim > MAX_EXPLICIT_DIM:
            raise ValueError(f"dimension {self.dim} exceeds the explicit limit 2**24")
        return DiagonalState(np.repeat(self.log_probs, self.multiplicities))

    def __repr__(self) -> str:
        return f"DiagonalState({self.probs.tolist()})"


@dataclass(frozen=True)
class ProductSpace:
    """Row-major product of factor spaces; the last factor varies fastest."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        d = tuple(int(x) for x in dims)
        if not d or any(x < 1 for x in d):
            raise ValueError("factor dimensions must be positive")
        object.__setattr__(self, "dims", d)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def index(self, factors: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(factors), self.dims))

    def factors(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def factor_grid(self) -> np.ndarray:
        """(dim, n_factors) array of factor indices in joint order."""
        return np.stack(np.unravel_index(np.arange(self.dim), self.dims), axis=1)


@dataclass(frozen=True, eq=False)
class PermutationUnitary:
    """Basis permutation: basis state ``i`` is sent to ``mapping[i]``."""

    mapping: np.ndarray
    space: ProductSpace

    def __init__(self, mapping: Iterable[int], space: ProductSpace | Sequence[int] | None = None):
        m = np.array(list(mapping) if not isinstance(mapping, np.ndarray) else mapping,
                     dtype=np.int64).ravel()
        if space is None:
            space = ProductSpace((m.size,))
        elif not isinstance(space, ProductSpace):
            space = ProductSpace(space)
        if m.size != space.dim:
            raise ValueError(f"mapping has {m.size} entries, space has dimension {space.dim}")
        if m.size and (m.min() < 0 or m.max() >= m.size
                       or np.any(np.bincount(m, minlength=m.size) != 1)):
            raise ValueError("mapping is not a bijection")
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)
        object.__setattr__(self, "space", space)

    @classmethod
    def identity(cls, space: ProductSpace | Sequence[int]) -> "PermutationUnitary":
        space = space if isinstance(space, ProductSpace) else ProductSpace(space)
        return cls(np.arange(space.dim), space)

    @classmethod
    def from_swaps(cls, space: ProductSpace | Sequence[int],
                   pairs: Iterable[tuple[int, int]]) -> "PermutationUnitary":
        """Product of transpositions, applied left to right."""
        space = space if isinstance(space, ProductSpace) else ProductSpace(space)
        m = np.arange(space.dim)
        for a, b in pairs:
            ia, ib = m == a, m == b
            m[ia], m[ib] = b, a
        return cls(m, space)

    @property
    def dim(self) -> int:
        return int(self.mapping.size)

    def fixed_points(self) -> np.ndarray:
        return np.flatnonzero(self.mapping == np.arange(self.dim))

    def moved(self) -> np.ndarray:
        return np.flatnonzero(self.mapping != np.arange(self.dim))

    def is_identity(self) -> bool:
        return bool(np.all(self.mapping == np.arange(self.dim)))

    def inverse(self) -> "PermutationUnitary":
        inv = np.empty_like(self.mapping)
        inv[self.mapping] = np.arange(self.dim)
        return PermutationUnitary(inv, self.space)

    def compose(self, first: "PermutationUnitary") -> "PermutationUnitary":
        """``self ∘ first``: apply ``first``, then ``self``."""
        if first.space != self.space:
            raise ValueError("permutations act on different spaces")
        return PermutationUnitary(self.mapping[first.mapping], self.space)

    def __matmul__(self, other: "PermutationUnitary") -> "PermutationUnitary":
        return self.compose(other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PermutationUnitary):
            return NotImplemented
        return self.space == other.space and bool(np.array_equal(self.mapping, other.mapping))

    def __hash__(self) -> int:
        return hash((self.space, self.mapping.tobytes()))


@dataclass(frozen=True)
class Functionals:
    E: float
    S: float
    Z_at_beta: float
    F_beta: float


def thermal_state(H: Spectrum, beta: float) -> DiagonalState:
    """Gibbs state of ``H``; ``beta=math.inf`` gives the ground-state mass."""
    beta = _check_beta(beta)
    lm = H.log_multiplicities
    e = H.energies
    if math.isinf(beta):
        ground = e == e.min()
        lp = np.full(e.size, -np.inf)
        lp[ground] = -logsumexp(lm[ground])
    else:
        w = -beta * e
        lp = w - logsumexp(w + lm)
    return DiagonalState(lp, H.multiplicities)


def _check_aligned(rho: DiagonalState, H: Spectrum) -> None:
    if rho.n_levels != H.n_levels:
        raise ValueError(f"state has {rho.n_levels} levels, spectrum has {H.n_levels}")
    if rho.multiplicities != H.multiplicities:
        raise ValueError("state and spectrum multiplicities differ")


def energy(rho: DiagonalState, H: Spectrum) -> float:
    _check_aligned(rho, H)
    return float(math.fsum(rho.level_masses() * H.energies))


def entropy(rho: DiagonalState) -> float:
    """von Neumann entropy in nats, with 0 ln 0 = 0."""
    lp = rho.log_probs
    w = rho.level_masses()
    nz = w > 0
    s = -math.fsum(w[nz] * lp[nz])
    if s < 0:
        if s < -CLAMP:
            raise NumericalError(f"negative entropy {s}")
        s = 0.0
    return s


def log_partition(H: Spectrum, beta: float) -> float:
    beta = _check_beta(beta)
    if math.isinf(beta):
        e0 = H.energies.min()
        if e0 < 0:
            return math.inf
        return float(logsumexp(H.log_multiplicities[H.energies == e0]))
    return float(logsumexp(-beta * H.energies + H.log_multiplicities))


def functionals(rho: DiagonalState, H: Spectrum, beta: float) -> Functionals:
    beta = _check_beta(beta)
    E = energy(rho, H)
    S = entropy(rho)
    Z = math.exp(log_partition(H, beta))
    if beta == 0:
        F = E if S == 0 else -math.inf
    elif math.isinf(beta):
        F = E
    else:
        F = E - S / beta
    return Functionals(E=E, S=S, Z_at_beta=Z, F_beta=F)


def relative_entropy(rho: DiagonalState, sigma: DiagonalState) -> float:
    """D(rho||sigma) in nats; ``math.inf`` when supp(rho) is not inside supp(sigma)."""
    if rho.n_levels != sigma.n_levels or rho.multiplicities != sigma.multiplicities:
        raise ValueError("states are not aligned")
    lp, lq = rho.log_probs, sigma.log_probs
    if np.any(np.isfinite(lp) & ~np.isfinite(lq)):
        return math.inf
    # kl_div is termwise non-negative, so the sum keeps full relative precision
    d = math.fsum(kl_div(np.exp(rho.level_log_masses()), np.exp(sigma.level_log_masses())))
    if d < 0:
        if d < -CLAMP:
            raise NumericalError(f"negative relative entropy {d}")
        d = 0.0
    return d


def tensor(*states: DiagonalState) -> DiagonalState:
    if not states:
        raise ValueError("nothing to tensor")
    if any(s.is_compressed for s in states):
        raise ValueError("tensor products are built from explicit states")
    lp = states[0].log_probs
    for s in states[1:]:
        lp = np.add.outer(lp, s.log_probs).ravel()
    return DiagonalState(lp)


def marginal(joint: DiagonalState, space: ProductSpace, keep: int | Sequence[int]) -> DiagonalState:
    """Reduced state on the factors listed in ``keep`` (in the given order)."""
    if joint.is_compressed:
        raise ValueError("marginals are taken of explicit states")
    if joint.dim != space.dim:
        raise ValueError(f"state dimension {joint.dim} does not match space {space.dims}")
    keep = (keep,) if isinstance(keep, (int, np.integer)) else tuple(keep)
    if len(set(keep)) != len(keep) or any(not 0 <= k < space.n_factors for k in keep):
        raise ValueError(f"bad factor selection {keep}")
    drop = tuple(i for i in range(space.n_factors) if i not in keep)
    t = np.transpose(joint.log_probs.reshape(space.dims), keep + drop)
    n_keep = int(np.prod([space.dims[k] for k in keep]))
    return DiagonalState(logsumexp(t.reshape(n_keep, -1), axis=1))


def mutual_information(joint: DiagonalState, space: ProductSpace,
                       part: Sequence[int] = (0,)) -> float:
    """I(A:B) where A is the factor set ``part`` and B the rest."""
    a = tuple(part)
    b = tuple(i for i in range(space.n_factors) if i not in a)
    if not a or not b:
        raise ValueError("bipartition needs both sides non-empty")
    i = entropy(marginal(joint, space, a)) + entropy(marginal(joint, space, b)) - entropy(joint)
    if i < 0:
        if i < -1e-12:
            raise NumericalError(f"negative mutual information {i}")
        i = 0.0
    return i


def apply_permutation(joint: DiagonalState, U: PermutationUnitary) -> DiagonalState:
    if joint.is_compressed:
        raise ValueError("permutations act on explicit states")
    if joint.dim != U.dim:
        raise ValueError(f"state dimension {joint.dim} does not match permutation {U.dim}")
    lp = np.empty_like(joint.log_probs)
    lp[U.mapping] = joint.log_probs
    return DiagonalState(lp, check=False)


def joint_energies(*spectra: Spectrum) -> np.ndarray:
    """Total energy of every product basis state, in row-major order."""
    e = spectra[0].expanded().energies
    for h in spectra[1:]:
        e = np.add.outer(e, h.expanded().energies).ravel()
    return e


def factor_swap(space: ProductSpace, a: int, b: int) -> PermutationUnitary:
    """Full SWAP of two equal-dimension factors."""
    if space.dims[a] != space.dims[b]:
        raise ValueError("swapped factors must have equal dimension")
    grid = space.factor_grid()
    grid[:, [a, b]] = grid[:, [b, a]]
    return PermutationUnitary(np.ravel_multi_index(grid.T, space.dims), space)


def rank(rho: DiagonalState) -> int:
    finite = np.isfinite(rho.log_probs)
    if rho.multiplicities is None:
        return int(finite.sum())
    return sum(m for m, f in zip(rho.multiplicities, finite) if f)
