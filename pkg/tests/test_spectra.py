import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.spectra import (
    DiagonalState,
    NumericalError,
    PermutationUnitary,
    ProductSpace,
    Spectrum,
    apply_permutation,
    energy,
    entropy,
    factor_swap,
    functionals,
    joint_energies,
    log_partition,
    marginal,
    mutual_information,
    rank,
    relative_entropy,
    tensor,
    thermal_state,
)

# mpmath, 40 digits
THERMAL_QUBIT = (0.73105857863000487925, 0.26894142136999512075)
QUBIT_ENTROPY = 0.58220310888821795480
D_09_05 = 0.36806420716849706991


def probs_strategy(max_size=6):
    return st.lists(st.floats(0.01, 1.0), min_size=2, max_size=max_size).map(
        lambda w: np.array(w) / sum(w))


def spectrum_strategy(max_size=5):
    return st.lists(st.floats(0.0, 3.0), min_size=1, max_size=max_size - 1).map(
        lambda e: Spectrum([0.0] + sorted(e)))


def test_thermal_examples():
    H = Spectrum([0.0, 1.0])
    assert np.allclose(thermal_state(H, 0.0).probs, [0.5, 0.5], atol=1e-15)
    assert np.array_equal(thermal_state(H, math.inf).probs, [1.0, 0.0])
    assert np.allclose(thermal_state(H, 1.0).probs, THERMAL_QUBIT, rtol=1e-14)


def test_thermal_inf_degenerate_ground():
    p = thermal_state(Spectrum([0.0, 0.0, 1.0]), math.inf).probs
    assert np.allclose(p, [0.5, 0.5, 0.0])


def test_thermal_rejects_negative_and_nan_beta():
    H = Spectrum([0.0, 1.0])
    with pytest.raises(ValueError):
        thermal_state(H, -1.0)
    with pytest.raises(ValueError):
        thermal_state(H, math.nan)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum([])
    with pytest.raises(ValueError):
        Spectrum([0.5, 1.0])
    with pytest.raises(ValueError):
        Spectrum([0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        Spectrum([0.0, 1.0], [1, 0])
    Spectrum([0.0, 2.0, 1.0], ordered=False)


def test_state_normalisation_checked():
    with pytest.raises(ValueError):
        DiagonalState.from_probs([0.5, 0.6])
    with pytest.raises(ValueError):
        DiagonalState.from_probs([1.1, -0.1])


def test_functionals_examples():
    f = functionals(DiagonalState.from_probs([1.0, 0.0]), Spectrum([0.0, 1.0]), 1.0)
    assert f.E == 0 and f.S == 0
    g = functionals(DiagonalState.from_probs([0.25] * 4), Spectrum([0.0] * 4), 1.0)
    assert g.S == pytest.approx(math.log(4), abs=1e-15)
    assert g.E == 0
    assert g.Z_at_beta == pytest.approx(4.0)


def test_thermal_qubit_entropy_two_ways():
    b = 1.0
    rho = thermal_state(Spectrum([0.0, 1.0]), b)
    f = functionals(rho, Spectrum([0.0, 1.0]), b)
    # S = beta E + ln Z for a Gibbs state
    assert f.S == pytest.approx(b * f.E + math.log(f.Z_at_beta), abs=1e-12)
    assert f.S == pytest.approx(QUBIT_ENTROPY, abs=1e-14)
    assert f.F_beta == pytest.approx(-math.log(f.Z_at_beta), abs=1e-14)


def test_compressed_matches_expanded():
    H = Spectrum([0.0, 1.0, 2.5], [1, 3, 2])
    rho = thermal_state(H, 0.7)
    big = thermal_state(H.expanded(), 0.7)
    assert np.allclose(rho.expanded().probs, big.probs, atol=1e-15)
    assert entropy(rho) == pytest.approx(entropy(big), abs=1e-14)
    assert energy(rho, H) == pytest.approx(energy(big, H.expanded()), abs=1e-14)
    assert log_partition(H, 0.7) == pytest.approx(log_partition(H.expanded(), 0.7), abs=1e-14)
    assert rank(rho) == 6


def test_huge_multiplicity_stays_finite():
    H = Spectrum([0.0, 1.0], [1, 2**200])
    rho = thermal_state(H, 200.0)
    assert math.isfinite(entropy(rho))
    assert rho.level_masses().sum() == pytest.approx(1.0)


def test_relative_entropy_examples():
    a = DiagonalState.from_probs([0.9, 0.1])
    assert relative_entropy(a, a) == 0
    assert relative_entropy(DiagonalState.from_probs([1.0, 0.0]),
                            DiagonalState.from_probs([0.0, 1.0])) == math.inf
    assert relative_entropy(a, DiagonalState.from_probs([0.5, 0.5])) == \
        pytest.approx(D_09_05, abs=1e-15)


@given(probs_strategy(), probs_strategy())
def test_relative_entropy_nonnegative(p, q):
    if p.size != q.size:
        q = np.resize(q, p.size)
        q /= q.sum()
    assert relative_entropy(DiagonalState.from_probs(p), DiagonalState.from_probs(q)) >= 0


def test_mutual_information_examples():
    space = ProductSpace((2, 2))
    prod = tensor(DiagonalState.from_probs([0.3, 0.7]), DiagonalState.from_probs([0.6, 0.4]))
    assert mutual_information(prod, space) == pytest.approx(0.0, abs=1e-15)
    corr = DiagonalState.from_probs([0.5, 0.0, 0.0, 0.5])
    assert mutual_information(corr, space) == pytest.approx(math.log(2), abs=1e-15)


def test_mutual_information_random_3x4():
    rng = np.random.default_rng(3)
    p = rng.dirichlet(np.ones(12))
    P = p.reshape(3, 4)

    def H(x):
        return -np.sum(x * np.log(x))

    expected = H(P.sum(1)) + H(P.sum(0)) - H(p)
    got = mutual_information(DiagonalState.from_probs(p), ProductSpace((3, 4)))
    assert got == pytest.approx(expected, abs=1e-14)


def test_tensor_and_marginal_examples():
    t = tensor(DiagonalState.from_probs([1.0, 0.0]), DiagonalState.from_probs([0.5, 0.5]))
    assert np.allclose(t.probs, [0.5, 0.5, 0.0, 0.0])
    assert np.allclose(marginal(t, ProductSpace((2, 2)), 0).probs, [1.0, 0.0])


def test_three_thermal_qubits_round_trip():
    states = [thermal_state(Spectrum([0.0, w]), 1.0) for w in (0.5, 1.0, 2.0)]
    joint = tensor(*states)
    space = ProductSpace((2, 2, 2))
    for k, s in enumerate(states):
        assert np.allclose(marginal(joint, space, k).probs, s.probs, atol=1e-15, rtol=0)


def test_marginal_respects_keep_order():
    rng = np.random.default_rng(9)
    p = rng.dirichlet(np.ones(24))
    space = ProductSpace((2, 3, 4))
    got = marginal(DiagonalState.from_probs(p), space, (2, 0)).probs.reshape(4, 2)
    assert np.allclose(got, p.reshape(2, 3, 4).sum(axis=1).T, atol=1e-15)


def test_apply_identity_and_swap():
    a = thermal_state(Spectrum([0.0, 1.0]), 1.0)
    b = thermal_state(Spectrum([0.0, 2.0]), 1.0)
    space = ProductSpace((2, 2))
    joint = tensor(a, b)
    same = apply_permutation(joint, PermutationUnitary.identity(space))
    assert np.array_equal(same.probs, joint.probs)
    out = apply_permutation(joint, factor_swap(space, 0, 1))
    assert np.allclose(marginal(out, space, 0).probs, b.probs, atol=1e-16)
    assert np.allclose(marginal(out, space, 1).probs, a.probs, atol=1e-16)
    assert factor_swap(space, 0, 1).moved().tolist() == [1, 2]


def test_three_qubit_exchange_touches_two_indices():
    space = ProductSpace((2, 2, 2))
    i, j = space.index((0, 1, 0)), space.index((1, 0, 1))
    U = PermutationUnitary.from_swaps(space, [(i, j)])
    assert U.moved().tolist() == [i, j]
    rng = np.random.default_rng(1)
    p = rng.dirichlet(np.ones(8))
    out = apply_permutation(DiagonalState.from_probs(p), U).probs
    q = p.copy()
    q[[i, j]] = q[[j, i]]
    assert np.allclose(out, q, rtol=1e-15)


def test_permutation_validation_and_algebra():
    with pytest.raises(ValueError):
        PermutationUnitary([0, 0, 1])
    with pytest.raises(ValueError):
        PermutationUnitary([0, 1], (3,))
    U = PermutationUnitary([1, 2, 0])
    assert (U @ U.inverse()).is_identity()
    assert (U @ U @ U).is_identity()
    assert U.fixed_points().size == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 4))
def test_permutations_preserve_spectrum(seed, da, db):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(da * db))
    U = PermutationUnitary(rng.permutation(da * db), (da, db))
    out = apply_permutation(DiagonalState.from_probs(p), U)
    assert np.allclose(np.sort(out.probs), np.sort(p), rtol=1e-14, atol=0)
    assert entropy(out) == pytest.approx(entropy(DiagonalState.from_probs(p)), abs=1e-13)


@given(spectrum_strategy(), st.floats(0.0, 10.0))
def test_gibbs_free_energy_identity(H, beta):
    rho = thermal_state(H, beta)
    assert rho.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(rho.probs) <= 1e-15)
    if beta > 0:
        f = functionals(rho, H, beta)
        assert f.F_beta == pytest.approx(-log_partition(H, beta) / beta, rel=1e-12, abs=1e-10)


@given(spectrum_strategy(), st.floats(0.05, 5.0), probs_strategy(5))
def test_gibbs_minimises_free_energy(H, beta, p):
    p = np.resize(p, H.n_levels)
    p = p / p.sum()
    f_gibbs = functionals(thermal_state(H, beta), H, beta).F_beta
    f_other = functionals(DiagonalState.from_probs(p), H, beta).F_beta
    assert f_other >= f_gibbs - 1e-12


def test_joint_energies_row_major():
    e = joint_energies(Spectrum([0.0, 1.0]), Spectrum([0.0, 10.0]))
    assert e.tolist() == [0.0, 10.0, 1.0, 11.0]


def test_numerical_error_is_arithmetic():
    assert issubclass(NumericalError, ArithmeticError)


@settings(max_examples=50, deadline=None)
@given(probs_strategy(), st.integers(0, 2**32 - 1))
def test_functionals_against_mpmath(p, seed):
    import mpmath as mp

    mp.mp.dps = 40
    q = np.random.default_rng(seed).dirichlet(np.ones(p.size))
    H = -sum(mp.mpf(x) * mp.log(x) for x in p)
    D = sum(mp.mpf(x) * (mp.log(x) - mp.log(y)) for x, y in zip(p, q))
    P, Q = DiagonalState.from_probs(p), DiagonalState.from_probs(q)
    assert entropy(P) == pytest.approx(float(H), rel=1e-12, abs=1e-14)
    assert relative_entropy(P, Q) == pytest.approx(float(D), rel=1e-10, abs=1e-13)
