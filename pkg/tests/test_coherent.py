import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import rw_dense

from artifact.coherent import (
    binary_entropy,
    compose_steps,
    equally_spaced_cost,
    equally_spaced_landauer,
    halving_segments,
    linear_sequence_protocol,
    max_cool_permutation,
    qubit_swap_sequence,
    rw_machine,
    rw_protocol,
    single_swap_protocol,
    truncate_machine,
)
from artifact.complexity import effective_dimension
from artifact.spectra import (
    DiagonalState,
    PermutationUnitary,
    ProductSpace,
    Spectrum,
    apply_permutation,
    factor_swap,
    log_partition,
    marginal,
    tensor,
    thermal_state,
)

# mpmath, 40 digits; beta = 1, omega_S = 1, omega_max = 20
CONTINUUM_COST = {2: 0.31326164629515046812, 3: 0.40760592322130777287,
                  math.inf: 0.45867510416400935941}
SWAP_LOWER_BOUND = 0.14973849934787756481
QUBIT = Spectrum([0.0, 1.0])


def test_single_swap_equal_gaps_is_free():
    r = single_swap_protocol(QUBIT, 1.0, 1.0)
    assert r.cost == pytest.approx(0.0, abs=1e-16)
    assert np.allclose(r.rho_S.probs, thermal_state(QUBIT, 1.0).probs)


def test_single_swap_lower_bound_example():
    r = single_swap_protocol(QUBIT, 1.0, 2.0)
    assert r.lower_bound == pytest.approx(SWAP_LOWER_BOUND, rel=1e-14)
    assert r.cost >= r.lower_bound
    assert r.dE_S < 0 < r.dE_M


def test_single_swap_cost_diverges_while_cooling():
    costs, excited = [], []
    for w in np.arange(2, 51):
        r = single_swap_protocol(QUBIT, 1.0, float(w))
        costs.append(r.cost)
        excited.append(r.rho_S.probs[1])
    assert np.all(np.diff(excited) < 0) and excited[-1] < 1e-20
    # cost tends to the unbounded energy bookkeeping of a deep machine level
    assert np.all(np.diff(costs) > 0)
    assert costs[-1] > 50 * thermal_state(QUBIT, 1.0).probs[1] - 1


def test_single_swap_rejects_small_machine():
    with pytest.raises(ValueError):
        single_swap_protocol(Spectrum([0.0, 1.0, 2.0]), 1.0, 1.5)


def test_linear_sequence_single_step_is_a_swap():
    t = linear_sequence_protocol(QUBIT, 1.0, 3.0, 1)
    s = single_swap_protocol(QUBIT, 1.0, 3.0)
    assert t.work == pytest.approx(s.cost, abs=1e-15)
    assert np.allclose(t.final_state.probs, s.rho_S.probs, rtol=1e-14)


def test_linear_sequence_intermediate_states_are_thermal():
    H = Spectrum.equally_spaced(3, 1.0)
    t = linear_sequence_protocol(H, 1.0, 4.0, 6)
    eps = (4.0 - 1.0) / 6
    for n in range(7):
        assert np.allclose(t.state(n).probs, thermal_state(H, 1.0 + n * eps).probs, rtol=1e-13)
    assert len(t.steps) == 6 and t.steps[0].n == 1
    assert t.slack > 0


def test_linear_sequence_excess_halves():
    ex = [linear_sequence_protocol(QUBIT, 1.0, 20.0, N).slack for N in (10_000, 20_000)]
    assert ex[0] / ex[1] == pytest.approx(2.0, rel=0.02)


@pytest.mark.parametrize("d", [2, 3, 5])
@pytest.mark.parametrize("N", [1, 10, 100])
def test_closed_form_matches_trace(d, N):
    H = Spectrum.equally_spaced(d, 1.0)
    t = linear_sequence_protocol(H, 1.0, 20.0, N)
    assert equally_spaced_cost(d, 1.0, 1.0, 20.0, N) == pytest.approx(t.work, abs=1e-10)


@pytest.mark.parametrize("d", [2, 3, math.inf])
def test_continuum_cost_frozen(d):
    assert equally_spaced_cost(d, 1.0, 1.0, 20.0) == pytest.approx(CONTINUUM_COST[d], abs=1e-14)
    assert equally_spaced_landauer(d, 1.0, 1.0, 20.0) == pytest.approx(CONTINUUM_COST[d],
                                                                       abs=1e-14)


def test_continuum_large_d_reaches_oscillator():
    gaps = [abs(equally_spaced_cost(d, 1.0, 1.0, 20.0) - CONTINUUM_COST[math.inf])
            for d in (5, 20, 80)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-12


def test_finite_N_cost_approaches_continuum_like_one_over_N():
    c = equally_spaced_cost(3, 1.0, 1.0, 20.0)
    e1 = equally_spaced_cost(3, 1.0, 1.0, 20.0, 1000) - c
    e2 = equally_spaced_cost(3, 1.0, 1.0, 20.0, 2000) - c
    assert e1 > e2 > 0
    assert e1 / e2 == pytest.approx(2.0, rel=0.01)


def test_equally_spaced_edges():
    assert equally_spaced_cost(4, 1.0, 2.0, 2.0, 10) == 0.0
    with pytest.raises(ValueError):
        equally_spaced_cost(1, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        equally_spaced_cost(2, 0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        equally_spaced_cost(2, 1.0, 2.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.floats(0.2, 3.0), st.floats(0.2, 2.0), st.floats(1.05, 10.0))
def test_continuum_cost_is_landauer_limit(d, beta, wS, factor):
    # the continuum work equals the free-energy difference and exceeds every finite N
    wmax = wS * factor
    c = equally_spaced_cost(d, beta, wS, wmax)
    assert c == pytest.approx(equally_spaced_landauer(d, beta, wS, wmax), rel=1e-10, abs=1e-13)
    assert equally_spaced_cost(d, beta, wS, wmax, 50) >= c - 1e-13


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(math.log(2))
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0


def test_qubit_swap_sequence_degenerate_target():
    r = qubit_swap_sequence([1.0, 2.0, 3.0], 1.0)
    q = 1 / (1 + math.exp(3.0))
    assert r.p_final == pytest.approx(q)
    assert r.dE_S == 0
    assert r.excess(1.0) > 0


def test_max_cool_passive_input_is_identity():
    p = np.sort(np.random.default_rng(0).dirichlet(np.ones(8)))[::-1]
    res = max_cool_permutation(DiagonalState.from_probs(p), (2, 4))
    assert res.U.is_identity()


def test_max_cool_ties_keep_index_order():
    res = max_cool_permutation(DiagonalState.from_probs([0.25] * 4), (2, 2))
    assert res.U.is_identity()


def test_max_cool_mixed_qubit_globally_ordered():
    H_M = Spectrum([0.0, 0.4, 1.1, 2.0])
    tau = thermal_state(H_M, 1.0)
    joint = tensor(DiagonalState.from_probs([0.5, 0.5]), tau)
    res = max_cool_permutation(joint, (2, 4))
    lam = np.sort(np.repeat(tau.probs / 2, 2))[::-1]
    assert res.rho_S.probs[0] == pytest.approx(lam[:4].sum(), rel=1e-15)
    assert np.allclose(res.rho_M.probs, lam[:4] + lam[4:], rtol=1e-15)


def test_max_cool_beats_random_permutations_3x6():
    rng = np.random.default_rng(36)
    p = rng.dirichlet(np.ones(18))
    E_M = np.r_[0.0, np.sort(rng.uniform(0, 2, 5))]
    res = max_cool_permutation(DiagonalState.from_probs(p), (3, 6))
    perms = np.argsort(rng.random((100_000, 18)), axis=1)
    ground = p[perms][:, :6].sum(axis=1)
    assert ground.max() <= res.rho_S.probs[0] + 1e-15
    # reorderings inside each system block keep the target state; none lowers E_M
    out = np.empty(18)
    out[res.U.mapping] = p
    best = float(res.rho_M.probs @ E_M)
    blocks = out.reshape(3, 6)
    for _ in range(2000):
        shuffled = np.array([rng.permutation(b) for b in blocks])
        assert float(shuffled.sum(axis=0) @ E_M) >= best - 1e-15


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 5))
def test_max_cool_majorizes_any_permutation(seed, ds, dm):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(ds * dm))
    space = ProductSpace((ds, dm))
    best = max_cool_permutation(DiagonalState.from_probs(p), space).rho_S.probs
    other = marginal(apply_permutation(DiagonalState.from_probs(p),
                                       PermutationUnitary(rng.permutation(ds * dm), space)),
                     space, 0).probs
    assert np.all(np.cumsum(best) >= np.cumsum(np.sort(other)[::-1]) - 1e-14)


def test_rw_machine_structure():
    m = rw_machine(4, 1.0, beta=2.0)
    assert m.dim == 32 == m.spectrum.dim
    assert math.exp(-2.0 * m.gap) == pytest.approx((1 - 0.25) / 2)
    with pytest.raises(ValueError):
        rw_machine(4, 4.0)
    with pytest.raises(ValueError):
        rw_machine(0, 0.5)


@pytest.mark.parametrize("N", [2, 3, 5, 8])
@pytest.mark.parametrize("modified", [True, False])
def test_rw_compressed_matches_dense(N, modified):
    p0, dE, _, _ = rw_dense(N, 1.0, modified)
    r = rw_protocol(N, 1.0, modified)
    assert r.p0_final == pytest.approx(p0, abs=1e-12)
    assert r.beta_dE_M == pytest.approx(dE, abs=1e-12)


@pytest.mark.parametrize("N", [3, 10, 50, 400])
def test_rw_exact_finite_N_forms(N):
    eps = 1.0 / N
    a = (1 - eps) ** N
    r = rw_protocol(N, 1.0)
    assert r.p0_final == pytest.approx(1 / (1 + eps * a / (1 - a + eps * a * 2.0**-N)), abs=1e-14)
    cost = math.log(2 / (1 - eps)) * (1 - 2 * eps * a / (1 - a + (1 + 2.0**-N) * eps * a))
    assert r.beta_dE_M == pytest.approx(cost, abs=1e-13)


def test_rw_large_N_limits():
    r = rw_protocol(1000, 1.0)
    assert 1000 * r.one_minus_p0 == pytest.approx(1 / (math.e - 1), rel=0.01)
    assert r.beta_dE_M == pytest.approx(math.log(2), abs=1e-3)
    assert r.excess > 0
    big = rw_protocol(20_000, 1.0)
    assert big.one_minus_p0 < r.one_minus_p0
    assert abs(big.beta_dE_M - math.log(2)) < abs(r.beta_dE_M - math.log(2))


@pytest.mark.parametrize("modified", [True, False])
def test_rw_respects_landauer(modified):
    for N in (5, 20, 100):
        r = rw_protocol(N, 1.0, modified)
        assert r.beta_dE_M >= r.dS_tilde_S


def test_halving_segments_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        counts = list(rng.integers(1, 6, size=rng.integers(1, 6)))
        if sum(counts) % 2:
            counts[-1] += 1
        run = np.repeat(np.arange(len(counts)), counts)
        d = run.size
        rebuilt = []
        for length, ri, ra, rb in halving_segments(counts):
            rebuilt += [(ri, ra, rb)] * length
        i = np.arange(d)
        expected = list(zip(run[i], run[i // 2], run[d // 2 + i // 2]))
        assert rebuilt == [tuple(map(int, x)) for x in expected]


def test_halving_segments_huge_counts():
    segs = list(halving_segments([2**n for n in range(200)] + [2**200 + 1]))
    assert sum(s[0] for s in segs) == 2**201
    assert len(segs) < 1000


def test_truncate_two_level_tail():
    H = Spectrum([0.0, 0.5, 3.0, 3.0])
    T = truncate_machine(H, 1, 2.0)
    assert T.energies[-1] == pytest.approx(3.0 - math.log(2) / 2.0)
    assert log_partition(T, 2.0) == pytest.approx(log_partition(H, 2.0), abs=1e-15)
    assert not T.ordered


def test_truncate_compressed_and_errors():
    H = Spectrum([0.0, 1.0, 2.0, 3.0], [1, 2, 4, 8])
    T = truncate_machine(H, 1, 1.3)
    assert T.multiplicities == (1, 2, 1)
    assert log_partition(T, 1.3) == pytest.approx(log_partition(H, 1.3), abs=1e-14)
    with pytest.raises(ValueError):
        truncate_machine(H, 3, 1.0)
    with pytest.raises(ValueError):
        truncate_machine(H, 1, 0.0)


def test_compose_swap_with_itself():
    S = factor_swap(ProductSpace((2, 2)), 0, 1)
    assert compose_steps([S, S]).is_identity()
    with pytest.raises(ValueError):
        compose_steps([])


def test_composed_linear_steps_match_sequential_run():
    beta, beta_max, N = 1.0, 4.0, 3
    eps = (beta_max - beta) / (N * beta)
    spectra = [QUBIT] + [Spectrum([0.0, 1.0 + n * eps]) for n in range(1, N + 1)]
    space = ProductSpace((2,) * (N + 1))
    steps = [factor_swap(space, 0, n) for n in range(1, N + 1)]
    U = compose_steps(steps)
    joint = tensor(*(thermal_state(h, beta) for h in spectra))
    final = marginal(apply_permutation(joint, U), space, 0)
    t = linear_sequence_protocol(QUBIT, beta, beta_max, N)
    assert np.allclose(final.probs, t.final_state.probs, rtol=1e-14)
    assert all(effective_dimension(U) >= effective_dimension(s) for s in steps)


def test_compose_order_is_chronological():
    a = PermutationUnitary([1, 0, 2])
    b = PermutationUnitary([0, 2, 1])
    # state 0 -> 1 under a, then 1 -> 2 under b
    assert compose_steps([a, b]).mapping[0] == 2
