import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from curieweiss.exactdist import PmfTable, exact_pmf, moments
from curieweiss.mcmc import (
    ChainConfig, ChainState, acceptance_probability, delta_energy, run, run_counts, step, tv_distance,
)
from curieweiss.model import GroupSizes, ModelSpec, hamiltonian, log_weight

from conftest import HETERO_J, random_pd


def random_state(rng, spec):
    return ChainState(tuple(int(rng.integers(0, k + 1)) for k in spec.groups.sizes))


def test_chain_state_roundtrip():
    spec = ModelSpec.homogeneous([3, 4], 0.2)
    st_ = ChainState((1, 4))
    m = st_.to_magnetization(spec)
    assert m.sums == (-1, 4)
    assert ChainState.from_magnetization(spec, m) == st_


def test_config_defaults_and_validation():
    assert ChainConfig(1, 10).resolved(20) == (2000, 21)
    assert ChainConfig(1, 10).resolved(11) == (1100, 11)
    assert ChainConfig(1, 10, burn_in=0, thin=3).resolved(20) == (0, 3)
    with pytest.raises(ValueError):
        ChainConfig(1, 10, thin=0).resolved(5)
    with pytest.raises(ValueError):
        run(ModelSpec.homogeneous([3], 0.2), ChainConfig(1, 0))


def test_beta_zero_accepts_everything(rng):
    spec = ModelSpec.homogeneous([5, 3], 0.0)
    gen = np.random.Generator(np.random.PCG64(4))
    state = ChainState((2, 1))
    for _ in range(200):
        new = step(spec, state, gen)
        assert sum(abs(a - b) for a, b in zip(new.counts, state.counts)) == 1
        state = new
    for _ in range(20):
        s = random_state(rng, spec)
        for lam in range(2):
            assert acceptance_probability(spec, s, lam, 2) == 1.0


def test_delta_energy_against_hamiltonian(rng):
    specs = [ModelSpec.homogeneous([6, 5], 0.7), ModelSpec.from_matrix([4, 7], HETERO_J),
             ModelSpec.from_matrix([3, 2, 5], random_pd(rng, 3))]
    for spec in specs:
        for _ in range(50):
            s = random_state(rng, spec)
            lam = int(rng.integers(spec.d))
            k = s.counts[lam]
            for delta in (-2, 2):
                if not 0 <= k + delta // 2 <= spec.groups.sizes[lam]:
                    continue
                counts = list(s.counts)
                counts[lam] += delta // 2
                t = ChainState(tuple(counts))
                ref = hamiltonian(spec, t.to_magnetization(spec)) - hamiltonian(spec, s.to_magnetization(spec))
                assert delta_energy(spec, s, lam, delta) == pytest.approx(ref, abs=1e-13)


def _count_transition(spec, s, lam, delta):
    """Probability that one chain step moves group lam's sum by delta."""
    k, nl = s.counts[lam], spec.groups.sizes[lam]
    movers = k if delta < 0 else nl - k
    return movers / spec.n * acceptance_probability(spec, s, lam, delta)


def test_detailed_balance(rng):
    specs = [ModelSpec.from_matrix([10, 10], HETERO_J), ModelSpec.homogeneous([8], 0.5),
             ModelSpec.from_matrix([4, 6, 3], random_pd(rng, 3, 0.5))]
    worst_spin = worst_count = 0.0
    for spec in specs:
        for _ in range(200):
            s = random_state(rng, spec)
            lam = int(rng.integers(spec.d))
            delta = -2 if s.counts[lam] > 0 else 2
            counts = list(s.counts)
            counts[lam] += delta // 2
            t = ChainState(tuple(counts))
            dH = delta_energy(spec, s, lam, delta)
            # spin level: A(s->t)/A(t->s) = exp(-dH)
            ratio = acceptance_probability(spec, s, lam, delta) / acceptance_probability(spec, t, lam, -delta)
            worst_spin = max(worst_spin, abs(ratio / math.exp(-dH) - 1))
            # count level: pi(s) P(s->t) = pi(t) P(t->s), pi including multiplicities
            ls = log_weight(spec, s.to_magnetization(spec))
            lt = log_weight(spec, t.to_magnetization(spec))
            fwd = _count_transition(spec, s, lam, delta)
            bwd = _count_transition(spec, t, lam, -delta)
            worst_count = max(worst_count, abs(math.exp(ls - lt) * fwd / bwd - 1))
    assert worst_spin <= 1e-12
    assert worst_count <= 1e-12


def test_step_matches_compiled_kernel():
    spec = ModelSpec.from_matrix([5, 4], HETERO_J)
    seed, steps = 99, 3000
    gen = np.random.Generator(np.random.PCG64(seed))
    state = ChainState((2, 2))
    visits = np.zeros(spec.groups.num_states, dtype=np.int64)
    for t in range(steps):
        state = step(spec, state, gen)
        visits[state.counts[0] * 5 + state.counts[1]] += 1
    hist, final = run_counts(spec, ChainConfig(seed, steps, burn_in=0, thin=1))
    assert final == state
    assert np.array_equal(hist, visits)


def test_seeded_determinism():
    spec = ModelSpec.from_matrix([6, 5], HETERO_J)
    a = run(spec, ChainConfig(5, 2000))
    b = run(spec, ChainConfig(5, 2000))
    c = run(spec, ChainConfig(6, 2000))
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()
    assert a.to_csv().startswith("# seed=5 burn_in=1100 thin=11 samples=2000\ns_1,s_2,log_prob\n")
    assert abs(a.probs.sum() - 1) <= 1e-12


def test_tv_d1():
    spec = ModelSpec.homogeneous([20], 0.5)
    emp = run(spec, ChainConfig(2024, 10**6))
    assert tv_distance(emp, exact_pmf(spec)) < 0.01


def test_empirical_mean_near_zero():
    spec = ModelSpec.from_matrix([10, 10], HETERO_J)
    samples = 2 * 10**5
    emp = run(spec, ChainConfig(3, samples))
    mean, cov = moments(emp)
    assert np.all(np.abs(mean) <= 4 * np.sqrt(np.diag(cov)) / math.sqrt(samples) * 3)


def test_tv_shrinks_with_more_samples():
    spec = ModelSpec.homogeneous([10, 10], 0.5)
    ex = exact_pmf(spec)
    tv5 = tv_distance(run(spec, ChainConfig(77, 10**5)), ex)
    tv6 = tv_distance(run(spec, ChainConfig(77, 10**6)), ex)
    assert tv6 < tv5


def test_tv_distance_examples():
    g = GroupSizes((2,))
    a = exact_pmf(ModelSpec.homogeneous([2], 0.3))
    assert tv_distance(a, a) == 0.0
    with np.errstate(divide="ignore"):
        p = PmfTable(g, np.log([1.0, 0.0, 0.0]), 0.0)
        q = PmfTable(g, np.log([0.0, 0.0, 1.0]), 0.0)
    assert tv_distance(p, q) == 1.0
    with pytest.raises(ValueError):
        tv_distance(a, exact_pmf(ModelSpec.homogeneous([3], 0.3)))


def test_tv_beta_zero_n10():
    spec = ModelSpec.homogeneous([10], 0.0)
    assert tv_distance(run(spec, ChainConfig(8, 10**6)), exact_pmf(spec)) < 0.01


def test_even_thinning_is_periodic_at_beta_zero():
    # every move is accepted, so an even interval keeps the parity of sum(k)
    spec = ModelSpec.homogeneous([10], 0.0)
    emp = run(spec, ChainConfig(8, 10**4, thin=10))
    assert np.all(emp.probs[0::2] == 0) or np.all(emp.probs[1::2] == 0)


@given(st.integers(0, 2**63), st.integers(1, 40))
def test_counts_stay_in_range(seed, samples):
    spec = ModelSpec.from_matrix([3, 2], HETERO_J)
    hist, final = run_counts(spec, ChainConfig(seed, samples, burn_in=7, thin=2))
    assert hist.sum() == samples
    assert all(0 <= k <= n for k, n in zip(final.counts, spec.groups.sizes))
