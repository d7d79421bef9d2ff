import numpy as np
import pytest

from qwalk.correlations import distinguishable_correlations, quantum_correlations
from qwalk.nonclassicality import (
    CountMatrix,
    bound_violation,
    sample_counts,
    violation_matrix,
    violation_significance,
)

from conftest import random_unitary


def exact_counts(c, total):
    return CountMatrix(np.rint(c.gamma * total).astype(np.int64))


def test_hom_violation_values(hom_coupler):
    vq = violation_matrix(quantum_correlations(hom_coupler, 0, 1)).v
    vd = violation_matrix(distinguishable_correlations(hom_coupler, 0, 1)).v
    assert vq[0, 1] == pytest.approx(1 / 3, abs=1e-12)
    assert vd[0, 1] == pytest.approx(-1 / 3, abs=1e-12)
    assert vq[0, 0] == vq[1, 1] == 0.0


def test_zero_matrix_gives_zero_violation():
    np.testing.assert_array_equal(violation_matrix(np.zeros((4, 4))).v, np.zeros((4, 4)))


def test_distinguishable_never_violates(rng):
    worst = -np.inf
    for _ in range(300):
        n = rng.integers(2, 9)
        u = random_unitary(rng, n)
        q, r = rng.choice(n, 2, replace=False)
        worst = max(worst, violation_matrix(distinguishable_correlations(u, q, r)).v.max())
    assert worst <= 1e-12


def test_sample_counts_concentrated():
    gamma = np.zeros((3, 3))
    gamma[0, 2] = gamma[2, 0] = 1.0
    counts = sample_counts(gamma, 1000, seed=4)
    mask = np.ones((3, 3), bool)
    mask[0, 2] = mask[2, 0] = False
    assert np.all(counts.counts[mask] == 0)
    assert counts.counts[0, 2] == counts.counts[2, 0] == counts.total
    assert 850 < counts.total < 1150


def test_sample_counts_deterministic(swiss_propagator):
    c = quantum_correlations(swiss_propagator, 0, 4)
    a = sample_counts(c, 1e5, seed=11)
    b = sample_counts(c, 1e5, seed=11)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, sample_counts(c, 1e5, seed=12).counts)


def test_sample_counts_mean(hom_coupler):
    c = distinguishable_correlations(hom_coupler, 0, 1)
    budget, seeds = 50.0, 10_000
    draws = np.array([sample_counts(c, budget, s).counts for s in range(seeds)], dtype=float)
    mean = draws.mean(axis=0)
    stderr = np.sqrt(budget * c.gamma / seeds)
    assert np.all(np.abs(mean - budget * c.gamma) <= 3 * stderr)


def test_sample_counts_converge(swiss_propagator):
    c = quantum_correlations(swiss_propagator, 0, 4)
    counts = sample_counts(c, 1e7, seed=5)
    assert np.max(np.abs(counts.counts / 1e7 - c.gamma)) < 1e-3


def test_sample_counts_rejects_empty_budget(hom_coupler):
    with pytest.raises(ValueError):
        sample_counts(quantum_correlations(hom_coupler, 0, 1), 0, seed=1)


def test_count_matrix_validation():
    with pytest.raises(ValueError):
        CountMatrix([[1, 2], [3, 1]])
    with pytest.raises(ValueError):
        CountMatrix([[-1, 0], [0, 1]])
    with pytest.raises(ValueError):
        CountMatrix([[0.5, 0], [0, 1]])
    assert CountMatrix([[1, 2], [2, 3]]).total == 6


def test_significance_of_hom_peak(hom_coupler):
    counts = exact_counts(quantum_correlations(hom_coupler, 0, 1), 1e6)
    rep = violation_significance(counts, resamples=2000, seed=3)
    assert rep.v[0, 1] == pytest.approx(1 / 3, abs=1e-9)
    assert rep.sigma[0, 1] < 1e-3
    assert rep.sigmas_violated[0, 1] > 100
    assert rep.significant() == [(0, 1)]
    assert rep.metadata["rng"] == "numpy.random.PCG64"


def test_distinguishable_counts_never_significant(rng):
    for k in range(100):
        n = rng.integers(2, 7)
        u = random_unitary(rng, n)
        q, r = rng.choice(n, 2, replace=False)
        counts = sample_counts(distinguishable_correlations(u, q, r), 1e4, seed=k)
        rep = violation_significance(counts, resamples=200, seed=k)
        assert rep.significant(3.0) == []


def test_single_count_not_significant():
    counts = np.zeros((3, 3), dtype=int)
    counts[0, 1] = counts[1, 0] = 1
    rep = violation_significance(CountMatrix(counts), resamples=500, seed=0)
    assert np.all(np.isfinite(rep.v))
    assert rep.v[0, 1] == -1.0
    assert np.all(rep.sigmas_violated == 0)


def test_scale_invariance(swiss_propagator):
    counts = sample_counts(quantum_correlations(swiss_propagator, 0, 4), 1e5, seed=1)
    base = violation_significance(counts, resamples=100, seed=0).v
    scaled = violation_significance(CountMatrix(7 * counts.counts), resamples=100, seed=0).v
    np.testing.assert_allclose(scaled, base, atol=1e-15)
    assert np.array_equal(np.sign(scaled), np.sign(base))


def test_bootstrap_sigma_scales_with_budget(swiss_propagator):
    c = quantum_correlations(swiss_propagator, 0, 4)
    iu = np.triu_indices(9, k=1)
    small = violation_significance(exact_counts(c, 1e5), resamples=4000, seed=1).sigma[iu]
    large = violation_significance(exact_counts(c, 4e5), resamples=4000, seed=1).sigma[iu]
    ok = small > 1e-6
    ratio = large[ok] / small[ok]
    assert np.all(np.abs(ratio - 0.5) <= 0.1)


def test_propagation_agrees_with_bootstrap(swiss_propagator):
    counts = exact_counts(quantum_correlations(swiss_propagator, 0, 4), 1e6)
    boot = violation_significance(counts, resamples=4000, seed=2)
    prop = violation_significance(counts, method="propagation")
    d = np.diag(counts.counts)
    well = (d[:, None] > 1000) & (d[None, :] > 1000) & ~np.eye(9, dtype=bool)
    np.testing.assert_allclose(prop.sigma[well], boot.sigma[well], rtol=0.1)
    assert prop.metadata["resamples"] is None


def test_bootstrap_reproducible(swiss_propagator):
    counts = sample_counts(quantum_correlations(swiss_propagator, 0, 4), 1e4, seed=0)
    a = violation_significance(counts, resamples=1500, seed=9)
    b = violation_significance(counts, resamples=1500, seed=9)
    assert np.array_equal(a.sigma, b.sigma)


def test_significance_errors(hom_coupler):
    with pytest.raises(ValueError):
        violation_significance(CountMatrix(np.zeros((2, 2), int)))
    counts = exact_counts(quantum_correlations(hom_coupler, 0, 1), 100)
    with pytest.raises(ValueError):
        violation_significance(counts, resamples=50)
    with pytest.raises(ValueError):
        violation_significance(counts, method="jackknife")


def test_bound_violation_batched(rng):
    stack = rng.uniform(size=(5, 4, 4))
    stack = stack + np.swapaxes(stack, 1, 2)
    batched = bound_violation(stack)
    for k in range(5):
        np.testing.assert_array_equal(batched[k], bound_violation(stack[k]))
