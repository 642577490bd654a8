from itertools import permutations
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labelfree.errors import InsufficientSamples, ParamOutOfRange
from labelfree.moments import (population_moments, sample_covariance, sample_means,
                               sample_moments, sample_tensor, triple_list, triple_rank)
from oracles import enumerate_moments, synthetic

BAL = [1, -1, 1, -1]


def test_sample_means():
    Z = np.array([[1, 1, 1, 1], BAL, [1, 1, -1, 1]])
    np.testing.assert_allclose(sample_means(Z), [1.0, 0.0, 0.5])
    np.testing.assert_allclose(sample_means(np.array([[1, 1, -1]] * 3))[0], 1 / 3)


def test_sample_covariance_hand_values():
    same = sample_covariance(np.array([BAL, BAL, [1, 1, 1, 1]]))
    assert same[0, 1] == pytest.approx(4 / 3)
    assert same[0, 2] == 0.0
    flipped = sample_covariance(np.array([BAL, [-1, 1, -1, 1], BAL]))
    assert flipped[0, 1] == pytest.approx(-4 / 3)
    np.testing.assert_array_equal(same, same.T)


def test_covariance_needs_two_samples():
    with pytest.raises(InsufficientSamples):
        sample_covariance(np.array([[1], [1], [-1]]))


def test_sample_tensor_hand_values():
    assert sample_tensor(np.array([BAL, BAL, BAL]))[0] == pytest.approx(0.0, abs=1e-15)
    assert sample_tensor(np.array([[1, 1, -1], [1, -1, 1], [-1, 1, 1]]))[0] == pytest.approx(-16 / 27)
    T = sample_tensor(np.array([[1, 1, 1, 1], BAL, [1, 1, -1, 1]]))
    assert T[0] == 0.0


def test_sample_tensor_matches_einsum():
    rng = np.random.default_rng(3)
    z = rng.choice([-1, 1], size=(6, 40))
    x = z - z.mean(axis=1, keepdims=True)
    full = np.einsum("il,jl,kl->ijk", x, x, x) / z.shape[1]
    T = sample_tensor(z)
    assert T.shape == (comb(6, 3),)
    for r, (i, j, k) in enumerate(triple_list(6)):
        assert T[r] == pytest.approx(full[i, j, k], abs=1e-14)


def test_tensor_permutation_symmetry():
    rng = np.random.default_rng(5)
    ms = sample_moments(rng.choice([-1, 1], size=(5, 30)))
    for i, j, k in triple_list(5):
        vals = {ms.t(*p) for p in permutations((i, j, k))}
        assert len(vals) == 1


def test_triple_rank_is_inverse_of_list():
    for m in (3, 4, 9):
        for r, t in enumerate(triple_list(m)):
            assert triple_rank(*t, m) == r


def test_population_symmetric_balanced():
    pm = population_moments([0.75] * 4, [0.75] * 4, 0.0)
    np.testing.assert_allclose(pm.mu, 0.0, atol=1e-15)
    off = pm.cov[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 0.25)
    np.testing.assert_allclose(pm.tensor, 0.0, atol=1e-15)


def test_population_tensor_value():
    pm = population_moments([0.75] * 3, [0.75] * 3, 0.6)
    _, _, third = enumerate_moments([0.75] * 3, [0.75] * 3, 0.6, [0, 1, 2])
    assert third == pytest.approx(-0.096, abs=1e-12)  # enumeration oracle
    assert pm.tensor[0] == pytest.approx(-0.096, abs=1e-12)


def test_population_mean_and_v():
    pm = population_moments([0.9] * 3, [0.7] * 3, 0.5)
    mean, cov, _ = enumerate_moments([0.9] * 3, [0.7] * 3, 0.5, [0, 1, 2])
    np.testing.assert_allclose(pm.mu, 0.5, atol=1e-12)
    np.testing.assert_allclose(mean, 0.5, atol=1e-12)
    assert np.sqrt(pm.cov[0, 1]) == pytest.approx(0.519615, abs=1e-6)
    assert np.sqrt(cov[0, 1]) == pytest.approx(0.519615, abs=1e-6)
    np.testing.assert_allclose(np.diag(pm.cov), np.diag(cov), atol=1e-12)


params = st.floats(0.05, 0.95)


@settings(max_examples=40, deadline=None)
@given(st.lists(params, min_size=3, max_size=3), st.lists(params, min_size=3, max_size=3),
       st.floats(-0.9, 0.9))
def test_population_matches_enumeration(psi, eta, b):
    pm = population_moments(psi, eta, b)
    mean, cov, third = enumerate_moments(psi, eta, b, [0, 1, 2])
    np.testing.assert_allclose(pm.mu, mean, atol=1e-12)
    np.testing.assert_allclose(pm.cov, cov, atol=1e-12)
    assert pm.tensor[0] == pytest.approx(third, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.lists(params, min_size=4, max_size=4), st.lists(params, min_size=4, max_size=4))
def test_population_tensor_zero_at_balanced_classes(psi, eta):
    assert np.all(population_moments(psi, eta, 0.0).tensor == 0)


def test_population_rejects_bad_params():
    with pytest.raises(ParamOutOfRange):
        population_moments([1.0, 0.5, 0.5], [0.5] * 3, 0.0)
    with pytest.raises(ParamOutOfRange):
        population_moments([0.6] * 3, [0.6] * 3, 1.0)


def test_moment_invariants_on_data():
    rng = np.random.default_rng(0)
    z, _ = synthetic(rng, [0.7, 0.6, 0.8, 0.65], [0.6, 0.75, 0.7, 0.55], 0.2, 500)
    ms = sample_moments(z)
    assert np.all(np.abs(ms.mu) <= 1)
    assert np.all((np.diag(ms.cov) >= 0) & (np.diag(ms.cov) <= 1 + 1 / (ms.n - 1)))
    assert len(ms.tensor) == comb(4, 3)


def test_covariance_converges_to_rank_one():
    rng = np.random.default_rng(11)
    psi = rng.uniform(0.5, 0.8, 6)
    eta = rng.uniform(0.5, 0.8, 6)
    b = 0.3
    n = 100_000
    z, _ = synthetic(rng, psi, eta, b, n)
    cov = sample_covariance(z)
    pm = population_moments(psi, eta, b)
    off = ~np.eye(6, dtype=bool)
    # standard error of a covariance of +-1 variables is at most 1/sqrt(n)
    assert np.max(np.abs(cov[off] - pm.cov[off])) <= 5 / np.sqrt(n)
