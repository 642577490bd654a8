import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from labelfree.errors import DegenerateDesign
from labelfree.imbalance import (
    alpha_from_b, alpha_least_squares, b_from_alpha, b_likelihood_from_patterns,
    b_tensor_from_moments, column_patterns, estimate_b_likelihood, estimate_b_tensor,
    likelihood_grid, pattern_probabilities, population_restricted_loglik,
    restricted_log_likelihood, restricted_loglik_curve,
)
from labelfree.moments import population_moments, triple_products
from labelfree.data import PredictionMatrix
from labelfree.simulation import (SyntheticSpec, derive_seed, draw_accuracies, fit_loglog_slope,
                                  generate)

from oracles import brute_restricted_loglik


def test_alpha_fixed_point():
    v = np.array([0.6, 0.4, 0.2, 0.3])
    T = -1.5 * triple_products(v)
    assert alpha_least_squares(T, v) == pytest.approx(-1.5, abs=1e-12)


def test_alpha_zero_tensor():
    v = np.array([0.6, 0.4, 0.2, 0.3])
    assert alpha_least_squares(np.zeros(4), v) == 0.0


def test_alpha_degenerate_design():
    with pytest.raises(DegenerateDesign):
        alpha_least_squares(np.zeros(4), np.array([0, 0, 0, 1e-7]))


@pytest.mark.parametrize("alpha,b", [(0.0, 0.0), (-1.5, 0.6), (1.5, -0.6)])
def test_b_from_alpha_examples(alpha, b):
    assert b_from_alpha(alpha) == pytest.approx(b, abs=1e-15)


def test_inverse_identity_grid():
    for b in np.linspace(-0.95, 0.95, 381):
        assert abs(b_from_alpha(-2 * b / np.sqrt(1 - b * b)) - b) <= 1e-12
        assert abs(b_from_alpha(alpha_from_b(b)) - b) <= 1e-12


def test_population_tensor_seam():
    psi = np.array([0.8, 0.7, 0.65, 0.9, 0.6, 0.75])
    eta = np.array([0.6, 0.85, 0.7, 0.55, 0.8, 0.7])
    est = b_tensor_from_moments(population_moments(psi, eta, 0.6))
    assert est.method == "tensor" and est.alpha is not None
    assert est.b == pytest.approx(0.6, abs=1e-10)


def test_tensor_clamps_to_domain():
    psi = np.array([0.95, 0.9, 0.92, 0.97])
    eta = np.array([0.95, 0.9, 0.92, 0.97])
    est = b_tensor_from_moments(population_moments(psi, eta, 0.98), delta=0.05)
    assert est.b == pytest.approx(0.95)


def test_loglik_matches_brute_force_hand_case():
    Z = np.array([[1, -1], [1, 1], [-1, -1]])
    mu = np.array([0.1, 0.3, -0.2])
    v = np.array([0.5, 0.4, 0.3])
    for bt in (-0.5, 0.0, 0.3, 0.7):
        got = restricted_log_likelihood(PredictionMatrix(Z), mu, v, bt, 1e-3)
        assert got == pytest.approx(brute_restricted_loglik(Z, mu, v, bt, 1e-3), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_loglik_brute_force_random(seed):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(3, 6), rng.integers(1, 51)
    Z = rng.choice([-1, 1], size=(m, n))
    mu = rng.uniform(-0.5, 0.5, m)
    v = rng.uniform(0.0, 0.6, m)
    bt = rng.uniform(-0.9, 0.9)
    got = restricted_log_likelihood(PredictionMatrix(Z), mu, v, bt, 1e-3)
    assert got == pytest.approx(brute_restricted_loglik(Z, mu, v, bt, 1e-3), abs=1e-12)


def test_uniform_model_value():
    rng = np.random.default_rng(0)
    Z = PredictionMatrix(rng.choice([-1, 1], size=(5, 40)))
    got = restricted_log_likelihood(Z, np.zeros(5), np.zeros(5), 0.0)
    assert got == pytest.approx(-5 * np.log(2), abs=1e-12)


def test_column_permutation_invariance():
    rng = np.random.default_rng(1)
    Z = rng.choice([-1, 1], size=(4, 30))
    mu, v = rng.uniform(-0.3, 0.3, 4), rng.uniform(0.1, 0.5, 4)
    a = restricted_log_likelihood(PredictionMatrix(Z), mu, v, 0.2)
    b = restricted_log_likelihood(PredictionMatrix(Z[:, rng.permutation(30)]), mu, v, 0.2)
    assert a == pytest.approx(b, abs=1e-13)


def test_column_patterns_counts():
    Z = PredictionMatrix([[1, 1, -1], [1, 1, 1], [-1, -1, -1]])
    patterns, counts = column_patterns(Z)
    assert counts.sum() == 3
    assert len(patterns) == 2


def test_pattern_probabilities_sum_to_one():
    _, probs = pattern_probabilities([0.7, 0.6, 0.8, 0.55], [0.65, 0.9, 0.6, 0.7], 0.2)
    assert probs.sum() == pytest.approx(1.0, abs=1e-14)


def test_grid_covers_domain():
    g = likelihood_grid(0.05, 0.001)
    assert len(g) == 1901
    assert g[0] == pytest.approx(-0.95) and g[-1] == pytest.approx(0.95)


@pytest.mark.parametrize("b", [-0.4, 0.0, 0.3, 0.6])
def test_population_likelihood_seam(b):
    psi = np.array([0.8, 0.7, 0.65, 0.9, 0.6, 0.75, 0.7, 0.55, 0.8, 0.62])
    eta = np.array([0.6, 0.85, 0.7, 0.55, 0.8, 0.7, 0.66, 0.77, 0.58, 0.73])
    pm = population_moments(psi, eta, b)
    v = np.sqrt(1 - b * b) * (psi + eta - 1)
    patterns, probs = pattern_probabilities(psi, eta, b)
    est = b_likelihood_from_patterns(patterns, probs, pm.mu, v)
    assert est.b == pytest.approx(b, abs=1e-4)
    assert est.curve.shape == (1901, 2)


def test_population_curve_peaks_at_truth():
    psi = np.array([0.8, 0.7, 0.65, 0.9])
    eta = np.array([0.6, 0.85, 0.7, 0.55])
    grid = np.linspace(-0.9, 0.9, 181)
    g = population_restricted_loglik(psi, eta, 0.3, grid)
    assert abs(grid[np.argmax(g)] - 0.3) < 1e-9


def test_likelihood_negation_symmetry():
    psi, eta = draw_accuracies(8, 4)
    Z, _ = generate(SyntheticSpec(n=3000, b=0.3, psi=psi, eta=eta, seed=9))
    a = estimate_b_likelihood(Z)
    b = estimate_b_likelihood(Z.negated())
    assert b.b == pytest.approx(-a.b, abs=2e-3)


def test_tensor_negation_symmetry():
    psi, eta = draw_accuracies(8, 4)
    Z, _ = generate(SyntheticSpec(n=3000, b=0.3, psi=psi, eta=eta, seed=9))
    assert estimate_b_tensor(Z.negated()).b == pytest.approx(-estimate_b_tensor(Z).b, abs=1e-10)


def test_small_n_domain():
    for seed in range(10):
        psi, eta = draw_accuracies(6, seed)
        Z, _ = generate(SyntheticSpec(n=50, b=0.0, psi=psi, eta=eta, seed=seed))
        est = estimate_b_likelihood(Z, delta=0.05)
        assert -0.95 <= est.b <= 0.95
        assert est.b >= est.curve[np.argmax(est.curve[:, 1]), 0] - 1e-3


def test_likelihood_ties_go_to_smaller_b():
    # a uniform model gives a flat curve; the argmax must be the left end
    patterns = np.array([[1, 1, 1], [-1, -1, -1]], dtype=np.int8)
    est = b_likelihood_from_patterns(patterns, [1.0, 1.0], np.zeros(3), np.zeros(3))
    assert est.b == pytest.approx(-0.95)


def test_curve_is_vectorized_consistently():
    rng = np.random.default_rng(3)
    Z = PredictionMatrix(rng.choice([-1, 1], size=(5, 60)))
    mu, v = rng.uniform(-0.2, 0.2, 5), rng.uniform(0.1, 0.5, 5)
    patterns, counts = column_patterns(Z)
    grid = np.linspace(-0.9, 0.9, 7)
    curve = restricted_loglik_curve(patterns, counts, mu, v, grid, chunk_cells=10)
    single = [restricted_log_likelihood(Z, mu, v, g) for g in grid]
    np.testing.assert_allclose(curve, single, atol=1e-13)


def test_balanced_tensor_monte_carlo():
    errs = []
    for t in range(30):
        seed = derive_seed(21, t)
        psi, eta = draw_accuracies(10, seed)
        Z, _ = generate(SyntheticSpec(n=10_000, b=0.0, psi=psi, eta=eta, seed=seed))
        errs.append(abs(estimate_b_tensor(Z).b))
    assert np.mean(errs) <= 0.08


@pytest.mark.slow
def test_tensor_mse_slope():
    ns = [1250, 2500, 5000, 10_000, 20_000, 40_000]
    points = []
    for ni, n in enumerate(ns):
        sq = []
        for t in range(30):
            seed = derive_seed(7, ni, t)
            psi, eta = draw_accuracies(10, seed)
            Z, _ = generate(SyntheticSpec(n=n, b=0.3, psi=psi, eta=eta, seed=seed))
            sq.append((estimate_b_tensor(Z).b - 0.3) ** 2)
        points.append((n, np.mean(sq)))
    assert -1.3 <= fit_loglog_slope(points) <= -0.7
