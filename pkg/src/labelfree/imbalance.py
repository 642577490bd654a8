"""Class-imbalance estimation.

Two routes are provided. The tensor route fits the scalar ``alpha`` in
``T_ijk = alpha v_i v_j v_k`` by least squares and maps it to ``b``. The
likelihood route scans the restricted log-likelihood, in which ``psi`` and
``eta`` are slaved to the hypothesized ``b``, over a grid and refines the best
grid point by golden-section search.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .accuracies import DEFAULT_EPS, clip_accuracies, psi_eta_from_b
from .data import PredictionMatrix, as_prediction_matrix
from .errors import DegenerateDesign, ParamOutOfRange
from .moments import MomentSet, sample_covariance, sample_means, sample_tensor, triple_products
from .spectral import SpectralVector, estimate_v

DEFAULT_DELTA = 0.05
DEFAULT_GRID_STEP = 1e-3
DESIGN_FLOOR = 1e-12
REFINE_WIDTH = 1e-6
TIE_RTOL = 1e-12  # grid values this close to the maximum count as ties
_GOLDEN = (np.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ImbalanceEstimate:
    b: float
    method: str
    delta: float
    alpha: Optional[float] = None
    curve: Optional[np.ndarray] = None  # rows of (b_tilde, G_n)
    spectral: Optional[SpectralVector] = None
    mu: Optional[np.ndarray] = None


def _check_delta(delta: float) -> None:
    if not 0 < delta < 0.5:
        raise ParamOutOfRange(f"delta must lie in (0, 0.5), got {delta}")


def alpha_least_squares(tensor, v) -> float:
    """Closed-form least-squares fit of ``tensor ~ alpha * v (x) v (x) v`` over ``i<j<k``.

    Raises:
        DegenerateDesign: if ``sum (v_i v_j v_k)^2 <= 1e-12``.
    """
    tensor = np.asarray(tensor, dtype=float)
    design = triple_products(v)
    if design.shape != tensor.shape:
        raise ValueError(f"tensor has {tensor.size} entries, expected {design.size}")
    denom = float(design @ design)
    if denom <= DESIGN_FLOOR:
        raise DegenerateDesign(
            f"sum of squared triple products is {denom:.3g}; classifiers look random "
            "and the tensor cannot identify the class imbalance")
    return float(tensor @ design) / denom


def b_from_alpha(alpha: float) -> float:
    """Invert ``alpha = -2b / sqrt(1 - b^2)``."""
    return float(-alpha / np.sqrt(4 + alpha * alpha))


def alpha_from_b(b: float) -> float:
    return float(-2 * b / np.sqrt(1 - b * b))


def b_tensor_from_moments(moments: MomentSet, delta: float = DEFAULT_DELTA,
                          spectral: Optional[SpectralVector] = None) -> ImbalanceEstimate:
    """Tensor route on precomputed moments (sample or population)."""
    _check_delta(delta)
    sv = spectral if spectral is not None else estimate_v(moments.cov)
    alpha = alpha_least_squares(moments.tensor, sv.v)
    b = float(np.clip(b_from_alpha(alpha), -1 + delta, 1 - delta))
    return ImbalanceEstimate(b=b, method="tensor", delta=delta, alpha=alpha,
                             spectral=sv, mu=moments.mu)


def estimate_b_tensor(Z: PredictionMatrix, delta: float = DEFAULT_DELTA) -> ImbalanceEstimate:
    """Class imbalance from the third-order covariance tensor.

    Pipeline: covariance, rank-one vector with resolved sign, tensor,
    least-squares ``alpha``, ``b = -alpha / sqrt(4 + alpha^2)``, then clamp to
    ``[-1 + delta, 1 - delta]``.
    """
    Z = as_prediction_matrix(Z)
    moments = MomentSet(mu=sample_means(Z), cov=sample_covariance(Z),
                        tensor=sample_tensor(Z), n=Z.n)
    return b_tensor_from_moments(moments, delta)


# -- restricted likelihood ---------------------------------------------------

def column_patterns(Z: PredictionMatrix):
    """Distinct columns of ``Z`` and how often each occurs.

    Returns ``(patterns, counts)`` with ``patterns`` of shape ``(U, m)``.
    """
    Z = as_prediction_matrix(Z)
    patterns, counts = np.unique(Z.entries.T, axis=0, return_counts=True)
    return patterns.astype(np.int8), counts.astype(float)


def pattern_probabilities(psi, eta, b: float):
    """All ``2^m`` label patterns with their probability under the model."""
    psi = np.asarray(psi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    m = len(psi)
    patterns = np.array(list(product((-1, 1), repeat=m)), dtype=np.int8)
    pos = patterns == 1
    p_given_pos = np.prod(np.where(pos, psi, 1 - psi), axis=1)
    p_given_neg = np.prod(np.where(pos, 1 - eta, eta), axis=1)
    probs = (1 + b) / 2 * p_given_pos + (1 - b) / 2 * p_given_neg
    return patterns, probs


def _pattern_loglik(patterns, weights, psi, eta, b_tilde) -> np.ndarray:
    """Weighted mean log mixture probability, vectorized over rows of psi/eta.

    ``psi``/``eta`` have shape ``(G, m)`` and ``b_tilde`` shape ``(G,)``.
    """
    pos = (patterns == 1).astype(float)
    neg = 1.0 - pos
    log_pos = pos @ np.log(psi).T + neg @ np.log1p(-psi).T
    log_neg = neg @ np.log(eta).T + pos @ np.log1p(-eta).T
    log_pos += np.log((1 + b_tilde) / 2)
    log_neg += np.log((1 - b_tilde) / 2)
    ll = np.logaddexp(log_pos, log_neg)
    return weights @ ll / weights.sum()


def _slaved_params(mu, v, b_values, eps):
    psi = np.empty((len(b_values), len(mu)))
    eta = np.empty_like(psi)
    for g, bt in enumerate(b_values):
        acc = clip_accuracies(psi_eta_from_b(mu, v, float(bt)), eps)
        psi[g], eta[g] = acc.psi, acc.eta
    return psi, eta


def restricted_loglik_curve(patterns, weights, mu, v, b_values, eps: float = DEFAULT_EPS,
                            chunk_cells: int = 4_000_000) -> np.ndarray:
    """``G_n(b)`` for each ``b`` in ``b_values`` on (weighted) label patterns."""
    patterns = np.asarray(patterns)
    weights = np.asarray(weights, dtype=float)
    b_values = np.atleast_1d(np.asarray(b_values, dtype=float))
    if np.any(np.abs(b_values) >= 1):
        raise ParamOutOfRange("b_tilde must lie in (-1, 1)")
    out = np.empty(len(b_values))
    step = max(1, chunk_cells // max(1, len(patterns)))
    for start in range(0, len(b_values), step):
        sl = slice(start, start + step)
        psi, eta = _slaved_params(mu, v, b_values[sl], eps)
        out[sl] = _pattern_loglik(patterns, weights, psi, eta, b_values[sl])
    return out


def restricted_log_likelihood(Z: PredictionMatrix, mu, v, b_tilde: float,
                              eps: float = DEFAULT_EPS) -> float:
    """Average log-likelihood of the columns of ``Z`` at class imbalance ``b_tilde``.

    ``psi`` and ``eta`` follow from ``(mu, v, b_tilde)`` and are clipped into
    ``[eps, 1 - eps]``; each column's two-component mixture probability is
    combined in log space.
    """
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    patterns, counts = column_patterns(Z)
    return float(restricted_loglik_curve(patterns, counts, mu, v, [b_tilde], eps)[0])


def likelihood_grid(delta: float, grid_step: float) -> np.ndarray:
    if grid_step <= 0:
        raise ParamOutOfRange(f"grid_step must be positive, got {grid_step}")
    lo, hi = -1 + delta, 1 - delta
    count = int(np.ceil((hi - lo) / grid_step - 1e-9)) + 1
    return np.linspace(lo, hi, max(count, 2))


def _golden_max(f, lo: float, hi: float, width: float):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > width:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def b_likelihood_from_patterns(patterns, weights, mu, v, delta: float = DEFAULT_DELTA,
                               grid_step: float = DEFAULT_GRID_STEP,
                               eps: float = DEFAULT_EPS) -> ImbalanceEstimate:
    """Grid scan plus golden-section refinement of the restricted likelihood.

    Values within a relative ``TIE_RTOL`` of the grid maximum are ties and
    resolve toward the smaller ``b``. The refined point is kept only if it
    beats the best grid point by more than that tolerance.
    """
    _check_delta(delta)
    grid = likelihood_grid(delta, grid_step)
    values = restricted_loglik_curve(patterns, weights, mu, v, grid, eps)
    top = float(np.max(values))
    tie = TIE_RTOL * max(1.0, abs(top))
    k = int(np.argmax(values >= top - tie))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    def f(bt):
        return float(restricted_loglik_curve(patterns, weights, mu, v, [bt], eps)[0])

    b_best, g_best = float(grid[k]), float(values[k])
    b_ref, g_ref = _golden_max(f, lo, hi, REFINE_WIDTH)
    if g_ref > g_best + tie:
        b_best = float(b_ref)
    return ImbalanceEstimate(b=b_best, method="likelihood", delta=delta,
                             curve=np.column_stack([grid, values]),
                             mu=np.asarray(mu, dtype=float))


def estimate_b_likelihood(Z: PredictionMatrix, delta: float = DEFAULT_DELTA,
                          grid_step: float = DEFAULT_GRID_STEP,
                          eps: float = DEFAULT_EPS) -> ImbalanceEstimate:
    """Maximize the restricted log-likelihood over ``[-1 + delta, 1 - delta]``."""
    Z = as_prediction_matrix(Z)
    mu = sample_means(Z)
    sv = estimate_v(sample_covariance(Z))
    patterns, counts = column_patterns(Z)
    est = b_likelihood_from_patterns(patterns, counts, mu, sv.v, delta, grid_step, eps)
    return ImbalanceEstimate(b=est.b, method=est.method, delta=est.delta, curve=est.curve,
                             spectral=sv, mu=mu)


def population_restricted_loglik(psi, eta, b: float, b_values, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Expected restricted log-likelihood ``G(b_tilde)`` by enumerating all patterns.

    The expectation is under the true ``(psi, eta, b)``; ``psi(b_tilde)`` and
    ``eta(b_tilde)`` come from the exact population mean and rank-one vector.
    """
    psi = np.asarray(psi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    patterns, probs = pattern_probabilities(psi, eta, b)
    pi = (psi + eta) / 2
    mu = (psi - eta) + b * (2 * pi - 1)
    v = np.sqrt(1 - b * b) * (2 * pi - 1)
    return restricted_loglik_curve(patterns, probs, mu, v, b_values, eps)
