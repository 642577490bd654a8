"""Unsupervised ensemble predictors and EM refinement.

Every rule returns real-valued scores and labels ``sign(score)`` with the
tie ``sign(0) = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accuracies import DEFAULT_EPS, AccuracyEstimates, clip_accuracies, psi_eta_from_b
from .data import PredictionMatrix, as_prediction_matrix
from .errors import OneClassOnly, UnclippedAccuracies
from .imbalance import (DEFAULT_DELTA, DEFAULT_GRID_STEP, column_patterns, estimate_b_likelihood,
                        estimate_b_tensor)

EM_MAX_ITER = 500
EM_TOL = 1e-8


@dataclass(frozen=True)
class EnsemblePrediction:
    labels: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class EmResult:
    acc: AccuracyEstimates
    b: float
    iterations: int
    log_likelihood_trace: np.ndarray
    log_odds: np.ndarray  # log Pr(y_j=+1 | column j) - log Pr(y_j=-1 | column j)

    @property
    def posterior(self) -> np.ndarray:
        return 1 / (1 + np.exp(-self.log_odds))


def sign_labels(scores: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(scores) >= 0, 1, -1).astype(np.int8)


def _prediction(scores) -> EnsemblePrediction:
    scores = np.asarray(scores, dtype=float)
    return EnsemblePrediction(labels=sign_labels(scores), scores=scores)


def majority_vote(Z: PredictionMatrix) -> EnsemblePrediction:
    Z = as_prediction_matrix(Z)
    return _prediction(Z.entries.sum(axis=0, dtype=np.int64))


def sml_predict(Z: PredictionMatrix, v) -> EnsemblePrediction:
    """Spectral meta-learner: ``sign(sum_i f_i v_i)``."""
    Z = as_prediction_matrix(Z)
    return _prediction(np.asarray(v, dtype=float) @ Z.entries)


def ml_weights(acc: AccuracyEstimates):
    """``(ln alpha_i, ln beta_i)`` of the maximum-likelihood label rule."""
    psi, eta = acc.psi, acc.eta
    if np.any((psi <= 0) | (psi >= 1)) or np.any((eta <= 0) | (eta >= 1)):
        raise UnclippedAccuracies("psi and eta must lie strictly inside (0, 1); clip them first")
    # grouped so that psi == eta gives log_beta == 0 exactly
    log_alpha = (np.log(psi) - np.log1p(-psi)) + (np.log(eta) - np.log1p(-eta))
    log_beta = (np.log(psi) - np.log(eta)) + (np.log1p(-psi) - np.log1p(-eta))
    return log_alpha, log_beta


def ml_predict(Z: PredictionMatrix, acc: AccuracyEstimates) -> EnsemblePrediction:
    """Maximum-likelihood label given per-classifier accuracies.

    ``score_j = sum_i (f_i(x_j) ln alpha_i + ln beta_i)`` with
    ``alpha_i = psi eta / ((1-psi)(1-eta))`` and
    ``beta_i = psi (1-psi) / (eta (1-eta))``. This is i-SML when ``acc`` is
    estimated without labels and the oracle rule when it holds true values.
    """
    Z = as_prediction_matrix(Z)
    log_alpha, log_beta = ml_weights(acc)
    return _prediction(log_alpha @ Z.entries + log_beta.sum())


def unsupervised_accuracies(Z: PredictionMatrix, method: str = "likelihood",
                            delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
                            grid_step: float = DEFAULT_GRID_STEP) -> AccuracyEstimates:
    """Estimate ``b`` by ``method`` and plug it into the moment formulas."""
    if method == "tensor":
        est = estimate_b_tensor(Z, delta)
    elif method == "likelihood":
        est = estimate_b_likelihood(Z, delta, grid_step, eps)
    else:
        raise ValueError(f"unknown imbalance method {method!r}")
    return clip_accuracies(psi_eta_from_b(est.mu, est.spectral.v, est.b), eps)


def isml_predict(Z: PredictionMatrix, method: str = "likelihood", delta: float = DEFAULT_DELTA,
                 eps: float = DEFAULT_EPS, grid_step: float = DEFAULT_GRID_STEP) -> EnsemblePrediction:
    return ml_predict(Z, unsupervised_accuracies(Z, method, delta, eps, grid_step))


def _component_logs(patterns, psi, eta, b):
    pos = patterns == 1
    log_pos = np.log((1 + b) / 2) + np.where(pos, np.log(psi), np.log1p(-psi)).sum(axis=1)
    log_neg = np.log((1 - b) / 2) + np.where(pos, np.log1p(-eta), np.log(eta)).sum(axis=1)
    return log_pos, log_neg


def full_log_likelihood(Z: PredictionMatrix, psi, eta, b: float) -> float:
    """Total log-likelihood of ``Z`` under the two-class independent-error model."""
    patterns, counts = column_patterns(Z)
    log_pos, log_neg = _component_logs(patterns, np.asarray(psi), np.asarray(eta), b)
    return float(counts @ np.logaddexp(log_pos, log_neg))


def em_refine(Z: PredictionMatrix, init: AccuracyEstimates, max_iter: int = EM_MAX_ITER,
              tol: float = EM_TOL, eps: float = DEFAULT_EPS) -> EmResult:
    """Two-class Dawid-Skene EM started from ``init``.

    Each M-step output is clipped into ``[eps, 1 - eps]``. Because every
    per-parameter objective is concave, the clipped value is still the
    constrained maximizer and the likelihood never decreases. Iteration stops
    once the log-likelihood gains less than ``tol`` or after ``max_iter``
    iterations.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    Z = as_prediction_matrix(Z)
    patterns, counts = column_patterns(Z)
    pos = (patterns == 1).astype(float)
    neg = 1.0 - pos
    psi = np.clip(init.psi, eps, 1 - eps)
    eta = np.clip(init.eta, eps, 1 - eps)
    b = float(np.clip(init.b, -1 + 2 * eps, 1 - 2 * eps))

    log_pos, log_neg = _component_logs(patterns, psi, eta, b)
    trace = [float(counts @ np.logaddexp(log_pos, log_neg))]
    it = 0
    for it in range(1, max_iter + 1):
        q = np.exp(log_pos - np.logaddexp(log_pos, log_neg))
        wq = counts * q
        wr = counts * (1 - q)
        n = counts.sum()
        b = float(np.clip(2 * wq.sum() / n - 1, -1 + 2 * eps, 1 - 2 * eps))
        if wq.sum() > 0:
            psi = np.clip(wq @ pos / wq.sum(), eps, 1 - eps)
        if wr.sum() > 0:
            eta = np.clip(wr @ neg / wr.sum(), eps, 1 - eps)
        log_pos, log_neg = _component_logs(patterns, psi, eta, b)
        trace.append(float(counts @ np.logaddexp(log_pos, log_neg)))
        if trace[-1] - trace[-2] < tol:
            break
    _, inverse = np.unique(Z.entries.T, axis=0, return_inverse=True)
    acc = AccuracyEstimates(psi=psi, eta=eta, b=b)
    return EmResult(acc=acc, b=b, iterations=it, log_likelihood_trace=np.array(trace),
                    log_odds=(log_pos - log_neg)[np.ravel(inverse)])


def em_predict(result: EmResult) -> EnsemblePrediction:
    """Labels from the EM posterior; the score is the posterior log-odds."""
    return _prediction(result.log_odds)


def balanced_accuracy_score(pred, truth) -> float:
    """Mean of the true-positive and true-negative rates."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    pos = truth == 1
    neg = ~pos
    if not pos.any() or not neg.any():
        raise OneClassOnly("truth must contain both classes")
    tpr = np.mean(pred[pos] == 1)
    tnr = np.mean(pred[neg] != 1)
    return float((tpr + tnr) / 2)
