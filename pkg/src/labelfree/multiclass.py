"""One-vs-all reduction of multiclass predictions to the binary pipeline.

Only class probabilities and the diagonal confusion entries are estimated;
first and second moments of the binary reductions do not determine the
off-diagonal entries (see :func:`ambiguity_witness`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional

import numpy as np

from .accuracies import DEFAULT_EPS, clip_accuracies, psi_eta_from_b
from .data import MultiPredictionMatrix, PredictionMatrix
from .errors import BadSubset, LabelFreeError, PerturbationOutOfRange
from .imbalance import (DEFAULT_DELTA, DEFAULT_GRID_STEP, b_likelihood_from_patterns,
                        b_tensor_from_moments, estimate_b_likelihood, estimate_b_tensor)
from .moments import MomentSet, triple_list
from .spectral import estimate_v

METHODS = ("tensor", "likelihood")


@dataclass(frozen=True)
class ConfusionSet:
    """Column-stochastic confusion matrices: ``matrices[i][a-1, c-1] = Pr(f_i = a | Y = c)``."""

    matrices: np.ndarray  # shape (m, K, K)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"expected shape (m, K, K), got {mats.shape}")
        if np.any(mats < -1e-12) or np.any(mats > 1 + 1e-12):
            raise ValueError("confusion entries must lie in [0, 1]")
        if not np.allclose(mats.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("every confusion matrix column must sum to 1")
        object.__setattr__(self, "matrices", mats)

    @property
    def K(self) -> int:
        return self.matrices.shape[1]

    @property
    def m(self) -> int:
        return self.matrices.shape[0]


@dataclass(frozen=True)
class MulticlassEstimates:
    p: np.ndarray  # raw per-class estimates, not renormalized
    diag: np.ndarray  # (m, K) estimated Pr(f_i = k | Y = k)
    method: str
    status: list = field(default_factory=list)  # per class: "ok" or an error code

    @property
    def p_normalized(self) -> np.ndarray:
        return self.p / np.nansum(self.p)


def _subset(A: Iterable[int], K: int) -> np.ndarray:
    A = sorted(set(int(a) for a in A))
    if not A or len(A) >= K or A[0] < 1 or A[-1] > K:
        raise BadSubset(f"class subset {A} must be a nonempty proper subset of 1..{K}")
    return np.array(A)


def binarize(Zm: MultiPredictionMatrix, A: Iterable[int]) -> PredictionMatrix:
    """``+1`` where the predicted class is in ``A``, else ``-1``."""
    A = _subset(A, Zm.K)
    return PredictionMatrix(np.where(np.isin(Zm.entries, A), 1, -1))


def _binary_estimate(Zb: PredictionMatrix, method: str, delta, grid_step, eps):
    if method == "tensor":
        return estimate_b_tensor(Zb, delta)
    return estimate_b_likelihood(Zb, delta, grid_step, eps)


def estimate_probs_and_diagonals(Zm: MultiPredictionMatrix, method: str = "tensor",
                                 delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
                                 grid_step: float = DEFAULT_GRID_STEP) -> MulticlassEstimates:
    """Run the binary pipeline on each one-vs-all split ``{k}``.

    ``p_k = (1 + b_k) / 2`` and the diagonal entry for classifier ``i`` is the
    sensitivity of its binarized outputs. A class whose binary run fails gets
    NaN entries and its error code in ``status``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    K = Zm.K
    p = np.full(K, np.nan)
    diag = np.full((Zm.m, K), np.nan)
    status = []
    for k in range(1, K + 1):
        try:
            est = _binary_estimate(binarize(Zm, [k]), method, delta, grid_step, eps)
        except LabelFreeError as err:
            status.append(err.code)
            continue
        acc = clip_accuracies(psi_eta_from_b(est.mu, est.spectral.v, est.b), eps)
        p[k - 1] = (1 + est.b) / 2
        diag[:, k - 1] = acc.psi
        status.append("ok")
    return MulticlassEstimates(p=p, diag=diag, method=method, status=status)


def _class_conditional_means(confusions: ConfusionSet, A: np.ndarray) -> np.ndarray:
    """``E[f_i^A | Y = c]`` as an ``(m, K)`` array."""
    in_A = confusions.matrices[:, A - 1, :].sum(axis=1)
    return 2 * in_A - 1


def population_binary_stats(confusions: ConfusionSet, priors, A: Iterable[int]):
    """Exact mean vector and covariance of the binarized classifiers.

    Sums over the true class and, for each classifier pair, the four joint
    outcomes of their binarized labels (conditionally independent given the
    true class).
    """
    priors = np.asarray(priors, dtype=float)
    K = confusions.K
    if priors.shape != (K,) or np.any(priors < 0) or not np.isclose(priors.sum(), 1.0):
        raise ValueError("priors must be a probability vector of length K")
    A = _subset(A, K)
    in_A = confusions.matrices[:, A - 1, :].sum(axis=1)  # Pr(f_i in A | Y=c)
    m = confusions.m
    mu = np.array([sum(priors[c] * (in_A[i, c] - (1 - in_A[i, c])) for c in range(K))
                   for i in range(m)])
    R = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            if i == j:
                R[i, i] = 1 - mu[i] ** 2
                continue
            second = 0.0
            for c in range(K):
                pi_, pj = in_A[i, c], in_A[j, c]
                for a, b in product((1, -1), repeat=2):
                    prob = (pi_ if a == 1 else 1 - pi_) * (pj if b == 1 else 1 - pj)
                    second += priors[c] * prob * a * b
            R[i, j] = second - mu[i] * mu[j]
    return mu, R


def population_binary_moments(confusions: ConfusionSet, priors, A: Iterable[int]) -> MomentSet:
    """Exact first three central moments of the binarized classifiers."""
    priors = np.asarray(priors, dtype=float)
    A = _subset(A, confusions.K)
    mu, R = population_binary_stats(confusions, priors, A)
    cond = _class_conditional_means(confusions, A) - mu[:, None]
    t = triple_list(confusions.m)
    tensor = (cond[t[:, 0]] * cond[t[:, 1]] * cond[t[:, 2]]) @ priors
    return MomentSet(mu=mu, cov=R, tensor=tensor, n=None)


def population_estimates(confusions: ConfusionSet, priors, method: str = "tensor",
                         delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
                         grid_step: float = DEFAULT_GRID_STEP,
                         clip: bool = True) -> MulticlassEstimates:
    """The one-vs-all pipeline fed with exact population moments.

    Shows the large-``n`` limit of :func:`estimate_probs_and_diagonals`. The
    likelihood route needs the full joint pattern distribution and is
    evaluated only for ``m <= 12``.
    """
    K = confusions.K
    p = np.empty(K)
    diag = np.empty((confusions.m, K))
    for k in range(1, K + 1):
        moments = population_binary_moments(confusions, priors, [k])
        if method == "tensor":
            est = b_tensor_from_moments(moments, delta)
            v = est.spectral.v
        else:
            v = estimate_v(moments.cov).v
            patterns, probs = _binary_pattern_distribution(confusions, priors, [k])
            est = b_likelihood_from_patterns(patterns, probs, moments.mu, v, delta, grid_step, eps)
        acc = psi_eta_from_b(moments.mu, v, est.b)
        if clip:
            acc = clip_accuracies(acc, eps)
        p[k - 1] = (1 + est.b) / 2
        diag[:, k - 1] = acc.psi
    return MulticlassEstimates(p=p, diag=diag, method=method, status=["ok"] * K)


def _binary_pattern_distribution(confusions: ConfusionSet, priors, A):
    m = confusions.m
    if m > 12:
        raise ValueError("pattern enumeration limited to m <= 12")
    A = _subset(A, confusions.K)
    in_A = confusions.matrices[:, A - 1, :].sum(axis=1)
    patterns = np.array(list(product((-1, 1), repeat=m)), dtype=np.int8)
    pos = patterns[:, :, None] == 1
    per_class = np.prod(np.where(pos, in_A[None], 1 - in_A[None]), axis=1)
    return patterns, per_class @ np.asarray(priors, dtype=float)


def ambiguity_witness(base: ConfusionSet, j: int, k: int, l: int, delta_amt: float,
                      classifier: int = 0) -> ConfusionSet:
    """A different confusion set with the same binary-reduction statistics.

    Six entries of one classifier's matrix move by ``+-delta_amt`` so that
    every row and column sum is preserved (classes are 1-based):
    ``(j,k) +, (k,j) -, (l,j) +, (j,l) -, (k,l) +, (l,k) -``. Under equal
    class priors the first moments of every binary reduction are unchanged;
    covariances are unchanged when the remaining classifiers carry no class
    information along the perturbed classes.

    Raises:
        PerturbationOutOfRange: if a modified entry leaves [0, 1].
    """
    K = base.K
    if len({j, k, l}) != 3 or not all(1 <= c <= K for c in (j, k, l)):
        raise ValueError(f"j, k, l must be distinct classes in 1..{K}")
    mats = base.matrices.copy()
    target = mats[classifier]
    for (r, c), sgn in (((j, k), 1), ((k, j), -1), ((l, j), 1),
                        ((j, l), -1), ((k, l), 1), ((l, k), -1)):
        target[r - 1, c - 1] += sgn * delta_amt
    if np.any(target < 0) or np.any(target > 1):
        raise PerturbationOutOfRange(
            f"perturbation of {delta_amt} pushes a confusion entry outside [0, 1]")
    return ConfusionSet(mats)
