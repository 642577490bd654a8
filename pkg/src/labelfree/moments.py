"""First three sample moments of the classifier outputs.

The third-order tensor keeps only strictly increasing index triples
``i < j < k``, stored densely in :func:`itertools.combinations` order.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from .data import PredictionMatrix, as_prediction_matrix
from .errors import InsufficientSamples, ParamOutOfRange


def triple_list(m: int) -> np.ndarray:
    """All ``(i, j, k)`` with ``i < j < k < m``, shape ``(C(m,3), 3)``."""
    if m < 3:
        return np.empty((0, 3), dtype=np.int64)
    return np.array(list(combinations(range(m), 3)), dtype=np.int64)


def triple_rank(i: int, j: int, k: int, m: int) -> int:
    """Position of the sorted triple ``{i, j, k}`` in :func:`triple_list` order."""
    i, j, k = sorted((i, j, k))
    if not (0 <= i < j < k < m):
        raise IndexError(f"({i}, {j}, {k}) is not a valid distinct triple for m={m}")
    # triples whose first index is below i, then second index below j, then k
    before_i = comb(m, 3) - comb(m - i, 3)
    before_j = comb(m - i - 1, 2) - comb(m - j, 2)
    return before_i + before_j + (k - j - 1)


def triple_products(v: np.ndarray) -> np.ndarray:
    """``v_i v_j v_k`` for every triple, in storage order."""
    v = np.asarray(v, dtype=float)
    t = triple_list(len(v))
    return v[t[:, 0]] * v[t[:, 1]] * v[t[:, 2]]


@dataclass(frozen=True)
class MomentSet:
    mu: np.ndarray
    cov: np.ndarray
    tensor: np.ndarray
    n: Optional[int] = None  # None for exact population moments

    @property
    def m(self) -> int:
        return len(self.mu)

    def t(self, i: int, j: int, k: int) -> float:
        """Tensor entry for any permutation of three distinct indices."""
        return float(self.tensor[triple_rank(i, j, k, self.m)])


def _z(Z) -> np.ndarray:
    return as_prediction_matrix(Z).entries.astype(float)


def sample_means(Z: PredictionMatrix) -> np.ndarray:
    return _z(Z).mean(axis=1)


def sample_covariance(Z: PredictionMatrix) -> np.ndarray:
    """Unbiased (``1/(n-1)``) covariance of the classifier rows."""
    z = _z(Z)
    n = z.shape[1]
    if n < 2:
        raise InsufficientSamples(f"covariance needs n >= 2, got n={n}")
    x = z - z.mean(axis=1, keepdims=True)
    cov = x @ x.T / (n - 1)
    return (cov + cov.T) / 2


def sample_tensor(Z: PredictionMatrix) -> np.ndarray:
    """Off-diagonal third central moments ``(1/n) sum_l x_il x_jl x_kl``."""
    z = _z(Z)
    m, n = z.shape
    x = z - z.mean(axis=1, keepdims=True)
    out = np.empty(comb(m, 3))
    pos = 0
    for i in range(m - 2):
        # block[j, k] = sum_l x_il x_jl x_kl for j, k > i
        rest = x[i + 1:]
        block = (rest * x[i]) @ rest.T / n
        ju, ku = np.triu_indices(m - i - 1, k=1)
        size = len(ju)
        out[pos:pos + size] = block[ju, ku]
        pos += size
    return out


def sample_moments(Z: PredictionMatrix) -> MomentSet:
    Z = as_prediction_matrix(Z)
    return MomentSet(mu=sample_means(Z), cov=sample_covariance(Z),
                     tensor=sample_tensor(Z), n=Z.n)


def population_moments(psi, eta, b: float) -> MomentSet:
    """Exact moments of the conditionally independent two-class model.

    Off-diagonal covariance is ``v v^T`` with ``v = sqrt(1-b^2)(2 pi - 1)``;
    the diagonal holds the exact variances ``1 - mu^2``.
    """
    psi = np.asarray(psi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if psi.shape != eta.shape or psi.ndim != 1:
        raise ParamOutOfRange("psi and eta must be 1-D arrays of equal length")
    if np.any((psi <= 0) | (psi >= 1)) or np.any((eta <= 0) | (eta >= 1)):
        raise ParamOutOfRange("psi and eta must lie strictly inside (0, 1)")
    if not -1 < b < 1:
        raise ParamOutOfRange(f"b must lie in (-1, 1), got {b}")
    pi = (psi + eta) / 2
    half_gap = (psi - eta) / 2
    mu = 2 * half_gap + b * (2 * pi - 1)
    v = np.sqrt(1 - b * b) * (2 * pi - 1)
    cov = np.outer(v, v)
    np.fill_diagonal(cov, 1 - mu ** 2)
    tensor = -2 * b * (1 - b * b) * triple_products(2 * pi - 1)
    return MomentSet(mu=mu, cov=cov, tensor=tensor, n=None)
