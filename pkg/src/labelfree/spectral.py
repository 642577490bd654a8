"""Rank-one fit to the off-diagonal part of a covariance matrix.

The diagonal of a sample covariance is not rank-one, so it is treated as
missing and completed iteratively: the diagonal is replaced by the diagonal
of the current leading rank-one term until it stops moving. The fixed points
of that iteration are the stationary points of
``sum_{i<j} (c_ij - v_i v_j)^2``; since the iteration contracts slowly when
one classifier dominates, the result is polished with Gauss-Newton steps on
the same objective.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateSpectrum

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000
POWER_TOL = 1e-12
POWER_MAX_ITER = 10_000
DEGENERATE_EIGENVALUE = 1e-12
POLISH_MAX_ITER = 50


class NonConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SpectralVector:
    v: np.ndarray
    residual: float
    iterations: int
    sign_resolved: bool = False
    converged: bool = True
    initial_residual: float = float("nan")


def offdiag_residual(cov: np.ndarray, v: np.ndarray) -> float:
    """Root-mean-square of ``cov_ij - v_i v_j`` over ``i < j``."""
    iu = np.triu_indices(len(v), k=1)
    diff = cov[iu] - np.outer(v, v)[iu]
    return float(np.sqrt(np.mean(diff ** 2)))


def _offdiag_loss(cov: np.ndarray, v: np.ndarray, iu) -> float:
    return float(np.sum((cov[iu] - v[iu[0]] * v[iu[1]]) ** 2))


def _gauss_newton(cov: np.ndarray, v: np.ndarray, max_iter: int = POLISH_MAX_ITER) -> np.ndarray:
    """Gauss-Newton with step halving on the off-diagonal least-squares loss."""
    m = len(v)
    iu = np.triu_indices(m, k=1)
    rows = np.arange(len(iu[0]))
    loss = _offdiag_loss(cov, v, iu)
    for _ in range(max_iter):
        resid = cov[iu] - v[iu[0]] * v[iu[1]]
        J = np.zeros((len(rows), m))
        J[rows, iu[0]] = v[iu[1]]
        J[rows, iu[1]] = v[iu[0]]
        step = np.linalg.lstsq(J, resid, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            cand = v + t * step
            cand_loss = _offdiag_loss(cov, cand, iu)
            if cand_loss <= loss:
                break
            t /= 2
        else:
            break
        gain = loss - cand_loss
        v, loss = cand, cand_loss
        if gain <= 1e-30 + 1e-15 * loss or np.max(np.abs(t * step)) < 1e-15:
            break
    return v


def leading_eigenpair(A: np.ndarray, start: np.ndarray | None = None,
                      tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER):
    """Power iteration for the dominant eigenpair of a symmetric matrix.

    The default start vector is the normalized all-ones vector, so results
    are reproducible. Returns ``(eigenvalue, unit_vector)``.
    """
    m = A.shape[0]
    u = np.ones(m) if start is None else np.asarray(start, dtype=float).copy()
    norm = np.linalg.norm(u)
    if norm == 0:
        u = np.ones(m)
        norm = np.sqrt(m)
    u /= norm
    lam = float(u @ A @ u)
    for _ in range(max_iter):
        w = A @ u
        wn = np.linalg.norm(w)
        if wn == 0:
            return 0.0, u
        w /= wn
        # align sign so the convergence test is not fooled by a negative eigenvalue flip
        if w @ u < 0:
            w = -w
        delta = np.max(np.abs(w - u))
        u = w
        if delta < tol:
            break
    lam = float(u @ A @ u)
    return lam, u


def resolve_sign(sv: SpectralVector) -> SpectralVector:
    """Choose the global sign so most classifiers are better than random.

    Ties in the count of positive versus negative entries are broken by the
    sign of the sum, then by making the largest-magnitude entry positive.
    """
    v = np.asarray(sv.v, dtype=float)
    pos = int(np.sum(v > 0))
    neg = int(np.sum(v < 0))
    if pos != neg:
        flip = neg > pos
    elif v.sum() != 0:
        flip = v.sum() < 0
    else:
        flip = v[np.argmax(np.abs(v))] < 0
    return replace(sv, v=-v if flip else v.copy(), sign_resolved=True)


def estimate_v(cov: np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               resolve: bool = True) -> SpectralVector:
    """Estimate ``v`` with ``cov_ij ~ v_i v_j`` for ``i != j``.

    Args:
        cov: Symmetric ``m x m`` matrix; only the off-diagonal entries are fit.
            The given diagonal seeds the completion.
        tol: Stop once the completed diagonal moves less than this (max-norm).
        max_iter: Cap on completion sweeps. Hitting it with the diagonal still
            moving by more than ``100 * tol`` marks the result unconverged and
            emits :class:`NonConvergenceWarning`.
        resolve: Apply :func:`resolve_sign` before returning.

    Raises:
        DegenerateSpectrum: if the leading eigenvalue is not positive.
    """
    cov = np.asarray(cov, dtype=float)
    m = cov.shape[0]
    if cov.shape != (m, m) or m < 3:
        raise ValueError(f"need a square matrix with m >= 3, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise ValueError("covariance matrix must be symmetric")

    A = cov.copy()
    lam, u = leading_eigenpair(A)
    initial_residual = offdiag_residual(cov, np.sqrt(max(lam, 0.0)) * u)
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new_diag = lam * u ** 2
        change = float(np.max(np.abs(new_diag - np.diag(A))))
        np.fill_diagonal(A, new_diag)
        lam, u = leading_eigenpair(A)
        if change < tol:
            break
    if lam <= DEGENERATE_EIGENVALUE:
        raise DegenerateSpectrum(f"leading eigenvalue {lam:.3g} is not positive; "
                                 "no better-than-random structure found")
    v = np.sqrt(lam) * u
    if change >= tol:
        # the polish only stands in for the remaining sweeps: keep it if it
        # lands on a completion fixed point, since without a rank-one fit the
        # least-squares loss can decrease while entries run off to infinity
        polished = _gauss_newton(cov, v)
        B = cov.copy()
        np.fill_diagonal(B, polished ** 2)
        lam_b, u_b = leading_eigenpair(B, start=polished)
        polished_change = float(np.max(np.abs(lam_b * u_b ** 2 - polished ** 2)))
        if (polished_change <= 100 * tol
                and offdiag_residual(cov, polished) <= offdiag_residual(cov, v)):
            v, change = polished, polished_change
    converged = change <= 100 * tol
    if not converged:
        warnings.warn(f"diagonal completion stopped after {max_iter} sweeps with change {change:.3g}",
                      NonConvergenceWarning, stacklevel=2)
    sv = SpectralVector(v=v, residual=offdiag_residual(cov, v), iterations=it,
                        converged=converged, initial_residual=initial_residual)
    return resolve_sign(sv) if resolve else sv
