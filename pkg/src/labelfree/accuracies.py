"""Sensitivities and specificities from means, the rank-one vector and ``b``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BOutOfRange

DEFAULT_EPS = 1e-3


@dataclass(frozen=True)
class AccuracyEstimates:
    """Per-classifier sensitivity ``psi`` and specificity ``eta``.

    ``raw_psi``/``raw_eta`` keep the values before any clipping so that
    diagnostics can show how often noise pushed an estimate outside [0, 1].
    """

    psi: np.ndarray
    eta: np.ndarray
    b: float
    clipped_psi: Optional[np.ndarray] = None
    clipped_eta: Optional[np.ndarray] = None
    raw_psi: Optional[np.ndarray] = field(default=None, repr=False)
    raw_eta: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "eta", eta)
        for name in ("clipped_psi", "clipped_eta"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(psi.shape, dtype=bool))
        if self.raw_psi is None:
            object.__setattr__(self, "raw_psi", psi.copy())
        if self.raw_eta is None:
            object.__setattr__(self, "raw_eta", eta.copy())

    @property
    def pi(self) -> np.ndarray:
        """Balanced accuracies ``(psi + eta) / 2``."""
        return (self.psi + self.eta) / 2

    @property
    def delta(self) -> np.ndarray:
        """Half the sensitivity/specificity gap, ``psi - pi``."""
        return self.psi - self.pi

    @property
    def clipped(self) -> np.ndarray:
        return self.clipped_psi | self.clipped_eta

    @property
    def m(self) -> int:
        return len(self.psi)


def psi_eta_from_b(mu, v, b: float) -> AccuracyEstimates:
    """Plug-in sensitivities and specificities for a given class imbalance.

    ``psi = (1 + mu + v sqrt((1-b)/(1+b))) / 2`` and
    ``eta = (1 - mu + v sqrt((1+b)/(1-b))) / 2``. The values are returned
    unclipped; see :func:`clip_accuracies`.

    Example:
        >>> acc = psi_eta_from_b([0.2], [0.4], 0.0)
        >>> acc.psi.round(6).tolist(), acc.eta.round(6).tolist()
        ([0.8], [0.6])
    """
    mu = np.asarray(mu, dtype=float)
    v = np.asarray(v, dtype=float)
    if mu.shape != v.shape:
        raise ValueError(f"mu and v must have equal shapes, got {mu.shape} and {v.shape}")
    if not -1 < b < 1:
        raise BOutOfRange(f"class imbalance must lie in (-1, 1), got {b}")
    psi = 0.5 * (1 + mu + v * np.sqrt((1 - b) / (1 + b)))
    eta = 0.5 * (1 - mu + v * np.sqrt((1 + b) / (1 - b)))
    return AccuracyEstimates(psi=psi, eta=eta, b=float(b))


def clip_accuracies(acc: AccuracyEstimates, eps: float = DEFAULT_EPS) -> AccuracyEstimates:
    """Clamp ``psi`` and ``eta`` into ``[eps, 1 - eps]`` and flag what moved."""
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    psi = np.clip(acc.psi, eps, 1 - eps)
    eta = np.clip(acc.eta, eps, 1 - eps)
    return AccuracyEstimates(
        psi=psi, eta=eta, b=acc.b,
        clipped_psi=acc.clipped_psi | (psi != acc.psi),
        clipped_eta=acc.clipped_eta | (eta != acc.eta),
        raw_psi=acc.raw_psi, raw_eta=acc.raw_eta,
    )
