"""Prediction matrices: parsing, validation and serialization.

Rows are classifiers and columns are instances. Binary labels are stored as
``int8`` values in {-1, +1}; multiclass labels as integers in ``1..K``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO, Union

import numpy as np

from .errors import BadLabel, BadToken, EmptyCell, RaggedRows, TooFewClassifiers

MIN_CLASSIFIERS = 3
SMALL_N = 2

ENCODINGS = ("pm_one", "zero_one")

TextSource = Union[str, TextIO]


@dataclass(frozen=True)
class PredictionMatrix:
    """An ``m x n`` matrix of binary predictions in {-1, +1}."""

    entries: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.entries)
        if z.ndim != 2:
            raise ValueError(f"prediction matrix must be 2-D, got shape {z.shape}")
        if z.shape[0] < MIN_CLASSIFIERS:
            raise TooFewClassifiers(
                f"need at least {MIN_CLASSIFIERS} classifiers, got {z.shape[0]}")
        if z.shape[1] < 1:
            raise ValueError("prediction matrix has no instances")
        if not np.all((z == 1) | (z == -1)):
            raise BadLabel("binary predictions must be -1 or +1")
        z = z.astype(np.int8)
        z.setflags(write=False)
        object.__setattr__(self, "entries", z)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def negated(self) -> "PredictionMatrix":
        return PredictionMatrix(-self.entries)


@dataclass(frozen=True)
class MultiPredictionMatrix:
    """An ``m x n`` matrix of class labels in ``1..K``."""

    entries: np.ndarray
    K: int

    def __post_init__(self):
        z = np.asarray(self.entries)
        if z.ndim != 2:
            raise ValueError(f"prediction matrix must be 2-D, got shape {z.shape}")
        if self.K < 2:
            raise ValueError(f"K must be at least 2, got {self.K}")
        if z.shape[0] < MIN_CLASSIFIERS:
            raise TooFewClassifiers(
                f"need at least {MIN_CLASSIFIERS} classifiers, got {z.shape[0]}")
        if z.size and (z.min() < 1 or z.max() > self.K):
            raise BadLabel(f"labels must lie in [1, {self.K}]")
        z = z.astype(np.int64)
        z.setflags(write=False)
        object.__setattr__(self, "entries", z)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]


@dataclass
class ValidationReport:
    """``issues`` holds blocking problems, ``warnings`` the advisory ones.

    Both are lists of ``(code, message)`` pairs; ``ok`` is true iff
    ``issues`` is empty.
    """

    issues: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    @property
    def codes(self) -> list:
        return [code for code, _ in self.issues + self.warnings]


def _read_rows(text: TextSource) -> list:
    if not isinstance(text, str):
        text = text.read()
    rows = []
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = []
        for col, cell in enumerate(line.split(","), start=1):
            token = cell.strip()
            if not token:
                raise EmptyCell(f"line {lineno}, column {col}: empty cell")
            try:
                cells.append(int(token))
            except ValueError:
                raise BadToken(f"line {lineno}, column {col}: {token!r} is not an integer") from None
        if rows and len(cells) != len(rows[0]):
            raise RaggedRows(
                f"line {lineno} has {len(cells)} cells, expected {len(rows[0])}")
        rows.append(cells)
    if not rows:
        raise TooFewClassifiers("input contains no rows")
    return rows


def _oriented(z: np.ndarray, transpose: bool) -> np.ndarray:
    if transpose:
        z = z.T
    if z.shape[0] < MIN_CLASSIFIERS:
        raise TooFewClassifiers(f"need at least {MIN_CLASSIFIERS} classifiers, got {z.shape[0]}")
    return z


def parse_prediction_csv(text: TextSource, encoding: str = "pm_one",
                         transpose: bool = False) -> PredictionMatrix:
    """Parse a comma-separated binary prediction matrix.

    Args:
        text: CSV content (or an open text stream), one classifier per row.
        encoding: ``"pm_one"`` for labels in {-1, +1} or ``"zero_one"`` for
            labels in {0, 1} (0 maps to -1).
        transpose: Treat rows as instances and columns as classifiers.

    Raises:
        RaggedRows, BadToken, BadLabel, EmptyCell, TooFewClassifiers.
    """
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    z = _oriented(np.array(_read_rows(text), dtype=np.int64), transpose)
    if encoding == "pm_one":
        bad = ~np.isin(z, (-1, 1))
    else:
        bad = ~np.isin(z, (0, 1))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise BadLabel(f"row {r + 1}, column {c + 1}: {z[r, c]} not valid for encoding {encoding}")
    if encoding == "zero_one":
        z = 2 * z - 1
    return PredictionMatrix(z)


def parse_multiclass_csv(text: TextSource, K: int, transpose: bool = False) -> MultiPredictionMatrix:
    """Parse a comma-separated multiclass prediction matrix with labels in ``1..K``."""
    z = _oriented(np.array(_read_rows(text), dtype=np.int64), transpose)
    bad = (z < 1) | (z > K)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise BadLabel(f"row {r + 1}, column {c + 1}: {z[r, c]} outside [1, {K}]")
    return MultiPredictionMatrix(z, K)


def serialize(Z: Union[PredictionMatrix, MultiPredictionMatrix]) -> str:
    """Canonical CSV form: one row per classifier, ``\\n`` line endings."""
    return "".join(",".join(str(int(x)) for x in row) + "\n" for row in Z.entries)


def validate(Z: PredictionMatrix) -> ValidationReport:
    """Report-only checks. Never raises; all issues are warnings."""
    report = ValidationReport()
    z = Z.entries
    if Z.n < SMALL_N:
        # every row of a single column is trivially constant; report only this
        report.warnings.append(("SMALL_N", f"only {Z.n} instance(s); covariance needs n >= {SMALL_N}"))
        return report
    for i in range(Z.m):
        if np.all(z[i] == z[i, 0]):
            report.warnings.append(
                ("CONSTANT_ROW", f"classifier {i} always predicts {int(z[i, 0]):+d}; its covariance row is zero"))
    return report


def as_prediction_matrix(Z: Union[PredictionMatrix, np.ndarray, Iterable]) -> PredictionMatrix:
    if isinstance(Z, PredictionMatrix):
        return Z
    return PredictionMatrix(np.asarray(Z))
