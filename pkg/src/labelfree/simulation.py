"""Synthetic data under the independent-error model and experiment harnesses.

Every random draw comes from a counter-based Philox stream keyed by
``(seed, stream)``, where the true labels use stream 0 and classifier ``i``
uses stream ``i + 1``; the draw for instance ``j`` is the ``j``-th value of
its stream. Outputs therefore do not depend on evaluation order or on how
trials are spread over threads.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .accuracies import DEFAULT_EPS, AccuracyEstimates
from .data import MultiPredictionMatrix, PredictionMatrix
from .ensemble import (balanced_accuracy_score, majority_vote, ml_predict, sml_predict,
                       unsupervised_accuracies)
from .errors import LabelFreeError, NonPositiveValue, SpecOutOfRange
from .imbalance import (DEFAULT_DELTA, DEFAULT_GRID_STEP, alpha_least_squares, b_from_alpha,
                        estimate_b_likelihood, estimate_b_tensor)
from .moments import sample_covariance, sample_tensor
from .multiclass import ConfusionSet
from .spectral import estimate_v

LABEL_STREAM = 0
PARAM_STREAM = 1 << 40
_MASK64 = (1 << 64) - 1


def uniform_stream(seed: int, stream: int, count: int) -> np.ndarray:
    """The first ``count`` uniforms of the Philox stream keyed by ``(seed, stream)``."""
    key = (int(stream) << 64) | (int(seed) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key)).random(count)


def derive_seed(seed: int, *indices: int) -> int:
    """A 64-bit child seed for a configuration/trial index path."""
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(i) for i in indices))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    b: float
    psi: np.ndarray
    eta: np.ndarray
    seed: int = 0

    def __post_init__(self):
        psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "eta", eta)
        if psi.shape != eta.shape or psi.ndim != 1:
            raise SpecOutOfRange("psi and eta must be 1-D and of equal length")
        if len(psi) < 3:
            raise SpecOutOfRange(f"need m >= 3 classifiers, got {len(psi)}")
        if self.n < 1:
            raise SpecOutOfRange(f"n must be positive, got {self.n}")
        if not -1 < self.b < 1:
            raise SpecOutOfRange(f"b must lie in (-1, 1), got {self.b}")
        if np.any((psi < 0) | (psi > 1)) or np.any((eta < 0) | (eta > 1)):
            raise SpecOutOfRange("psi and eta must lie in [0, 1]")

    @property
    def m(self) -> int:
        return len(self.psi)


def generate(spec: SyntheticSpec):
    """Draw ``(Z, y)`` from the conditionally independent two-class model."""
    y = np.where(uniform_stream(spec.seed, LABEL_STREAM, spec.n) < (1 + spec.b) / 2, 1, -1)
    z = np.empty((spec.m, spec.n), dtype=np.int8)
    for i in range(spec.m):
        u = uniform_stream(spec.seed, i + 1, spec.n)
        # given y=+1: +1 w.p. psi; given y=-1: -1 w.p. eta
        z[i] = np.where(y == 1, np.where(u < spec.psi[i], 1, -1), np.where(u < spec.eta[i], -1, 1))
    return PredictionMatrix(z), y.astype(np.int8)


def draw_accuracies(m: int, seed: int, low: float = 0.5, high: float = 0.8):
    """Sensitivities and specificities drawn uniformly from ``[low, high]``."""
    u = uniform_stream(seed, PARAM_STREAM, 2 * m)
    return low + (high - low) * u[:m], low + (high - low) * u[m:]


def generate_multiclass(confusions: ConfusionSet, priors, n: int, seed: int):
    """Draw ``(Zm, y)`` with labels in ``1..K`` from per-classifier confusion matrices."""
    priors = np.asarray(priors, dtype=float)
    K = confusions.K
    y = np.searchsorted(np.cumsum(priors)[:-1], uniform_stream(seed, LABEL_STREAM, n), side="right")
    z = np.empty((confusions.m, n), dtype=np.int64)
    for i in range(confusions.m):
        cdf = np.cumsum(confusions.matrices[i], axis=0)  # column c is the CDF given Y=c
        u = uniform_stream(seed, i + 1, n)
        z[i] = (u[None, :] >= cdf[:K - 1, y]).sum(axis=0)
    return MultiPredictionMatrix(z + 1, K), y + 1


def diagonal_dominant_confusions(m: int, K: int, seed: int, diag_low: float = 0.6,
                                 diag_high: float = 0.9) -> ConfusionSet:
    """Random confusion matrices whose diagonal is drawn from ``[diag_low, diag_high]``.

    The remaining mass of each column is split over the other classes with
    uniform random proportions.
    """
    u = uniform_stream(seed, PARAM_STREAM + 1, m * K * K).reshape(m, K, K)
    mats = np.empty((m, K, K))
    for i in range(m):
        for c in range(K):
            d = diag_low + (diag_high - diag_low) * u[i, c, c]
            w = np.delete(u[i, :, c], c) + 0.5
            col = np.insert((1 - d) * w / w.sum(), c, d)
            mats[i, :, c] = col
    return ConfusionSet(mats)


# -- experiment results ------------------------------------------------------

@dataclass
class ExperimentResult:
    """Aggregated table plus raw per-trial records.

    ``rows`` are dicts with keys ``config`` (ordered dict of configuration
    values), ``metric``, ``mean``, ``std``, ``trials`` and ``failures``.
    ``raw`` holds one dict per trial in trial order.
    """

    name: str
    rows: list = field(default_factory=list)
    raw: list = field(default_factory=list)

    def lookup(self, metric: str, **config) -> dict:
        for row in self.rows:
            if row["metric"] == metric and all(row["config"].get(k) == v for k, v in config.items()):
                return row
        raise KeyError(f"no row for metric={metric} {config}")

    def config_keys(self) -> list:
        keys = []
        for row in self.rows:
            for k in row["config"]:
                if k not in keys:
                    keys.append(k)
        return keys

    def to_csv(self) -> str:
        keys = self.config_keys()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys + ["metric", "mean", "std", "trials", "failures"])
        for row in self.rows:
            writer.writerow([_fmt(row["config"].get(k, "")) for k in keys]
                            + [row["metric"], _fmt(row["mean"]), _fmt(row["std"]),
                               row["trials"], row["failures"]])
        return buf.getvalue()

    def to_plot_data(self, x_key: Optional[str] = None) -> str:
        """gnuplot-style blocks: one ``# series`` header per curve, then ``x mean std`` lines.

        Blocks are separated by two blank lines so each is a separate index.
        """
        keys = self.config_keys()
        if x_key is None:
            x_key = keys[-1] if keys else None
        series = {}
        for row in self.rows:
            label = tuple((k, row["config"][k]) for k in keys if k != x_key and k in row["config"])
            series.setdefault((label, row["metric"]), []).append(row)
        lines = []
        for (label, metric), rows in series.items():
            desc = " ".join(f"{k}={_fmt(v)}" for k, v in label)
            lines.append(f"# series: {desc} metric={metric}".replace("  ", " "))
            lines.append(f"# {x_key or 'index'} mean std trials")
            for idx, row in enumerate(rows):
                x = row["config"].get(x_key, idx) if x_key else idx
                lines.append(f"{_fmt(x)} {_fmt(row['mean'])} {_fmt(row['std'])} {row['trials']}")
            lines.append("")
            lines.append("")
        return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _summarize(values: Sequence[float]):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _run_tasks(fn: Callable, tasks: list, threads: int) -> list:
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))  # map preserves task order


def _aggregate(result: ExperimentResult, cells: list, metrics_of: Callable) -> None:
    """Append summary rows: ``cells`` is a list of ``(config, [record, ...])``."""
    for config, records in cells:
        ok = [r for r in records if r.get("error") is None]
        failures = len(records) - len(ok)
        for metric in metrics_of(config):
            vals = [r[metric] for r in ok if metric in r]
            mean, std = _summarize(vals)
            result.rows.append({"config": dict(config), "metric": metric, "mean": mean,
                                "std": std, "trials": len(vals),
                                "failures": failures + len(ok) - len(vals)})


def _estimate_b(Z, method, delta, grid_step, eps):
    if method == "tensor":
        return estimate_b_tensor(Z, delta).b
    return estimate_b_likelihood(Z, delta, grid_step, eps).b


def run_imbalance_experiment(b_values: Sequence[float], n_values: Sequence[int], trials: int,
                             base_spec: SyntheticSpec, acc_range: Optional[tuple] = (0.5, 0.8),
                             methods: Sequence[str] = ("tensor", "likelihood"),
                             delta: float = DEFAULT_DELTA, grid_step: float = DEFAULT_GRID_STEP,
                             eps: float = DEFAULT_EPS, threads: int = 1) -> ExperimentResult:
    """Accuracy of the class-imbalance estimators versus ``b`` and ``n``.

    Each trial redraws sensitivities and specificities from ``acc_range``
    (or keeps ``base_spec.psi``/``eta`` when ``acc_range`` is None) and
    records ``b_hat``, squared error and absolute error per method. Trials in
    which an estimator raises are counted as failures for that method.
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    tasks = [(bi, ni, t) for bi in range(len(b_values)) for ni in range(len(n_values))
             for t in range(trials)]

    def one(task):
        bi, ni, t = task
        b, n = float(b_values[bi]), int(n_values[ni])
        seed = derive_seed(base_spec.seed, bi, ni, t)
        if acc_range is not None:
            psi, eta = draw_accuracies(base_spec.m, seed, *acc_range)
        else:
            psi, eta = base_spec.psi, base_spec.eta
        Z, _ = generate(SyntheticSpec(n=n, b=b, psi=psi, eta=eta, seed=seed))
        rec = {"b": b, "n": n, "trial": t, "seed": seed}
        for method in methods:
            try:
                bh = _estimate_b(Z, method, delta, grid_step, eps)
            except LabelFreeError as err:
                rec[f"{method}_error"] = err.code
                continue
            rec[f"{method}_b_hat"] = bh
            rec[f"{method}_sq_err"] = (bh - b) ** 2
            rec[f"{method}_abs_err"] = abs(bh - b)
        return rec

    raw = _run_tasks(one, tasks, threads)
    result = ExperimentResult(name="imbalance", raw=raw)
    for method in methods:
        cells = []
        for b in b_values:
            for n in n_values:
                recs = [r for r in raw if r["b"] == float(b) and r["n"] == int(n)]
                cells.append(({"method": method, "b": float(b), "n": int(n)}, recs))
        for config, recs in cells:
            metric_keys = [f"{method}_{s}" for s in ("b_hat", "sq_err", "abs_err")]
            ok = [r for r in recs if f"{method}_b_hat" in r]
            for key, label in zip(metric_keys, ("b_hat", "mse", "mae")):
                mean, std = _summarize([r[key] for r in ok])
                result.rows.append({"config": config, "metric": label, "mean": mean, "std": std,
                                    "trials": len(ok), "failures": len(recs) - len(ok)})
    return result


def fit_loglog_slope(points: Sequence[tuple]) -> float:
    """Least-squares slope of ``log(y)`` against ``log(x)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need a sequence of (x, y) pairs")
    if len(pts) < 3 and not np.allclose(pts[:, 1], pts[0, 1]):
        raise ValueError("need at least 3 points")
    if np.any(pts <= 0):
        raise NonPositiveValue("log-log fit requires strictly positive values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    lx = lx - lx.mean()
    return float(lx @ (ly - ly.mean()) / (lx @ lx))


SpecFactory = Union[SyntheticSpec, Callable[[int, int], SyntheticSpec]]

ENSEMBLE_METHODS = ("mv", "sml", "isml", "oracle")


def run_ensemble_comparison(spec_factory: SpecFactory, trials: int, method: str = "likelihood",
                            delta: float = DEFAULT_DELTA, grid_step: float = DEFAULT_GRID_STEP,
                            eps: float = DEFAULT_EPS, seed: int = 0,
                            threads: int = 1) -> ExperimentResult:
    """Balanced accuracy of majority vote, SML, i-SML and the oracle ML rule.

    ``spec_factory`` is either a fixed :class:`SyntheticSpec` (a fresh seed is
    derived per trial) or ``callable(trial, trial_seed) -> SyntheticSpec``.
    ``method`` picks the class-imbalance estimator feeding i-SML.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")

    def spec_for(t):
        if isinstance(spec_factory, SyntheticSpec):
            return replace(spec_factory, seed=derive_seed(spec_factory.seed, t))
        return spec_factory(t, derive_seed(seed, t))

    def one(t):
        spec = spec_for(t)
        Z, y = generate(spec)
        rec = {"trial": t, "seed": spec.seed}
        oracle = AccuracyEstimates(psi=np.clip(spec.psi, eps, 1 - eps),
                                   eta=np.clip(spec.eta, eps, 1 - eps), b=spec.b)
        try:
            rec["mv"] = balanced_accuracy_score(majority_vote(Z).labels, y)
            rec["oracle"] = balanced_accuracy_score(ml_predict(Z, oracle).labels, y)
            v = estimate_v(sample_covariance(Z)).v
            rec["sml"] = balanced_accuracy_score(sml_predict(Z, v).labels, y)
            acc = unsupervised_accuracies(Z, method, delta, eps, grid_step)
            rec["isml"] = balanced_accuracy_score(ml_predict(Z, acc).labels, y)
        except LabelFreeError as err:
            rec["error"] = err.code
        return rec

    raw = _run_tasks(one, list(range(trials)), threads)
    result = ExperimentResult(name="ensemble", raw=raw)
    for name in ENSEMBLE_METHODS:
        vals = [r[name] for r in raw if name in r]
        mean, std = _summarize(vals)
        result.rows.append({"config": {"method": name}, "metric": "balanced_accuracy",
                            "mean": mean, "std": std, "trials": len(vals),
                            "failures": trials - len(vals)})
    return result


def run_mae_vs_m_experiment(m_values: Sequence[int], trials: int, base_spec: SyntheticSpec,
                            pi_range: tuple = (0.69, 0.71), delta: float = DEFAULT_DELTA,
                            threads: int = 1) -> ExperimentResult:
    """Mean absolute error of the tensor estimator versus the number of classifiers.

    Classifiers have ``psi = eta = pi`` with ``pi`` uniform in ``pi_range``;
    ``n`` and ``b`` come from ``base_spec``. Alongside the estimator, the
    ``oracle_v`` metric refits ``alpha`` with the true rank-one vector.
    """
    if any(m < 3 for m in m_values):
        raise ValueError("every m must be at least 3")
    tasks = [(mi, t) for mi in range(len(m_values)) for t in range(trials)]
    b = base_spec.b

    def one(task):
        mi, t = task
        m = int(m_values[mi])
        seed = derive_seed(base_spec.seed, mi, t)
        lo, hi = pi_range
        pi = lo + (hi - lo) * uniform_stream(seed, PARAM_STREAM, m)
        Z, _ = generate(SyntheticSpec(n=base_spec.n, b=b, psi=pi, eta=pi, seed=seed))
        rec = {"m": m, "trial": t, "seed": seed}
        try:
            rec["mae"] = abs(estimate_b_tensor(Z, delta).b - b)
            v_true = np.sqrt(1 - b * b) * (2 * pi - 1)
            alpha = alpha_least_squares(sample_tensor(Z), v_true)
            rec["mae_oracle_v"] = abs(b_from_alpha(alpha) - b)
        except LabelFreeError as err:
            rec["error"] = err.code
        return rec

    raw = _run_tasks(one, tasks, threads)
    result = ExperimentResult(name="mae-vs-m", raw=raw)
    cells = [({"b": b, "m": int(m)}, [r for r in raw if r["m"] == int(m)]) for m in m_values]
    _aggregate(result, cells, lambda config: ("mae", "mae_oracle_v"))
    return result
