"""Prequential (test-then-train) evaluation, Kappa, fold aggregation and synthetic streams."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

BYTES_PER_GB = 1024 ** 3
SECONDS_PER_HOUR = 3600.0


def kappa(confusion) -> float:
    """Cohen's Kappa of a (truth x prediction) count matrix.

    Evaluated as ``(N*trace - sum_c row_c*col_c) / (N**2 - sum_c row_c*col_c)``
    with Python integers when the counts are integral, so the only rounding
    is the final division.
    """
    cm = np.asarray(confusion, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError("confusion matrix must be square")
    if np.all(cm == np.round(cm)):
        cm = np.asarray(confusion).astype(np.int64).astype(object)
    total = cm.sum()
    if total <= 0:
        raise ValueError("confusion matrix is empty")
    agree = sum(cm[i, i] for i in range(cm.shape[0]))
    chance = sum(r * c for r, c in zip(cm.sum(axis=1), cm.sum(axis=0)))
    if chance == total * total:
        if agree == total:
            return 1.0
        raise ValueError("kappa undefined: chance agreement is 1")
    return float((total * agree - chance) / (total * total - chance))


def accuracy(confusion) -> float:
    cm = np.asarray(confusion, dtype=float)
    return float(np.trace(cm) / cm.sum())


@dataclass
class Snapshot:
    index: int
    accuracy: float
    kappa: float
    elapsed_seconds: float
    model_cost: float
    ram_hours: float


@dataclass
class PrequentialReport:
    n_evaluated: int
    accuracy: float
    kappa: float
    confusion: list
    elapsed_seconds: float
    ram_hours: float
    trace: list = field(default_factory=list)

    def deterministic_dict(self) -> dict:
        """Fields that depend only on the data and model, not on wall time."""
        return {
            "n_evaluated": self.n_evaluated,
            "accuracy": self.accuracy,
            "kappa": self.kappa,
            "confusion": self.confusion,
            "trace": [{"index": s.index, "accuracy": s.accuracy, "kappa": s.kappa,
                       "model_cost": s.model_cost} for s in self.trace],
        }

    def timing_dict(self) -> dict:
        return {
            "elapsed_seconds": self.elapsed_seconds,
            "ram_hours": self.ram_hours,
            "trace": [{"index": s.index, "elapsed_seconds": s.elapsed_seconds,
                       "ram_hours": s.ram_hours} for s in self.trace],
        }

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PrequentialReport":
        d = dict(d)
        d["trace"] = [Snapshot(**s) for s in d.get("trace", [])]
        return cls(**d)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instance_index", "accuracy", "kappa", "ram_hours"])
            for s in self.trace:
                w.writerow([s.index, repr(s.accuracy), repr(s.kappa), repr(s.ram_hours)])


def _kappa_or_nan(cm):
    try:
        return kappa(cm)
    except ValueError:
        return float("nan")


class ReportBuilder:
    """Accumulates (prediction, truth) pairs into a confusion matrix and trace."""

    def __init__(self, n_classes: int, snapshot_every: int = 1000):
        self.confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
        self.snapshot_every = snapshot_every
        self.trace: list[Snapshot] = []
        self.n = 0
        self._ram_hours = 0.0
        self._last = (0.0, None)

    def record(self, predicted: int, truth: int) -> None:
        self.confusion[truth - 1, predicted - 1] += 1
        self.n += 1

    def _integrate(self, elapsed: float, cost: float) -> None:
        t0, c0 = self._last
        if c0 is not None:
            self._ram_hours += 0.5 * (c0 + cost) / BYTES_PER_GB * (elapsed - t0) / SECONDS_PER_HOUR
        self._last = (elapsed, cost)

    def start(self, cost: float) -> None:
        self._last = (0.0, cost)

    def snapshot(self, elapsed: float, cost: float) -> None:
        self._integrate(elapsed, cost)
        cm = self.confusion
        self.trace.append(Snapshot(self.n, accuracy(cm), _kappa_or_nan(cm), elapsed,
                                   float(cost), self._ram_hours))

    def due(self) -> bool:
        return self.n % self.snapshot_every == 0

    def finish(self, elapsed: float, cost: float) -> PrequentialReport:
        if not self.trace or self.trace[-1].index != self.n:
            self.snapshot(elapsed, cost)
        cm = self.confusion
        return PrequentialReport(self.n, accuracy(cm), _kappa_or_nan(cm), cm.tolist(),
                                 elapsed, self._ram_hours, self.trace)


def _cost(model) -> float:
    fn = getattr(model, "model_cost", None)
    return float(fn()) if fn is not None else 0.0


def prequential_run(model, stream, snapshot_every: int = 1000,
                    n_classes: Optional[int] = None,
                    clock: Callable[[], float] = time.perf_counter) -> PrequentialReport:
    """Test-then-train over ``stream`` of ``(x, y)`` pairs.

    ``model`` needs ``predict_one(x) -> (label, scores)`` and
    ``learn_one(x, y)``; ``model_cost()`` is sampled at every snapshot and
    integrated over wall time (trapezoid rule) into gigabyte-hours.
    """
    n_classes = n_classes or getattr(model, "n_classes", None)
    if n_classes is None:
        raise ValueError("number of classes unknown")
    builder = ReportBuilder(n_classes, snapshot_every)
    start = clock()
    builder.start(_cost(model))
    for x, y in stream:
        predicted, _ = model.predict_one(x)
        builder.record(predicted, y)
        model.learn_one(x, y)
        if builder.due():
            builder.snapshot(clock() - start, _cost(model))
    if builder.n == 0:
        raise ValueError("empty stream")
    return builder.finish(clock() - start, _cost(model))


def report_from_log(predictions, truths, n_classes: int, snapshot_every: int = 1000):
    """Rebuild a report from a logged prediction sequence (timing fields are zero)."""
    builder = ReportBuilder(n_classes, snapshot_every)
    builder.start(0.0)
    for p, y in zip(predictions, truths):
        builder.record(int(p), int(y))
        if builder.due():
            builder.snapshot(0.0, 0.0)
    if builder.n == 0:
        raise ValueError("empty log")
    return builder.finish(0.0, 0.0)


@dataclass
class AggregateReport:
    n_runs: int
    accuracy: float
    kappa: float
    elapsed_seconds: float
    ram_hours: float
    accuracy_std: float
    kappa_std: float
    elapsed_seconds_std: float
    ram_hours_std: float

    def to_dict(self) -> dict:
        return asdict(self)


def kfold_average(runs: Sequence[PrequentialReport]) -> AggregateReport:
    """Means and sample standard deviations over repeated runs."""
    runs = list(runs)
    if not runs:
        raise ValueError("no reports to average")
    shape = np.shape(runs[0].confusion)
    if any(np.shape(r.confusion) != shape for r in runs):
        raise ValueError("reports cover different class sets")
    fields = ("accuracy", "kappa", "elapsed_seconds", "ram_hours")
    n = len(runs)
    ddof = 1 if n > 1 else 0
    means, stds = [], []
    for f in fields:
        # sorting makes the float sums independent of run order
        col = sorted(getattr(r, f) for r in runs)
        mu = math.fsum(col) / n
        means.append(mu)
        stds.append(math.sqrt(math.fsum((v - mu) ** 2 for v in col) / (n - ddof)))
    return AggregateReport(n, *means, *stds)


# ---------------------------------------------------------------------------
# synthetic streams

GENERATORS = ("hyperplane", "inversion", "bernoulli")


@dataclass(frozen=True)
class StreamSpec:
    generator: str
    seed: int = 0
    length: int = 1000
    drift_points: tuple = ()
    class_balance: float = 0.5
    n_features: int = 2
    error_rates: tuple = (0.1, 0.5)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")
        pts = list(self.drift_points)
        if any(b <= a for a, b in zip(pts, pts[1:])) or any(p < 0 or p >= self.length for p in pts):
            raise ValueError("drift points must be strictly increasing and inside the stream")
        if not 0.0 < self.class_balance < 1.0:
            raise ValueError("class_balance must lie in (0, 1)")
        if self.generator == "bernoulli" and len(self.error_rates) != len(pts) + 1:
            raise ValueError("bernoulli streams need one error rate per segment")


def _segment_ids(spec: StreamSpec) -> np.ndarray:
    seg = np.zeros(spec.length, dtype=np.int64)
    for p in spec.drift_points:
        seg[p:] += 1
    return seg


def gen_stream(spec: StreamSpec) -> list:
    """Deterministic synthetic stream of ``(x, y)`` pairs.

    * ``hyperplane``: x uniform on [-1, 1]^d, class 1 iff x[0] > b with b set
      so that class 1 has probability ``class_balance``.
    * ``inversion``: the same concept, with labels swapped (1 <-> 2) after
      every drift point.
    * ``bernoulli``: empty x, y = 1 for an error and 0 otherwise, with one
      error rate per segment.
    """
    rng = np.random.default_rng(spec.seed)
    seg = _segment_ids(spec)
    if spec.generator == "bernoulli":
        rates = np.asarray(spec.error_rates, dtype=float)[seg]
        flags = (rng.random(spec.length) < rates).astype(int)
        empty = np.zeros(0)
        return [(empty, int(f)) for f in flags]
    X = rng.uniform(-1.0, 1.0, size=(spec.length, spec.n_features))
    boundary = 1.0 - 2.0 * spec.class_balance
    y = np.where(X[:, 0] > boundary, 1, 2)
    if spec.generator == "inversion":
        y = np.where(seg % 2 == 1, 3 - y, y)
    return [(x, int(label)) for x, label in zip(X, y)]
