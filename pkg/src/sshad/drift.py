"""Change detectors: ADWIN (adaptive windowing) and DDM (error-rate drift detection).

ADWIN keeps its window as an exponential histogram: level ``i`` holds up to
``M`` buckets of ``2**i`` elements, ordered oldest first. After every insert
each bucket boundary is tested as a cut point; whenever the two sides differ
by more than the Hoeffding bound the oldest bucket is dropped and the scan
repeats. The inner loops are compiled with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

MAX_LEVELS = 64
MIN_SUBWINDOW = 5

# scalar slots in the float state vector
_WIDTH, _TOTAL, _VAR = 0, 1, 2


@numba.njit(cache=True)
def _insert(tot, var, cnt, sc, value, M):
    n = sc[_WIDTH]
    if n > 0:
        mu = sc[_TOTAL] / n
        sc[_VAR] += n * (value - mu) ** 2 / (n + 1)
    sc[_WIDTH] = n + 1
    sc[_TOTAL] += value
    tot[0, cnt[0]] = value
    var[0, cnt[0]] = 0.0
    cnt[0] += 1
    level = 0
    while cnt[level] > M:
        # merge the two oldest buckets of this level into one bucket one level up
        size = 2.0 ** level
        t0, t1 = tot[level, 0], tot[level, 1]
        mu0, mu1 = t0 / size, t1 / size
        merged_var = var[level, 0] + var[level, 1] + size * size * (mu0 - mu1) ** 2 / (2 * size)
        for j in range(2, cnt[level]):
            tot[level, j - 2] = tot[level, j]
            var[level, j - 2] = var[level, j]
        cnt[level] -= 2
        up = level + 1
        tot[up, cnt[up]] = t0 + t1
        var[up, cnt[up]] = merged_var
        cnt[up] += 1
        level = up


@numba.njit(cache=True)
def _top_level(cnt):
    for level in range(cnt.shape[0] - 1, -1, -1):
        if cnt[level] > 0:
            return level
    return -1


@numba.njit(cache=True)
def _drop_oldest(tot, var, cnt, sc):
    level = _top_level(cnt)
    size = 2.0 ** level
    t_b, v_b = tot[level, 0], var[level, 0]
    n = sc[_WIDTH]
    n_rest = n - size
    if n_rest > 0:
        mu_b = t_b / size
        mu_rest = (sc[_TOTAL] - t_b) / n_rest
        sc[_VAR] -= v_b + size * n_rest * (mu_b - mu_rest) ** 2 / n
        if sc[_VAR] < 0:
            sc[_VAR] = 0.0
    else:
        sc[_VAR] = 0.0
    sc[_WIDTH] = n_rest
    sc[_TOTAL] -= t_b
    for j in range(1, cnt[level]):
        tot[level, j - 1] = tot[level, j]
        var[level, j - 1] = var[level, j]
    cnt[level] -= 1


@numba.njit(cache=True)
def _find_cut(tot, cnt, sc, delta, min_len):
    width = sc[_WIDTH]
    total = sc[_TOTAL]
    if width < 2 * min_len:
        return False
    log_term = math.log(4.0 * width / delta)
    n0 = 0.0
    u0 = 0.0
    top = _top_level(cnt)
    for level in range(top, -1, -1):
        size = 2.0 ** level
        for j in range(cnt[level]):
            n0 += size
            u0 += tot[level, j]
            n1 = width - n0
            if n1 < min_len:
                return False
            if n0 < min_len:
                continue
            m = 1.0 / (1.0 / n0 + 1.0 / n1)
            eps = math.sqrt(log_term / (2.0 * m))
            if abs(u0 / n0 - (total - u0) / n1) > eps:
                return True
    return False


@numba.njit(cache=True)
def _step(tot, var, cnt, sc, value, M, delta, min_len):
    _insert(tot, var, cnt, sc, value, M)
    changed = False
    while _find_cut(tot, cnt, sc, delta, min_len):
        _drop_oldest(tot, var, cnt, sc)
        changed = True
    return changed


@numba.njit(cache=True)
def _run(tot, var, cnt, sc, values, M, delta, min_len, flags):
    for i in range(values.shape[0]):
        flags[i] = _step(tot, var, cnt, sc, values[i], M, delta, min_len)


class Adwin:
    """Adaptive sliding window over values in [0, 1].

    >>> w = Adwin()
    >>> for _ in range(100):
    ...     _ = w.add(0.5)
    >>> w.mean, w.width
    (0.5, 100)
    """

    def __init__(self, delta: float = 0.002, M: int = 5, min_window: int = MIN_SUBWINDOW):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if M < 2:
            raise ValueError("per-level capacity M must be at least 2")
        self.delta = delta
        self.M = M
        self.min_window = min_window
        self.reset()

    def reset(self):
        self._tot = np.zeros((MAX_LEVELS, self.M + 1))
        self._var = np.zeros((MAX_LEVELS, self.M + 1))
        self._cnt = np.zeros(MAX_LEVELS, dtype=np.int64)
        self._sc = np.zeros(3)
        self.n_detections = 0

    def add(self, value: float) -> bool:
        """Append ``value``; return True if the window was cut."""
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"ADWIN input must lie in [0, 1], got {value}")
        changed = _step(self._tot, self._var, self._cnt, self._sc, value,
                        self.M, self.delta, self.min_window)
        self.n_detections += changed
        return changed

    def update_many(self, values) -> np.ndarray:
        """Feed a whole sequence; returns the positions at which a cut happened."""
        values = np.ascontiguousarray(values, dtype=float)
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("ADWIN input must lie in [0, 1]")
        flags = np.zeros(values.shape[0], dtype=np.bool_)
        _run(self._tot, self._var, self._cnt, self._sc, values, self.M, self.delta,
             self.min_window, flags)
        hits = np.flatnonzero(flags)
        self.n_detections += hits.size
        return hits

    @property
    def width(self) -> int:
        return int(self._sc[_WIDTH])

    @property
    def total(self) -> float:
        return float(self._sc[_TOTAL])

    @property
    def variance(self) -> float:
        """Population variance of the retained window."""
        w = self._sc[_WIDTH]
        return float(self._sc[_VAR] / w) if w else 0.0

    @property
    def mean(self) -> float:
        w = self._sc[_WIDTH]
        if w == 0:
            raise ValueError("ADWIN window is empty")
        return float(self._sc[_TOTAL] / w)

    @property
    def estimation(self) -> float:
        """Window mean, or 0 for an empty window."""
        w = self._sc[_WIDTH]
        return float(self._sc[_TOTAL] / w) if w else 0.0

    @property
    def n_buckets(self) -> int:
        return int(self._cnt.sum())

    def buckets(self) -> list[tuple[int, float]]:
        """(size, total) pairs, oldest first."""
        out = []
        for level in range(MAX_LEVELS - 1, -1, -1):
            for j in range(self._cnt[level]):
                out.append((2 ** level, float(self._tot[level, j])))
        return out

    def footprint(self) -> int:
        """Bytes attributed to this detector in model-cost accounting."""
        return 64 + 16 * self.n_buckets

    def to_dict(self) -> dict:
        levels = int(_top_level(self._cnt)) + 1
        return {
            "delta": self.delta,
            "M": self.M,
            "min_window": self.min_window,
            "n_detections": self.n_detections,
            "scalars": self._sc.tolist(),
            "counts": self._cnt[:levels].tolist(),
            "totals": [self._tot[i, : self._cnt[i]].tolist() for i in range(levels)],
            "variances": [self._var[i, : self._cnt[i]].tolist() for i in range(levels)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Adwin":
        w = cls(d["delta"], d["M"], d["min_window"])
        w.n_detections = d["n_detections"]
        w._sc[:] = d["scalars"]
        for i, (c, t, v) in enumerate(zip(d["counts"], d["totals"], d["variances"])):
            w._cnt[i] = c
            w._tot[i, :c] = t
            w._var[i, :c] = v
        return w


STABLE, WARNING, DRIFT = "stable", "warning", "drift"


@dataclass
class Ddm:
    """Drift detection method on a stream of 0/1 prediction errors.

    Counters restart after each drift; ``t`` is the global instance index
    (1-based) used for the recorded warning/drift positions.
    """

    min_instances: int = 30
    warning_level: float = 2.0
    drift_level: float = 3.0

    def __post_init__(self):
        self.t = 0
        self.k_w = None
        self.k_d = None
        self.last_window = None
        self.n_drifts = 0
        self._restart()

    def _restart(self):
        self.i = 0
        self.errors = 0
        self.p = 1.0
        self.s = 0.0
        self.p_min = math.inf
        self.s_min = math.inf
        self.level = STABLE

    def add(self, error) -> str:
        """Record one prediction outcome (truthy = wrong) and return the level."""
        self.t += 1
        self.i += 1
        self.errors += bool(error)
        self.p = self.errors / self.i
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.i)
        if self.i < self.min_instances:
            self.level = STABLE
            return self.level
        if self.p + self.s < self.p_min + self.s_min:
            self.p_min, self.s_min = self.p, self.s
        score = self.p + self.s
        # with a perfect record s_min is 0 and both levels collapse onto the
        # minimum itself; only a strict rise above the minimum counts
        rising = score > self.p_min + self.s_min
        if rising and score >= self.p_min + self.drift_level * self.s_min:
            self.k_d = self.t
            if self.k_w is None:
                self.k_w = self.t
            self.last_window = (self.k_w, self.k_d)
            self.n_drifts += 1
            self._restart()
            self.k_w = None
            self.level = DRIFT
        elif rising and score >= self.p_min + self.warning_level * self.s_min:
            if self.level != WARNING:
                self.k_w = self.t
            self.level = WARNING
        else:
            self.k_w = None
            self.level = STABLE
        return self.level

    def context_window(self) -> tuple[int, int]:
        """(k_w, k_d) of the most recent drift."""
        if self.last_window is None:
            raise ValueError("no drift has been detected yet")
        return self.last_window

    def footprint(self) -> int:
        return 96

    def to_dict(self) -> dict:
        return dict(vars(self))

    @classmethod
    def from_dict(cls, d: dict) -> "Ddm":
        obj = cls(d["min_instances"], d["warning_level"], d["drift_level"])
        obj.__dict__.update(d)
        if obj.last_window is not None:
            obj.last_window = tuple(obj.last_window)
        return obj
