"""Hoeffding Adaptive Tree with ADWIN-monitored subtrees and DDM supervision.

Growth follows the Hoeffding tree: a leaf gathers per-class Gaussian summaries
of every feature and, every ``grace_period`` instances, scores candidate
thresholds by information gain. Adaptation has two layers:

* every node owns an ADWIN fed with the 0/1 error of its subtree; a detected
  increase starts an alternate subtree at a split node, and the alternate
  takes over once its error is lower by a significant margin;
* a global DDM watches the tree's prequential error; on drift the whole tree
  is rebuilt from the instances buffered since the warning level was hit.

Labels are integers ``1..C``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .drift import DRIFT, STABLE, WARNING, Adwin, Ddm
from .sparse_coding import SparseCode

SNAPSHOT_MAGIC = "SSHAD-HAT"
SNAPSHOT_VERSION = 1

# alternate-vs-original comparison, as in the reference HAT
SWAP_MIN_WIDTH = 300
SWAP_DELTA = 0.05
# branches must each hold at least this share of the weight for a split to count
MIN_BRANCH_FRACTION = 0.01
NB_VAR_FLOOR = 1e-6

LEAF_MODES = ("mc", "nb", "nba")


@dataclass(frozen=True)
class HadConfig:
    grace_period: int = 200
    split_confidence: float = 1e-7
    tie_threshold: float = 0.05
    leaf_prediction: str = "nba"
    adwin_delta: float = 0.002
    ddm: bool = True
    adaptive: bool = True
    n_split_points: int = 10
    buffer_cap: int = 10_000

    def __post_init__(self):
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        for name in ("split_confidence", "tie_threshold", "adwin_delta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.leaf_prediction not in LEAF_MODES:
            raise ValueError(f"leaf_prediction must be one of {LEAF_MODES}")


def hoeffding_bound(value_range: float, confidence: float, n: float) -> float:
    return math.sqrt(value_range ** 2 * math.log(1.0 / confidence) / (2.0 * n))


def entropy(dist: np.ndarray) -> np.ndarray:
    """Base-2 entropy along the last axis; empty distributions give 0."""
    dist = np.asarray(dist, dtype=float)
    total = dist.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, dist / total, 0.0)
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logs).sum(axis=-1)


def info_gain(pre: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Information gain of binary splits; ``left``/``right`` are (..., C) arrays.

    Splits that leave fewer than two branches with ``MIN_BRANCH_FRACTION`` of
    the weight get ``-inf``.
    """
    total = pre.sum()
    wl = left.sum(axis=-1)
    wr = right.sum(axis=-1)
    gain = entropy(pre) - (wl * entropy(left) + wr * entropy(right)) / total
    frac_ok = ((wl / total) >= MIN_BRANCH_FRACTION) & ((wr / total) >= MIN_BRANCH_FRACTION)
    return np.where(frac_ok, gain, -np.inf)


class NodeStats:
    """Class counts plus, at leaves, per-class Gaussian summaries of each feature."""

    def __init__(self, n_classes: int, n_features: Optional[int] = None, counts=None):
        self.class_counts = (np.zeros(n_classes) if counts is None
                             else np.array(counts, dtype=float))
        self.observers = n_features is not None
        if self.observers:
            shape = (n_classes, n_features)
            self.count = np.zeros(n_classes)
            self.mean = np.zeros(shape)
            self.m2 = np.zeros(shape)
            self.fmin = np.full(shape, np.inf)
            self.fmax = np.full(shape, -np.inf)

    @property
    def n_seen(self) -> float:
        return float(self.class_counts.sum())

    def update(self, x: np.ndarray, c: int) -> None:
        self.class_counts[c] += 1
        if not self.observers:
            return
        self.count[c] += 1
        delta = x - self.mean[c]
        self.mean[c] += delta / self.count[c]
        self.m2[c] += delta * (x - self.mean[c])
        np.minimum(self.fmin[c], x, out=self.fmin[c])
        np.maximum(self.fmax[c], x, out=self.fmax[c])

    def variance(self) -> np.ndarray:
        denom = np.maximum(self.count - 1, 1)[:, None]
        return np.where(self.count[:, None] > 1, self.m2 / denom, 0.0)

    def to_dict(self) -> dict:
        d = {"class_counts": self.class_counts.tolist()}
        if self.observers:
            d.update(count=self.count.tolist(), mean=self.mean.tolist(), m2=self.m2.tolist(),
                     fmin=self.fmin.tolist(), fmax=self.fmax.tolist())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NodeStats":
        C = len(d["class_counts"])
        n_features = len(d["mean"][0]) if "mean" in d else None
        s = cls(C, n_features, d["class_counts"])
        if n_features is not None:
            for key in ("count", "mean", "m2", "fmin", "fmax"):
                setattr(s, key, np.array(d[key], dtype=float))
        return s


class Leaf:
    kind = "leaf"

    def __init__(self, n_classes, n_features, adwin_delta=None, counts=None):
        self.stats = NodeStats(n_classes, n_features, counts)
        self.adwin = Adwin(adwin_delta) if adwin_delta is not None else None
        self.weight_at_last_attempt = self.stats.n_seen
        self.mc_correct = 0.0
        self.nb_correct = 0.0

    # -- prediction -------------------------------------------------------
    def mc_scores(self) -> np.ndarray:
        counts = self.stats.class_counts
        total = counts.sum()
        if total <= 0:
            return np.full(counts.shape[0], 1.0 / counts.shape[0])
        return counts / total

    def nb_scores(self, x: np.ndarray) -> Optional[np.ndarray]:
        s = self.stats
        seen = s.count > 0
        if not seen.any():
            return None
        var = np.maximum(s.variance(), NB_VAR_FLOOR)
        loglik = -0.5 * (np.log(2 * np.pi * var) + (x - s.mean) ** 2 / var).sum(axis=1)
        prior = s.class_counts / s.class_counts.sum()
        with np.errstate(divide="ignore"):
            logpost = np.where(seen & (prior > 0), np.log(prior) + loglik, -np.inf)
        top = logpost.max()
        if not np.isfinite(top):
            return None
        w = np.exp(logpost - top)
        return w / w.sum()

    def scores(self, x: np.ndarray, mode: str) -> np.ndarray:
        if mode == "mc":
            return self.mc_scores()
        nb = self.nb_scores(x)
        if nb is None:
            return self.mc_scores()
        if mode == "nb" or self.nb_correct >= self.mc_correct:
            return nb
        return self.mc_scores()

    # -- learning ---------------------------------------------------------
    def learn(self, x: np.ndarray, c: int, mode: str) -> None:
        if mode == "nba":
            if int(np.argmax(self.mc_scores())) == c:
                self.mc_correct += 1
            nb = self.nb_scores(x)
            if nb is not None and int(np.argmax(nb)) == c:
                self.nb_correct += 1
        self.stats.update(x, c)

    def split_candidates(self, n_points: int):
        """Best threshold and gain per feature, plus left/right class weights."""
        s = self.stats
        C, F = s.mean.shape
        seen = s.count > 0
        lo = np.where(seen[:, None], s.fmin, np.inf).min(axis=0)
        hi = np.where(seen[:, None], s.fmax, -np.inf).max(axis=0)
        steps = np.arange(1, n_points + 1) / (n_points + 1)
        thresholds = lo[:, None] + (hi - lo)[:, None] * steps[None, :]  # (F, P)

        std = np.sqrt(s.variance())  # (C, F)
        t = thresholds[None, :, :]
        mu = s.mean[:, :, None]
        sd = std[:, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(sd > 0, ndtr((t - mu) / np.where(sd > 0, sd, 1.0)),
                            (t >= mu).astype(float))
        frac = np.where(t < s.fmin[:, :, None], 0.0, frac)
        frac = np.where(t >= s.fmax[:, :, None], 1.0, frac)
        left = s.count[:, None, None] * np.where(seen[:, None, None], frac, 0.0)  # (C, F, P)
        left = np.moveaxis(left, 0, -1)  # (F, P, C)
        right = s.count[None, None, :] - left
        gains = info_gain(s.count, left, right)  # (F, P)
        valid = np.isfinite(hi - lo) & (hi > lo)
        gains = np.where(valid[:, None], gains, -np.inf)
        best = np.argmax(gains, axis=1)
        idx = np.arange(F)
        return (gains[idx, best], thresholds[idx, best], left[idx, best], right[idx, best])

    def footprint(self) -> int:
        s = self.stats
        C = s.class_counts.shape[0]
        per_feature = s.mean.size * 4 * 8 if s.observers else 0
        return 96 + 8 * C + 8 * C + per_feature

    def to_dict(self) -> dict:
        return {
            "kind": "leaf",
            "stats": self.stats.to_dict(),
            "adwin": self.adwin.to_dict() if self.adwin else None,
            "weight_at_last_attempt": self.weight_at_last_attempt,
            "mc_correct": self.mc_correct,
            "nb_correct": self.nb_correct,
        }


class Split:
    kind = "split"

    def __init__(self, feature: int, threshold: float, left, right, n_classes,
                 adwin_delta=None, counts=None):
        self.feature = feature
        self.threshold = threshold
        self.children = [left, right]
        self.stats = NodeStats(n_classes, None, counts)
        self.adwin = Adwin(adwin_delta) if adwin_delta is not None else None
        self.alternate = None

    def branch(self, x: np.ndarray) -> int:
        return 0 if x[self.feature] <= self.threshold else 1

    def footprint(self) -> int:
        return 96 + 8 * self.stats.class_counts.shape[0] + 16

    def to_dict(self) -> dict:
        return {
            "kind": "split",
            "feature": self.feature,
            "threshold": self.threshold,
            "stats": self.stats.to_dict(),
            "adwin": self.adwin.to_dict() if self.adwin else None,
            "children": [c.to_dict() for c in self.children],
            "alternate": self.alternate.to_dict() if self.alternate is not None else None,
        }


def _node_from_dict(d: dict):
    adwin = Adwin.from_dict(d["adwin"]) if d["adwin"] else None
    stats = NodeStats.from_dict(d["stats"])
    C = stats.class_counts.shape[0]
    if d["kind"] == "leaf":
        node = Leaf.__new__(Leaf)
        node.stats = stats
        node.adwin = adwin
        node.weight_at_last_attempt = d["weight_at_last_attempt"]
        node.mc_correct = d["mc_correct"]
        node.nb_correct = d["nb_correct"]
        return node
    node = Split(d["feature"], d["threshold"], _node_from_dict(d["children"][0]),
                 _node_from_dict(d["children"][1]), C)
    node.stats = stats
    node.adwin = adwin
    node.alternate = _node_from_dict(d["alternate"]) if d["alternate"] else None
    return node


class HoeffdingAdaptiveTree:
    """Incremental classifier over dense vectors of width ``n_features``.

    Sparse codes are accepted and expanded to dense vectors first.
    """

    def __init__(self, n_features: int, n_classes: int, config: Optional[HadConfig] = None):
        if n_features < 1 or n_classes < 2:
            raise ValueError("need at least one feature and two classes")
        self.n_features = n_features
        self.n_classes = n_classes
        self.config = config or HadConfig()
        self.ddm = Ddm() if self.config.ddm else None
        self.buffer = deque(maxlen=self.config.buffer_cap)
        self.split_log: list[dict] = []
        self.n_rebuilds = 0
        self.n_swaps = 0
        self.n_learned = 0
        self.root = self._new_leaf()

    @property
    def _adwin_delta(self):
        return self.config.adwin_delta if self.config.adaptive else None

    def _new_leaf(self, counts=None) -> Leaf:
        return Leaf(self.n_classes, self.n_features, self._adwin_delta, counts)

    def _as_vector(self, x) -> np.ndarray:
        if isinstance(x, SparseCode):
            if x.m != self.n_features:
                raise ValueError(f"code dimension {x.m} does not match {self.n_features} features")
            return x.to_dense()
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got shape {x.shape}")
        return x

    def _check_label(self, y) -> int:
        if not 1 <= int(y) <= self.n_classes or int(y) != y:
            raise ValueError(f"label {y} outside 1..{self.n_classes}")
        return int(y) - 1

    @staticmethod
    def _leaf_of(node, x):
        while node.kind == "split":
            node = node.children[node.branch(x)]
        return node

    # -- prediction -------------------------------------------------------
    def predict_proba(self, x) -> np.ndarray:
        x = self._as_vector(x)
        return self._leaf_of(self.root, x).scores(x, self.config.leaf_prediction)

    def predict_one(self, x):
        """Return ``(label, scores)``; ties go to the lowest class id."""
        scores = self.predict_proba(x)
        return int(np.argmax(scores)) + 1, scores

    # -- learning ---------------------------------------------------------
    def learn_one(self, x, y) -> "HoeffdingAdaptiveTree":
        x = self._as_vector(x)
        c = self._check_label(y)
        if self.ddm is not None:
            predicted = int(np.argmax(self.predict_proba(x)))
            level = self.ddm.add(predicted != c)
            if level == DRIFT:
                self.buffer.append((x, y))
                self.on_drift_rebuild(list(self.buffer))
                return self
            if level == WARNING:
                self.buffer.append((x, y))
            elif level == STABLE:
                self.buffer.clear()
        self._learn_tree(x, c)
        return self

    def _learn_tree(self, x, c):
        self.n_learned += 1
        self.root = self._learn_node(self.root, x, c)

    def _learn_node(self, node, x, c):
        """Learn at ``node``'s subtree; returns the node that should take its place."""
        cfg = self.config
        if node.adwin is not None:
            leaf = self._leaf_of(node, x)
            error = float(int(np.argmax(leaf.scores(x, cfg.leaf_prediction))) != c)
            before = node.adwin.estimation
            changed = node.adwin.add(error)
            if node.kind == "split":
                if changed and node.adwin.estimation > before and node.alternate is None:
                    node.alternate = self._new_leaf()
                elif node.alternate is not None and node.alternate.adwin.width > 0:
                    swapped = self._compare_alternate(node)
                    if swapped is not None:
                        return swapped
                if node.alternate is not None:
                    node.alternate = self._learn_node(node.alternate, x, c)

        if node.kind == "split":
            node.stats.update(x, c)
            b = node.branch(x)
            node.children[b] = self._learn_node(node.children[b], x, c)
            return node

        node.learn(x, c, cfg.leaf_prediction)
        if node.stats.n_seen - node.weight_at_last_attempt >= cfg.grace_period:
            node.weight_at_last_attempt = node.stats.n_seen
            split = self._attempt_split(node)
            if split is not None:
                return split
        return node

    def _compare_alternate(self, node):
        alt = node.alternate
        n_old, n_alt = node.adwin.width, alt.adwin.width
        if n_old <= SWAP_MIN_WIDTH or n_alt <= SWAP_MIN_WIDTH:
            return None
        old_err, alt_err = node.adwin.estimation, alt.adwin.estimation
        bound = math.sqrt(2.0 * old_err * (1.0 - old_err) * math.log(2.0 / SWAP_DELTA)
                          * (1.0 / n_alt + 1.0 / n_old))
        if bound < old_err - alt_err:
            self.n_swaps += 1
            return alt
        if bound < alt_err - old_err:
            node.alternate = None
        return None

    def _attempt_split(self, leaf: Leaf):
        counts = leaf.stats.class_counts
        if np.count_nonzero(counts) < 2:
            return None
        cfg = self.config
        gains, thresholds, lefts, rights = leaf.split_candidates(cfg.n_split_points)
        order = np.argsort(-gains, kind="stable")
        best_f = int(order[0])
        best = float(gains[best_f])
        second = float(gains[order[1]]) if gains.size > 1 else -np.inf
        second = max(second, 0.0)  # the "no split" candidate has zero gain
        n = leaf.stats.n_seen
        eps = hoeffding_bound(math.log2(self.n_classes), cfg.split_confidence, n)
        if not (best > 0 and (best - second > eps or eps < cfg.tie_threshold)):
            return None
        self.split_log.append({
            "n": n, "epsilon": eps, "best_gain": best, "second_gain": second,
            "feature": best_f, "threshold": float(thresholds[best_f]),
        })
        left = self._new_leaf(lefts[best_f])
        right = self._new_leaf(rights[best_f])
        node = Split(best_f, float(thresholds[best_f]), left, right, self.n_classes,
                     self._adwin_delta, counts)
        if leaf.adwin is not None:
            node.adwin = leaf.adwin
        return node

    def on_drift_rebuild(self, buffer) -> "HoeffdingAdaptiveTree":
        """Replace the tree with one trained on ``buffer`` and reset the detectors.

        An empty buffer leaves an empty tree.
        """
        self.n_rebuilds += 1
        self.root = self._new_leaf()
        self.n_learned = 0
        self.buffer.clear()
        if self.ddm is not None:
            self.ddm._restart()
            self.ddm.k_w = None
        for x, y in buffer:
            self._learn_tree(self._as_vector(x), self._check_label(y))
        return self

    # -- introspection ----------------------------------------------------
    def iter_nodes(self, include_alternates: bool = True):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if node.kind == "split":
                stack.extend(node.children)
                if include_alternates and node.alternate is not None:
                    stack.append(node.alternate)

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if node.kind == "leaf" else 1 + max(d(c) for c in node.children)
        return d(self.root)

    def model_cost(self) -> int:
        """Bytes attributed to the model: nodes, their ADWINs, and the DDM."""
        total = 0
        for node in self.iter_nodes():
            total += node.footprint()
            if node.adwin is not None:
                total += node.adwin.footprint()
        if self.ddm is not None:
            total += self.ddm.footprint()
        return total

    # -- snapshots --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "magic": SNAPSHOT_MAGIC,
            "version": SNAPSHOT_VERSION,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "config": asdict(self.config),
            "root": self.root.to_dict(),
            "ddm": self.ddm.to_dict() if self.ddm is not None else None,
            "buffer": [[x.tolist(), y] for x, y in self.buffer],
            "split_log": self.split_log,
            "counters": {"n_rebuilds": self.n_rebuilds, "n_swaps": self.n_swaps,
                         "n_learned": self.n_learned},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HoeffdingAdaptiveTree":
        if d.get("magic") != SNAPSHOT_MAGIC:
            raise ValueError("not a tree snapshot")
        if d.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {d.get('version')}")
        model = cls(d["n_features"], d["n_classes"], HadConfig(**d["config"]))
        model.root = _node_from_dict(d["root"])
        model.ddm = Ddm.from_dict(d["ddm"]) if d["ddm"] is not None else None
        model.buffer.extend((np.array(x, dtype=float), y) for x, y in d["buffer"])
        model.split_log = list(d["split_log"])
        for k, v in d["counters"].items():
            setattr(model, k, v)
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "HoeffdingAdaptiveTree":
        return cls.from_dict(json.loads(text))
