"""End-to-end runs: SSHAD (dictionary codes -> tree) and the raw-feature HAD baseline.

Run directory layout::

    <output_dir>/
        manifest.json
        summary.csv
        ratio-<r>/dictionary.bin          (sshad only)
        ratio-<r>/fold-<i>.report.json    deterministic metrics
        ratio-<r>/fold-<i>.timing.json    wall time and Ram-Hours

Stage seeds come from ``derive_seed(seed, stage, *indices)``: a
``numpy.random.SeedSequence`` seeded with the top-level seed and spawn key
``(crc32(stage), *indices)``. No stage seed depends on the run mode, so an
SSHAD run and a baseline run with one seed see the same samples and fold
orders.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import zlib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from . import __version__
from .dictionary_learning import DictLearnConfig, learn_dictionary, save_dictionary, transform_labeled
from .evaluation import kfold_average, prequential_run
from .ingestion import (Instance, as_matrix, fit_normalizer, inject_bad_data, load_dataset,
                        load_many, normalize, sample_labeled)
from .sparse_coding import OmpConfig
from .tree import HadConfig, HoeffdingAdaptiveTree

logger = logging.getLogger(__name__)

MODES = ("sshad", "had_baseline")
DEFAULT_RATIOS = (0.1, 0.3, 0.5, 0.7, 0.9)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, manifest_path=None):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest_path = manifest_path


def derive_seed(root: int, stage: str, *indices: int) -> int:
    ss = np.random.SeedSequence(root, spawn_key=(zlib.crc32(stage.encode()), *indices))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


PathSpec = Union[str, list]


@dataclass
class RunConfig:
    labeled_path: PathSpec = ""
    unlabeled_path: Optional[PathSpec] = None
    format: Optional[str] = None
    sampling_ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    bad_data_fraction: float = 0.0
    labeled_pool_fraction: float = 0.5
    unlabeled_limit: Optional[int] = None
    dictionary: DictLearnConfig = field(default_factory=DictLearnConfig)
    omp: OmpConfig = field(default_factory=OmpConfig)
    had: HadConfig = field(default_factory=HadConfig)
    folds: int = 10
    seed: int = 0
    output_dir: str = "runs/sshad"
    mode: str = "sshad"
    snapshot_every: int = 1000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not self.sampling_ratios or any(not 0 < r <= 1 for r in self.sampling_ratios):
            raise ValueError("sampling ratios must lie in (0, 1]")
        if not 0 <= self.bad_data_fraction < 1:
            raise ValueError("bad_data_fraction must lie in [0, 1)")
        if not 0 < self.labeled_pool_fraction < 1:
            raise ValueError("labeled_pool_fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be positive")
        self.sampling_ratios = [float(r) for r in self.sampling_ratios]

    _NESTED = {"dictionary": DictLearnConfig, "omp": OmpConfig, "had": HadConfig}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        for key, typ in cls._NESTED.items():
            if key in kwargs and isinstance(kwargs[key], dict):
                kwargs[key] = typ(**kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        text = Path(path).read_text()
        if Path(path).suffix in (".yaml", ".yml"):
            return cls.from_dict(yaml.safe_load(text) or {})
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.mode == "had_baseline":
            d["ignored"] = ["dictionary", "omp"]
        return d


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load(path_spec, fmt, labeled):
    if isinstance(path_spec, (list, tuple)):
        return load_many(path_spec, fmt, labeled)
    return load_dataset(path_spec, fmt, labeled)


def split_pools(data: list, labeled_fraction: float, seed: int):
    """Stratified split into a labeled pool and an unlabeled pool (labels stripped).

    Within each class, ``round(labeled_fraction * count)`` instances chosen at
    random go to the labeled pool. Both pools keep the original file order.
    """
    rng = np.random.default_rng(seed)
    labels = np.array([inst.label for inst in data])
    to_labeled = np.zeros(len(data), dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        take = int(round(labeled_fraction * idx.size))
        to_labeled[rng.permutation(idx)[:take]] = True
    labeled = [data[i] for i in np.flatnonzero(to_labeled)]
    unlabeled = [Instance(data[i].features) for i in np.flatnonzero(~to_labeled)]
    return labeled, unlabeled


class _Run:
    """Bookkeeping for one run: artifacts, stage status, manifest writing."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, dict] = {}
        self.stages: dict[str, str] = {}
        self.seeds: dict[str, int] = {}
        self.extra: dict = {}
        self.started = datetime.now(timezone.utc).isoformat()

    def seed(self, stage: str, *idx: int) -> int:
        s = derive_seed(self.cfg.seed, stage, *idx)
        self.seeds[":".join([stage, *map(str, idx)])] = s
        return s

    def add(self, path, deterministic: bool = True) -> None:
        rel = str(Path(path).relative_to(self.out))
        self.artifacts[rel] = {"sha256": _sha256(path), "deterministic": deterministic}

    @contextmanager
    def stage(self, name):
        try:
            yield
        except Exception as exc:
            self.stages[name] = "failed"
            path = self.write_manifest(status="failed", failed_stage=name, error=str(exc))
            raise PipelineError(name, exc, path) from exc
        self.stages[name] = "done"

    def write_manifest(self, **status) -> Path:
        manifest = {
            "tool": "sshad",
            "tool_version": __version__,
            "mode": self.cfg.mode,
            "config": self.cfg.to_dict(),
            "seeds": self.seeds,
            "stages": self.stages,
            "artifacts": self.artifacts,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            **self.extra,
            **status,
        }
        path = self.out / "manifest.json"
        _write_json(path, manifest)
        return path


SUMMARY_FIELDS = ("sampling_ratio", "n_labeled", "accuracy", "kappa", "elapsed_seconds",
                  "ram_hours", "accuracy_std", "kappa_std", "elapsed_seconds_std",
                  "ram_hours_std")


def _ratio_dir(out: Path, ratio: float) -> Path:
    d = out / f"ratio-{ratio:.2f}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_pools(run: _Run):
    cfg = run.cfg
    with run.stage("load"):
        schema, data = _load(cfg.labeled_path, cfg.format, True)
        if cfg.unlabeled_path is not None:
            labeled_pool = data
            _, unlabeled = _load(cfg.unlabeled_path, cfg.format, False)
        else:
            labeled_pool, unlabeled = split_pools(data, cfg.labeled_pool_fraction,
                                                  run.seed("split"))
        if cfg.unlabeled_limit is not None:
            rng = np.random.default_rng(run.seed("unlabeled_limit"))
            keep = np.sort(rng.permutation(len(unlabeled))[: cfg.unlabeled_limit])
            unlabeled = [unlabeled[i] for i in keep]
        run.extra["dataset"] = {
            "n_features": schema.n, "n_classes": schema.C, "class_names": schema.class_names,
            "labeled_pool": len(labeled_pool), "unlabeled_pool": len(unlabeled),
            "rejected_rows": schema.rejected_rows,
        }
        logger.info("loaded %d labeled / %d unlabeled instances (%d rejected rows)",
                    len(labeled_pool), len(unlabeled), schema.rejected_rows)
    return schema, labeled_pool, unlabeled


def _execute(cfg: RunConfig) -> dict:
    run = _Run(cfg)
    schema, labeled_pool, unlabeled = _load_pools(run)
    summary = []
    fold_orders = {}
    if cfg.mode == "had_baseline":
        run.stages["dictionary"] = "skipped"

    for ri, ratio in enumerate(cfg.sampling_ratios):
        rdir = _ratio_dir(run.out, ratio)
        tag = f"{ratio:.2f}"
        with run.stage(f"prepare:{tag}"):
            sample = sample_labeled(labeled_pool, ratio, run.seed("sample", ri))
            stats = fit_normalizer(np.vstack([as_matrix(unlabeled), as_matrix(sample)])
                                   if unlabeled else as_matrix(sample))
            run.extra.setdefault("normalization", {})[tag] = {
                "fitted_on": "unlabeled+sampled_labeled", "n_rows": len(unlabeled) + len(sample),
                "degenerate_features": int(np.sum(stats.std == 0)),
            }
            sample = normalize(sample, stats)
            if cfg.bad_data_fraction > 0:
                sample = inject_bad_data(sample, cfg.bad_data_fraction, run.seed("bad_data", ri))

        if cfg.mode == "sshad":
            with run.stage(f"dictionary:{tag}"):
                dcfg = replace(cfg.dictionary, seed=run.seed("dictionary", ri))
                D = learn_dictionary(normalize(as_matrix(unlabeled), stats), dcfg)
                path = rdir / "dictionary.bin"
                save_dictionary(D, path)
                run.add(path)
            with run.stage(f"transform:{tag}"):
                coded = transform_labeled(sample, D, cfg.omp)
                stream = [(code.to_dense(), y) for code, y in coded]
                width = D.m
        else:
            stream = [(inst.features, inst.label) for inst in sample]
            width = schema.n

        reports = []
        with run.stage(f"evaluate:{tag}"):
            for f in range(cfg.folds):
                order = np.random.default_rng(run.seed("fold", ri, f)).permutation(len(stream))
                fold_orders[f"{tag}/{f}"] = hashlib.sha256(order.astype("<i8").tobytes()).hexdigest()
                model = HoeffdingAdaptiveTree(width, schema.C, cfg.had)
                report = prequential_run(model, (stream[i] for i in order),
                                         cfg.snapshot_every, schema.C)
                reports.append(report)
                rpath = rdir / f"fold-{f}.report.json"
                _write_json(rpath, report.deterministic_dict())
                run.add(rpath)
                tpath = rdir / f"fold-{f}.timing.json"
                _write_json(tpath, report.timing_dict())
                run.add(tpath, deterministic=False)
            agg = kfold_average(reports)
            row = {"sampling_ratio": ratio, "n_labeled": len(stream), **agg.to_dict()}
            row.pop("n_runs")
            summary.append(row)
            logger.info("ratio %s: kappa %.4f accuracy %.4f", tag, agg.kappa, agg.accuracy)

    spath = run.out / "summary.csv"
    with open(spath, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in summary:
            w.writerow({k: row[k] for k in SUMMARY_FIELDS})
    run.add(spath, deterministic=False)
    run.extra["summary"] = summary
    run.extra["folds"] = cfg.folds
    run.extra["fold_orders"] = fold_orders
    mpath = run.write_manifest(status="ok")
    return json.loads(mpath.read_text())


def run_sshad(cfg: RunConfig) -> dict:
    """Normalize, learn a dictionary, re-encode the labeled sample, evaluate per fold."""
    return _execute(replace(cfg, mode="sshad"))


def run_had_baseline(cfg: RunConfig) -> dict:
    """The same evaluation path on normalized raw features, without a dictionary."""
    return _execute(replace(cfg, mode="had_baseline"))


def learn_dictionary_only(cfg: RunConfig) -> dict:
    """Learn and save a dictionary from the unlabeled pool of ``cfg``.

    Normalization statistics are fitted on the unlabeled pool together with
    the whole labeled pool and written next to the dictionary.
    """
    run = _Run(replace(cfg, mode="sshad"))
    _, labeled_pool, unlabeled = _load_pools(run)
    with run.stage("dictionary"):
        stats = fit_normalizer(np.vstack([as_matrix(unlabeled), as_matrix(labeled_pool)]))
        dcfg = replace(cfg.dictionary, seed=run.seed("dictionary", 0))
        D = learn_dictionary(normalize(as_matrix(unlabeled), stats), dcfg)
        path = run.out / "dictionary.bin"
        save_dictionary(D, path)
        run.add(path)
        npath = run.out / "normalization.json"
        _write_json(npath, {"mean": stats.mean.tolist(), "std": stats.std.tolist()})
        run.add(npath)
    mpath = run.write_manifest(status="ok")
    return json.loads(mpath.read_text())


def verify_manifest(manifest_path) -> None:
    """Re-hash every listed artifact; raise ValueError on any mismatch."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    bad = [rel for rel, meta in manifest["artifacts"].items()
           if not (base / rel).exists() or _sha256(base / rel) != meta["sha256"]]
    if bad:
        raise ValueError(f"artifact hash mismatch: {bad}")


def _as_manifest(m) -> dict:
    if isinstance(m, dict):
        return m
    return json.loads(Path(m).read_text())


COMPARE_METRICS = (("kappa", "kappa"), ("cost", "ram_hours"),
                   ("accuracy", "accuracy"), ("time", "elapsed_seconds"))


def compare_runs(manifest_a, manifest_b, out_dir=None) -> list[dict]:
    """Side-by-side per-ratio table of mean kappa, cost, accuracy and time.

    Columns follow the ratio / kappa pair / cost pair layout, then accuracy
    and time, then ``<metric>_diff = a - b``.
    """
    a, b = _as_manifest(manifest_a), _as_manifest(manifest_b)
    rows_a = {r["sampling_ratio"]: r for r in a["summary"]}
    rows_b = {r["sampling_ratio"]: r for r in b["summary"]}
    if sorted(rows_a) != sorted(rows_b):
        raise ValueError(f"ratio grids differ: {sorted(rows_a)} vs {sorted(rows_b)}")
    if a.get("folds") != b.get("folds"):
        raise ValueError(f"fold counts differ: {a.get('folds')} vs {b.get('folds')}")
    table = []
    for ratio in sorted(rows_a):
        ra, rb = rows_a[ratio], rows_b[ratio]
        row = {"sampling_ratio": ratio}
        for name, key in COMPARE_METRICS:
            row[f"{name}_a"] = ra[key]
            row[f"{name}_b"] = rb[key]
        for name, key in COMPARE_METRICS:
            row[f"{name}_diff"] = ra[key] - rb[key]
        table.append(row)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(table)
        _write_json(out / "comparison.json", {
            "a": {"mode": a.get("mode"), "output_dir": a["config"].get("output_dir")},
            "b": {"mode": b.get("mode"), "output_dir": b["config"].get("output_dir")},
            "rows": table,
        })
    return table
