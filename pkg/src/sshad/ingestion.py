"""Dataset loading, z-score normalization, labeled sampling and bad-data injection.

Labels are stored as integers in ``1..C``; ``DatasetSchema.class_names[y - 1]``
gives the original class identifier.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed input row; ``line`` is the 1-based line number in the file."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    features: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        arr = np.asarray(self.features, dtype=float)
        if arr.ndim != 1:
            raise ValueError("features must be a 1-D vector")
        object.__setattr__(self, "features", arr)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)

    @property
    def labeled(self) -> bool:
        return self.label is not None


@dataclass
class DatasetSchema:
    feature_names: list[str]
    class_names: list[str] = field(default_factory=list)
    rejected_rows: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise SchemaError("schema needs at least one feature")
        if self.class_names and self.C < 2:
            raise SchemaError("a labeled schema needs at least two classes")

    @property
    def n(self) -> int:
        return len(self.feature_names)

    @property
    def C(self) -> int:
        return len(self.class_names)

    def label_of(self, name: str) -> int:
        try:
            return self.class_names.index(name) + 1
        except ValueError:
            raise SchemaError(f"unknown class label {name!r}") from None


@dataclass(frozen=True)
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray

    @property
    def n(self) -> int:
        return self.mean.shape[0]


def as_matrix(data: Sequence[Instance]) -> np.ndarray:
    """Stack instance features into a (q, n) array."""
    if len(data) == 0:
        return np.empty((0, 0))
    return np.vstack([inst.features for inst in data])


def labels_of(data: Sequence[Instance]) -> np.ndarray:
    return np.array([inst.label for inst in data])


# ---------------------------------------------------------------------------
# parsing


def _read_text(path) -> list[str]:
    raw = Path(path).read_bytes().decode("utf-8")
    # CRLF and bare CR are folded into LF before parsing
    return raw.replace("\r\n", "\n").replace("\r", "\n").split("\n")


def _parse_float(cell: str, lineno: int) -> float:
    text = cell.strip()
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a number", lineno) from None


def _numeric_key(name: str):
    try:
        return (0, float(name), name)
    except ValueError:
        return (1, 0.0, name)


def _finish(rows, labels, schema, labeled, lines_of_rows):
    """Drop non-finite rows, build Instances."""
    instances = []
    rejected = 0
    for feats, lab, lineno in zip(rows, labels, lines_of_rows):
        vec = np.asarray(feats, dtype=float)
        if not np.all(np.isfinite(vec)):
            rejected += 1
            logger.info("rejecting line %d: non-finite feature value", lineno)
            continue
        instances.append(Instance(vec, schema.label_of(lab) if labeled else None))
    if rejected:
        logger.warning("%d rows rejected for NaN/Inf cells", rejected)
    schema.rejected_rows = rejected
    return schema, instances


def _load_csv(path, labeled, class_names):
    lines = _read_text(path)
    reader = csv.reader(io.StringIO("\n".join(lines)))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    header = [h.strip() for h in header]
    width = len(header)
    n = width - 1 if labeled else width
    rows, labels, linenos = [], [], []
    for lineno, cells in enumerate(reader, start=2):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if len(cells) != width:
            raise ParseError(f"expected {width} cells, found {len(cells)}", lineno)
        rows.append([_parse_float(c, lineno) for c in cells[:n]])
        labels.append(cells[-1].strip() if labeled else None)
        linenos.append(lineno)
    if labeled and class_names is None:
        class_names = sorted(set(labels), key=_numeric_key)
    schema = DatasetSchema(header[:n], list(class_names) if labeled else [])
    return _finish(rows, labels, schema, labeled, linenos)


def _split_arff_values(text: str, lineno: int) -> list[str]:
    try:
        return next(csv.reader([text], skipinitialspace=True, quotechar="'"))
    except (csv.Error, StopIteration):
        raise ParseError("unreadable data row", lineno) from None


def _load_arff(path, labeled, class_names):
    lines = _read_text(path)
    attrs: list[tuple[str, Optional[list[str]]]] = []
    data_start = None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("%"):
            continue
        low = text.lower()
        if low.startswith("@relation"):
            continue
        if low.startswith("@attribute"):
            body = text[len("@attribute"):].strip()
            if body.startswith(("'", '"')):
                q = body[0]
                end = body.index(q, 1)
                name, kind = body[1:end], body[end + 1:].strip()
            else:
                name, _, kind = body.partition(" ")
                kind = kind.strip()
            if kind.startswith("{"):
                if not kind.endswith("}"):
                    raise ParseError("unterminated nominal attribute", lineno)
                values = [v.strip().strip("'\"") for v in kind[1:-1].split(",")]
                attrs.append((name, values))
            elif kind.lower() in ("numeric", "real", "integer"):
                attrs.append((name, None))
            else:
                raise ParseError(f"unsupported attribute type {kind!r}", lineno)
            continue
        if low.startswith("@data"):
            data_start = lineno
            break
        raise ParseError(f"unexpected header line {text!r}", lineno)
    if data_start is None:
        raise ParseError("missing @data section", len(lines))

    if labeled:
        if not attrs or attrs[-1][1] is None:
            raise SchemaError("labeled ARFF needs a nominal class attribute last")
        feature_attrs, class_attr = attrs[:-1], attrs[-1]
        if class_names is None:
            class_names = class_attr[1]
    else:
        feature_attrs = attrs
    for name, values in feature_attrs:
        if values is not None:
            raise SchemaError(f"feature attribute {name!r} is not numeric")
    n = len(feature_attrs)
    width = len(attrs)
    schema = DatasetSchema([a[0] for a in feature_attrs], list(class_names) if labeled else [])

    rows, labels, linenos = [], [], []
    for lineno in range(data_start + 1, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        cells = _split_arff_values(text, lineno)
        if len(cells) != width:
            raise ParseError(f"expected {width} values, found {len(cells)}", lineno)
        rows.append([_parse_float(c, lineno) for c in cells[:n]])
        labels.append(cells[-1].strip().strip("'\"") if labeled else None)
        linenos.append(lineno)
    return _finish(rows, labels, schema, labeled, linenos)


def load_dataset(path, format: Optional[str] = None, labeled: bool = True,
                 class_names: Optional[Sequence[str]] = None):
    """Parse a CSV or ARFF file into ``(DatasetSchema, list[Instance])``.

    Rows holding NaN or infinite cells are dropped and counted in
    ``schema.rejected_rows``. ``class_names`` fixes the label vocabulary;
    by default it is read from the ARFF class attribute, or collected from
    the CSV label column in sorted order.
    """
    fmt = (format or Path(path).suffix.lstrip(".")).lower()
    if fmt == "csv":
        return _load_csv(path, labeled, class_names)
    if fmt == "arff":
        return _load_arff(path, labeled, class_names)
    raise ValueError(f"unsupported format {fmt!r}")


def load_many(paths: Iterable, format: Optional[str] = None, labeled: bool = True):
    """Concatenate several files sharing one feature layout.

    The class vocabulary is the sorted union over all files, so the
    public multi-file datasets map to one consistent label range.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("no input files")
    class_names = None
    if labeled:
        names = set()
        for p in paths:
            schema, _ = load_dataset(p, format, labeled=True)
            names.update(schema.class_names)
        class_names = sorted(names, key=_numeric_key)
    merged: list[Instance] = []
    schema = None
    rejected = 0
    for p in paths:
        s, inst = load_dataset(p, format, labeled, class_names)
        if schema is not None and s.feature_names != schema.feature_names:
            raise SchemaError(f"{p}: feature layout differs from {paths[0]}")
        schema = s
        rejected += s.rejected_rows
        merged.extend(inst)
    schema.rejected_rows = rejected
    return schema, merged


def write_csv(path, schema: DatasetSchema, data: Sequence[Instance]) -> None:
    """Write instances as CSV with 17 significant digits (exact float round-trip)."""
    labeled = bool(schema.class_names)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.feature_names + (["class"] if labeled else []))
        for inst in data:
            row = [format(v, ".17g") for v in inst.features]
            if labeled:
                row.append(schema.class_names[inst.label - 1])
            w.writerow(row)


# ---------------------------------------------------------------------------
# normalization


def fit_normalizer(data) -> NormalizationStats:
    """Per-feature mean and population standard deviation."""
    X = data if isinstance(data, np.ndarray) else as_matrix(data)
    if X.shape[0] == 0:
        raise ValueError("cannot fit normalization on empty data")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    return NormalizationStats(mean, std)


def _scale(X, stats):
    safe = np.where(stats.std > 0, stats.std, 1.0)
    out = (X - stats.mean) / safe
    out[..., stats.std == 0] = 0.0
    return out


def normalize(x, stats: NormalizationStats):
    """Z-score an Instance, a sequence of Instances, or a raw array.

    Zero-variance features map to 0; labels are carried through.
    """
    if isinstance(x, Instance):
        if x.features.shape[0] != stats.n:
            raise ValueError(f"width {x.features.shape[0]} does not match stats width {stats.n}")
        return replace(x, features=_scale(x.features, stats))
    if isinstance(x, np.ndarray):
        if x.shape[-1] != stats.n:
            raise ValueError(f"width {x.shape[-1]} does not match stats width {stats.n}")
        return _scale(np.asarray(x, dtype=float), stats)
    return [normalize(inst, stats) for inst in x]


def denormalize(x: Instance, stats: NormalizationStats) -> Instance:
    return replace(x, features=x.features * stats.std + stats.mean)


# ---------------------------------------------------------------------------
# sampling / corruption


def sample_labeled(data: Sequence[Instance], ratio: float, seed: int) -> list[Instance]:
    """Draw floor(ratio * q) instances uniformly without replacement, in draw order."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    q = len(data)
    size = math.floor(ratio * q)
    if size == 0:
        raise ValueError(f"ratio {ratio} of {q} instances selects nothing")
    rng = np.random.default_rng(seed)
    idx = rng.choice(q, size=size, replace=False)
    return [data[i] for i in idx]


BAD_DATA_SIGMA = 3.0


def inject_bad_data(data: Sequence[Instance], fraction: float, seed: int,
                    sigma: float = BAD_DATA_SIGMA) -> list[Instance]:
    """Replace every feature of a random floor(fraction * q) subset with N(0, sigma^2) noise.

    Intended for normalized data. Labels are left alone.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")
    out = list(data)
    count = math.floor(fraction * len(out))
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(out), size=count, replace=False))
    for i in chosen:
        inst = out[i]
        out[i] = replace(inst, features=rng.normal(0.0, sigma, size=inst.features.shape[0]))
    return out


def corrupted_indices(original: Sequence[Instance], corrupted: Sequence[Instance]) -> list[int]:
    return [i for i, (a, b) in enumerate(zip(original, corrupted)) if a is not b]
