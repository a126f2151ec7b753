"""Data model and file formats shared by every other module.

Signals are stored as CSV (one instance per row, or ``G`` consecutive rows per
instance for multivariate data), labels as a separate single-column CSV, and
clustering results as a versioned JSON document.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1

# decimal literal, optional exponent; no thousands separators, no underscores
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_NONFINITE = re.compile(r"^[+-]?(nan|inf|infinity)$", re.IGNORECASE)


class DataFormatError(ValueError):
    """Malformed input file; carries the offending location when known."""

    def __init__(self, message, path=None, row=None, column=None):
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.row = row
        self.column = column


class ShapeError(DataFormatError):
    pass


class ValidationError(DataFormatError):
    pass


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


class GroupPartition:
    """A partition of feature indices ``0..p-1`` into disjoint, non-empty groups.

    Indices are 0-based. Groups keep the order they were given in.
    """

    def __init__(self, groups: Iterable[Sequence[int]], n_features: int | None = None):
        groups = [np.asarray(g, dtype=np.intp).ravel() for g in groups]
        if not groups:
            raise ValueError("a partition needs at least one group")
        for g in groups:
            if g.size == 0:
                raise ValueError("empty group in partition")
        flat = np.concatenate(groups)
        p = int(flat.max()) + 1 if n_features is None else int(n_features)
        if flat.min() < 0 or flat.max() >= p:
            raise ValueError(f"group indices must lie in [0, {p})")
        counts = np.bincount(flat, minlength=p)
        if np.any(counts > 1):
            raise ValueError(f"groups overlap at index {int(np.argmax(counts > 1))}")
        if np.any(counts == 0):
            raise ValueError(f"groups do not cover index {int(np.argmax(counts == 0))}")
        for g in groups:
            g.flags.writeable = False
        self._groups = tuple(groups)
        self.n_features = p
        self._labels = None

    @classmethod
    def singletons(cls, p):
        return cls([[j] for j in range(p)], n_features=p)

    @classmethod
    def from_labels(cls, labels):
        """Build a partition from a per-feature group label vector."""
        labels = np.asarray(labels)
        _, inv = np.unique(labels, return_inverse=True)
        order = []
        seen = set()
        for lab in inv:
            if lab not in seen:
                seen.add(lab)
                order.append(lab)
        return cls([np.flatnonzero(inv == lab) for lab in order], n_features=labels.size)

    @property
    def groups(self):
        return self._groups

    @property
    def sizes(self):
        return np.array([g.size for g in self._groups], dtype=np.intp)

    @property
    def labels(self):
        """Group index of each feature."""
        if self._labels is None:
            lab = np.empty(self.n_features, dtype=np.intp)
            for k, g in enumerate(self._groups):
                lab[g] = k
            lab.flags.writeable = False
            self._labels = lab
        return self._labels

    def __len__(self):
        return len(self._groups)

    def __iter__(self):
        return iter(self._groups)

    def __eq__(self, other):
        if not isinstance(other, GroupPartition):
            return NotImplemented
        return self.n_features == other.n_features and len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self._groups, other._groups)
        )

    def __repr__(self):
        return f"GroupPartition(n_groups={len(self)}, n_features={self.n_features})"

    def to_list(self):
        return [g.tolist() for g in self._groups]


@dataclass(frozen=True)
class Dataset:
    """``n`` shape-identical instances, shape ``(n, T)`` or ``(n, G, T)``."""

    instances: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.instances, dtype=float)
        if x.ndim not in (2, 3):
            raise ShapeError(f"instances must be (n, T) or (n, G, T), got shape {x.shape}")
        if x.shape[0] < 2:
            raise ShapeError("a dataset needs at least 2 instances")
        if min(x.shape[1:]) < 1:
            raise ShapeError("signals must have at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValidationError("non-finite value in signal data")
        object.__setattr__(self, "instances", _frozen(x))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (x.shape[0],):
                raise ShapeError(f"{lab.size} labels for {x.shape[0]} instances")
            object.__setattr__(self, "labels", _frozen(lab, dtype=lab.dtype))

    @property
    def n(self):
        return self.instances.shape[0]

    @property
    def is_multivariate(self):
        return self.instances.ndim == 3

    @property
    def n_variables(self):
        return self.instances.shape[1] if self.is_multivariate else 1

    @property
    def length(self):
        return self.instances.shape[-1]


@dataclass(frozen=True)
class FeatureMatrix:
    """An ``n x p`` matrix of transformed instances plus where it came from.

    ``column_map`` optionally names each column (for scattering features, the
    path and sample index) so fitted weights can be mapped back.
    """

    values: np.ndarray
    transform_tag: str = "raw"
    groups: GroupPartition | None = None
    column_map: list | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ShapeError(f"feature matrix must be 2-D with p >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite value in feature matrix")
        if self.groups is not None and self.groups.n_features != v.shape[1]:
            raise ShapeError(
                f"partition covers {self.groups.n_features} features, matrix has {v.shape[1]}"
            )
        if self.column_map is not None and len(self.column_map) != v.shape[1]:
            raise ShapeError("column map length differs from feature count")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def shape(self):
        return self.values.shape


def flatten_multivariate(X):
    """Row-major concatenation: element ``(g, t)`` goes to ``g * T + t``.

    Accepts a single ``(G, T)`` signal or a stack ``(n, G, T)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        return X.reshape(-1).copy()
    if X.ndim == 3:
        return X.reshape(X.shape[0], -1).copy()
    raise ShapeError(f"expected (G, T) or (n, G, T), got shape {X.shape}")


def unflatten_multivariate(v, n_variables):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] % n_variables:
        raise ShapeError(f"length {v.shape[-1]} is not a multiple of G={n_variables}")
    return v.reshape(v.shape[:-1] + (n_variables, v.shape[-1] // n_variables)).copy()


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_cell(text, path, row, col):
    s = text.strip()
    if _NUMBER.match(s):
        return float(s)
    if _NONFINITE.match(s):
        raise ValidationError(f"non-finite value {s!r}", path, row, col)
    raise DataFormatError(f"cannot parse {text!r} as a number", path, row, col)


def _is_header(cells):
    return any(not _NUMBER.match(c.strip()) and not _NONFINITE.match(c.strip()) for c in cells)


def read_matrix_csv(path):
    """Read a numeric CSV (optional single header row) into a 2-D float array.

    Row and column numbers in errors are 1-based file positions.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise type(exc)(exc.errno, exc.strerror, str(path)) from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        width = None
        for lineno, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            if lineno == 1 and _is_header(cells):
                continue
            values = [_parse_cell(c, path, lineno, j + 1) for j, c in enumerate(cells)]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ShapeError(
                    f"ragged row: {len(values)} columns, expected {width}", path, lineno
                )
            rows.append(values)
    if not rows:
        raise ShapeError("no data rows", path)
    return np.array(rows, dtype=float)


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def load_dataset(path, layout="auto", n_variables=None, labels_path=None):
    """Load signals from CSV.

    ``layout`` is ``"univariate"`` (one instance per row), ``"multivariate"``
    (``G`` consecutive rows per instance) or ``"auto"``, which reads the
    ``<stem>.meta.json`` sidecar when present and otherwise assumes
    univariate. ``n_variables`` overrides the sidecar's ``n_variables``.
    """
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text(encoding="utf-8"))
    if layout == "auto":
        layout = meta.get("layout", "univariate")
    if layout not in ("univariate", "multivariate"):
        raise ValueError(f"unknown layout {layout!r}")
    data = read_matrix_csv(path)
    if layout == "multivariate":
        G = int(n_variables or meta.get("n_variables") or 0)
        if G < 1:
            raise ShapeError("multivariate layout needs n_variables (flag or sidecar)", path)
        if data.shape[0] % G:
            raise ShapeError(f"{data.shape[0]} rows is not a multiple of G={G}", path)
        data = data.reshape(data.shape[0] // G, G, data.shape[1])
    labels = load_labels(labels_path) if labels_path is not None else None
    return Dataset(data, labels)


def load_labels(path):
    """Read a single-column label file; integer labels are returned as ints."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ShapeError("empty label file", path)
    for i, r in enumerate(rows, start=1):
        if len(r) != 1:
            raise ShapeError("label file must have exactly one column", path, i)
    values = [r[0].strip() for r in rows]
    if not re.fullmatch(r"[+-]?\d+", values[0]):
        values = values[1:]  # header
    if all(re.fullmatch(r"[+-]?\d+", v) for v in values):
        return np.array([int(v) for v in values], dtype=np.int64)
    return np.array(values)


def save_dataset(dataset, path, labels_path=None):
    """Write a dataset in the canonical CSV layout (plus sidecar if multivariate)."""
    path = Path(path)
    x = dataset.instances
    if dataset.is_multivariate:
        rows = x.reshape(-1, x.shape[-1])
        sidecar_path(path).write_text(
            json.dumps({"layout": "multivariate", "n_variables": x.shape[1]}, indent=2) + "\n",
            encoding="utf-8",
        )
    else:
        rows = x
    write_matrix_csv(path, rows)
    if labels_path is not None and dataset.labels is not None:
        with open(labels_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label"])
            for lab in dataset.labels.tolist():
                w.writerow([lab])


def write_matrix_csv(path, rows, header=None):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header is not None:
            w.writerow(header)
        for r in np.asarray(rows, dtype=float):
            w.writerow([repr(float(v)) for v in r])


def save_features(features, path, extra=None):
    """Write a FeatureMatrix as a numeric CSV plus a ``<stem>.meta.json`` sidecar.

    The sidecar holds the transform tag, the group partition and column map
    (when present) and any ``extra`` keys, e.g. the transform config.
    """
    path = Path(path)
    write_matrix_csv(path, features.values)
    meta = dict(extra or {})
    meta.update(
        kind="features",
        schema_version=SCHEMA_VERSION,
        transform_tag=features.transform_tag,
        n_features=features.shape[1],
        groups=None if features.groups is None else features.groups.to_list(),
        column_map=features.column_map,
    )
    dump_json(meta, sidecar_path(path))


def load_features(path):
    """Inverse of :func:`save_features`; returns ``(FeatureMatrix, sidecar dict)``."""
    path = Path(path)
    values = read_matrix_csv(path)
    side = sidecar_path(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    groups = meta.get("groups")
    column_map = meta.get("column_map")
    fm = FeatureMatrix(
        values,
        transform_tag=meta.get("transform_tag", "raw"),
        groups=None if groups is None else GroupPartition(groups, n_features=values.shape[1]),
        column_map=None if column_map is None else [tuple(_tuplify(c)) for c in column_map],
    )
    return fm, meta


def _tuplify(entry):
    return tuple(tuple(e) if isinstance(e, list) else e for e in entry)


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class ClusteringResult:
    """Output of a clustering run. ``labels`` are 0-based cluster indices."""

    labels: np.ndarray
    weights: np.ndarray
    objective_trace: tuple = ()
    s: float | None = None
    n_iter: int = 0
    transform_tag: str = "raw"
    seed: int | None = None
    method: str = "sparse"
    gap_profile: dict | None = None
    refit_labels: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", _frozen(self.labels, dtype=np.int64))
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "objective_trace", tuple(float(v) for v in self.objective_trace))
        if self.refit_labels is not None:
            object.__setattr__(self, "refit_labels", _frozen(self.refit_labels, dtype=np.int64))

    @property
    def n_clusters(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "transform_tag": self.transform_tag,
            "seed": self.seed,
            "s": self.s,
            "n_iter": self.n_iter,
            "labels": self.labels.tolist(),
            "weights": [float(v) for v in self.weights],
            "objective_trace": list(self.objective_trace),
            "gap_profile": self.gap_profile,
            "refit_labels": None if self.refit_labels is None else self.refit_labels.tolist(),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, doc):
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported result schema_version {version!r}")
        return cls(
            labels=np.asarray(doc["labels"], dtype=np.int64),
            weights=np.asarray(doc["weights"], dtype=float),
            objective_trace=tuple(doc.get("objective_trace", ())),
            s=doc.get("s"),
            n_iter=doc.get("n_iter", 0),
            transform_tag=doc.get("transform_tag", "raw"),
            seed=doc.get("seed"),
            method=doc.get("method", "sparse"),
            gap_profile=doc.get("gap_profile"),
            refit_labels=None if doc.get("refit_labels") is None else np.asarray(doc["refit_labels"]),
            config=doc.get("config") or {},
        )

    def __eq__(self, other):
        if not isinstance(other, ClusteringResult):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(doc: Any, path):
    """Write JSON deterministically; floats keep full round-trip precision."""
    path = Path(path)
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def save_result(result, path):
    dump_json(result.to_dict(), path)


def load_result(path):
    path = Path(path)
    return ClusteringResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
