"""Diagnostic CSV ingestion, label encoding, and seeded train/test splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import make_rng

N_FEATURES = 30

# Canonical column order of the diagnostic file: id, diagnosis, then ten
# measurements in three blocks (mean, se, worst).
_STEMS = [
    "radius",
    "texture",
    "perimeter",
    "area",
    "smoothness",
    "compactness",
    "concavity",
    "concave_points",
    "symmetry",
    "fractal_dimension",
]
FEATURE_NAMES = [f"{stem}_{block}" for block in ("mean", "se", "worst") for stem in _STEMS]

LABEL_TO_INT = {"M": 1, "B": 0}
INT_TO_LABEL = {1: "M", 0: "B"}


class MissingColumn(DataError):
    pass


class ParseError(DataError):
    def __init__(self, row: int, col: str, value: str):
        super().__init__(f"row {row}, column {col!r}: cannot parse {value!r} as float")
        self.row = row
        self.col = col


class EmptyFile(DataError):
    pass


class UnknownLabel(DataError):
    def __init__(self, value: str, row: int):
        super().__init__(f"row {row}: unknown diagnosis label {value!r}")
        self.value = value
        self.row = row


class DegenerateSplit(DataError):
    pass


@dataclass(frozen=True)
class Record:
    """One case: opaque id, 30 measurements, optional raw diagnosis char."""

    id: str
    features: np.ndarray
    label: str | None = None


@dataclass
class Dataset:
    """Ordered records plus the shared feature schema.

    `labels` is empty until `encode_labels` runs; raw diagnosis characters
    stay on the records for audit.
    """

    records: list[Record]
    feature_names: list[str] = field(default_factory=lambda: list(FEATURE_NAMES))
    labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def X(self) -> np.ndarray:
        """Feature matrix, shape (n_records, n_features)."""
        if not self.records:
            return np.empty((0, len(self.feature_names)))
        return np.stack([r.features for r in self.records])

    @property
    def y(self) -> np.ndarray:
        if len(self.labels) != len(self.records):
            raise DataError("labels not encoded; call encode_labels first")
        return self.labels

    def subset(self, indices: np.ndarray) -> "Dataset":
        """New Dataset holding the given rows (labels sliced if encoded)."""
        recs = [self.records[i] for i in indices]
        labels = self.labels[indices] if len(self.labels) == len(self.records) else np.empty(0, dtype=np.int64)
        return Dataset(records=recs, feature_names=list(self.feature_names), labels=labels)

    def replace_features(self, X: np.ndarray, feature_names: list[str]) -> "Dataset":
        """New Dataset with transformed feature matrix, same ids/labels."""
        if X.shape[0] != len(self.records):
            raise DataError("row count mismatch in replace_features")
        recs = [
            Record(id=r.id, features=np.asarray(X[i], dtype=np.float64), label=r.label)
            for i, r in enumerate(self.records)
        ]
        return Dataset(records=recs, feature_names=list(feature_names), labels=self.labels.copy())


@dataclass(frozen=True)
class SplitIndices:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int
    ratio: float


def _normalize_header(name: str) -> str:
    return name.strip().replace(" ", "_")


def load_csv(path: str | Path, *, drop_missing: bool = True) -> tuple[Dataset, dict[str, int]]:
    """Load the diagnostic CSV.

    Expects an `id` column, a `diagnosis` column, and the 30 measurement
    columns; header spaces are normalized to underscores and a trailing
    unnamed empty column (present in common distributions of the file) is
    tolerated and dropped. Rows with unparseable floats raise ParseError;
    rows with *empty* cells are dropped when `drop_missing` (the default)
    and counted in the returned per-column missing report.
    """
    path = Path(path)
    if not path.exists():
        raise EmptyFile(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} has no header row") from None
        header = [_normalize_header(h) for h in raw_header]
        # Tolerate one trailing unnamed column (e.g. "Unnamed: 32" or "").
        while header and (header[-1] == "" or header[-1].lower().startswith("unnamed")):
            header.pop()
        for required in ["id", "diagnosis"] + FEATURE_NAMES:
            if required not in header:
                raise MissingColumn(f"column {required!r} missing from {path}")
        col_of = {name: header.index(name) for name in header}
        feat_cols = [col_of[name] for name in FEATURE_NAMES]
        id_col, diag_col = col_of["id"], col_of["diagnosis"]

        records: list[Record] = []
        missing = {name: 0 for name in FEATURE_NAMES}
        for row_no, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            gaps = []
            values = np.empty(N_FEATURES)
            for j, col in enumerate(feat_cols):
                cell = row[col].strip() if col < len(row) else ""
                if cell == "" or cell.lower() in ("na", "nan"):
                    gaps.append(j)
                    values[j] = np.nan
                    continue
                try:
                    values[j] = float(cell)
                except ValueError:
                    raise ParseError(row_no, FEATURE_NAMES[j], cell) from None
                if not math.isfinite(values[j]):
                    raise ParseError(row_no, FEATURE_NAMES[j], cell)
            for j in gaps:
                missing[FEATURE_NAMES[j]] += 1
            if gaps and drop_missing:
                continue
            records.append(Record(id=row[id_col].strip(), features=values, label=row[diag_col].strip()))
    return Dataset(records=records), missing


def encode_labels(d: Dataset) -> Dataset:
    """Map diagnosis M -> 1, B -> 0. Raw labels stay on the records."""
    labels = np.empty(len(d.records), dtype=np.int64)
    for i, rec in enumerate(d.records):
        if rec.label not in LABEL_TO_INT:
            raise UnknownLabel(str(rec.label), i)
        labels[i] = LABEL_TO_INT[rec.label]
    return Dataset(records=list(d.records), feature_names=list(d.feature_names), labels=labels)


def audit_missing(d: Dataset) -> dict[str, int]:
    """Per-column count of NaN cells currently present in the dataset."""
    report = {name: 0 for name in d.feature_names}
    for rec in d.records:
        for j in np.flatnonzero(np.isnan(rec.features)):
            report[d.feature_names[j]] += 1
    return report


def split_indices(n: int, ratio: float, seed: int) -> SplitIndices:
    """Deterministic split: PCG64(seed) Fisher-Yates shuffle, then slice.

    Test size is round(n * ratio); for the 569-case file at ratio 0.2 this
    gives 114 held-out rows.
    """
    if not 0.0 < ratio < 1.0:
        raise DegenerateSplit(f"ratio must lie in (0, 1), got {ratio}")
    if n < 2:
        raise DegenerateSplit(f"need at least 2 rows to split, got {n}")
    n_test = int(round(n * ratio))
    if n_test == 0 or n_test == n:
        raise DegenerateSplit(f"ratio {ratio} leaves an empty side for n={n}")
    perm = make_rng(seed).permutation(n)
    return SplitIndices(
        train_idx=np.sort(perm[n_test:]),
        test_idx=np.sort(perm[:n_test]),
        seed=seed,
        ratio=ratio,
    )


def train_test_split(d: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset, SplitIndices]:
    """Split a dataset into (train, test) using `split_indices`."""
    idx = split_indices(len(d), ratio, seed)
    return d.subset(idx.train_idx), d.subset(idx.test_idx), idx
