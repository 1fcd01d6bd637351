"""CHF measurement table: loading, feature selection, scaling and splits.

Canonical internal units are D [m], L [m], P [kPa], G [kg/m^2/s],
x_out [-], h_sub [kJ/kg], T_in [degC] and chf [kW/m^2].  A :class:`CsvSchema`
binds arbitrary header names and unit multipliers onto those columns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataParseError, InputError, SchemaError

COLUMNS = ("D", "L", "P", "G", "x_out", "h_sub", "T_in", "chf")
REQUIRED_COLUMNS = ("D", "L", "P", "G", "chf")

X_MODE_CONDITIONS = ("P", "G", "D", "L", "x_out")
HSUB_MODE_CONDITIONS = ("P", "G", "D", "L", "h_sub")
MODES = {"x": X_MODE_CONDITIONS, "hsub": HSUB_MODE_CONDITIONS}

SPLIT_LABELS = ("train", "val", "test")


@dataclass(frozen=True)
class ChfRecord:
    D: float
    L: float
    P: float
    G: float
    chf: float
    x_out: float | None = None
    h_sub: float | None = None
    T_in: float | None = None

    def violations(self) -> list[str]:
        """Return the invariant violations of this record (empty if valid)."""
        bad = []
        for name in ("D", "L", "P", "G", "chf"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                bad.append(f"{name}={value!r} must be > 0")
        if self.x_out is not None and not (-1.0 < self.x_out < 1.5):
            bad.append(f"x_out={self.x_out!r} outside (-1, 1.5)")
        if self.h_sub is not None and not (math.isfinite(self.h_sub) and self.h_sub >= 0):
            bad.append(f"h_sub={self.h_sub!r} must be >= 0")
        return bad

    def get(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise SchemaError(f"record lacks column {name!r}")
        return value


@dataclass
class CsvSchema:
    """Map canonical column names to CSV headers and unit multipliers.

    A value read from the file is multiplied by ``units[name]`` (default 1) to
    land in canonical units, e.g. ``units={"D": 1e-3}`` for diameters in mm.
    Columns absent from ``headers`` use their canonical name as header.
    """

    headers: dict[str, str] = field(default_factory=dict)
    units: dict[str, float] = field(default_factory=dict)
    delimiter: str = ","

    def __post_init__(self):
        for name in list(self.headers) + list(self.units):
            if name not in COLUMNS:
                raise SchemaError(f"unknown canonical column {name!r}")

    def header_for(self, name: str) -> str:
        return self.headers.get(name, name)

    def multiplier(self, name: str) -> float:
        return float(self.units.get(name, 1.0))


@dataclass
class Rejection:
    line: int
    reason: str


@dataclass
class LoadResult:
    records: list[ChfRecord]
    rejections: list[Rejection]
    n_rows: int

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def summary(self) -> str:
        return (f"rows={self.n_rows} accepted={len(self.records)} "
                f"rejected={len(self.rejections)}")


def _normalize(header: str) -> str:
    return header.strip().lower()


def load_csv(path, schema: CsvSchema | None = None) -> LoadResult:
    """Read a CHF table.

    Rows violating :class:`ChfRecord` invariants are rejected (with their
    physical line number) rather than raising; non-numeric cells raise
    :class:`DataParseError`.  Lines starting with ``#`` are skipped.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")

    records: list[ChfRecord] = []
    rejections: list[Rejection] = []
    n_rows = 0
    with path.open(newline="", encoding="utf-8") as fh:
        lines = ((i, line) for i, line in enumerate(fh, start=1)
                 if line.strip() and not line.lstrip().startswith("#"))
        numbered = list(lines)
        if not numbered:
            raise SchemaError(f"{path}: missing header row")
        reader = csv.reader((line for _, line in numbered), delimiter=schema.delimiter)
        header = [_normalize(h) for h in next(reader)]
        index = {}
        for name in COLUMNS:
            wanted = _normalize(schema.header_for(name))
            if wanted in header:
                index[name] = header.index(wanted)
            elif name in REQUIRED_COLUMNS:
                raise SchemaError(f"{path}: missing column {schema.header_for(name)!r} (for {name})")

        for (line_no, _), row in zip(numbered[1:], reader):
            n_rows += 1
            values = {}
            for name, col in index.items():
                cell = row[col].strip() if col < len(row) else ""
                if cell == "" and name not in REQUIRED_COLUMNS:
                    continue
                try:
                    values[name] = float(cell) * schema.multiplier(name)
                except ValueError:
                    raise DataParseError(
                        f"{path}:{line_no}: non-numeric value {cell!r} in column {name}",
                        line=line_no) from None
            record = ChfRecord(**values)
            bad = record.violations()
            if bad:
                rejections.append(Rejection(line_no, "; ".join(bad)))
            else:
                records.append(record)
    return LoadResult(records, rejections, n_rows)


def write_records_csv(path, records: Sequence[ChfRecord], columns=COLUMNS, header_lines=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            writer.writerow(["" if getattr(r, c) is None else repr(getattr(r, c)) for c in columns])


def records_to_matrix(records: Sequence[ChfRecord], columns: Sequence[str]) -> np.ndarray:
    out = np.empty((len(records), len(columns)), dtype=np.float64)
    for j, name in enumerate(columns):
        if name not in COLUMNS:
            raise SchemaError(f"unknown column {name!r}")
        for i, r in enumerate(records):
            out[i, j] = r.get(name)
    return out


def select_features(records: Sequence[ChfRecord], mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(conditions, chf)`` for ``mode`` in ``{"x", "hsub"}``.

    Condition columns are ordered (P, G, D, L, x_out) or (P, G, D, L, h_sub).
    The unconditional model uses ``np.column_stack([conditions, chf])``.
    """
    try:
        columns = MODES[mode]
    except KeyError:
        raise ConfigError(f"unknown feature mode {mode!r}; expected one of {sorted(MODES)}") from None
    return records_to_matrix(records, columns), records_to_matrix(records, ("chf",))[:, 0]


def condition_columns(mode: str) -> tuple[str, ...]:
    try:
        return MODES[mode]
    except KeyError:
        raise ConfigError(f"unknown feature mode {mode!r}; expected one of {sorted(MODES)}") from None


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class StandardScaler:
    """Per-column z-scoring with the population standard deviation."""

    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, matrix, columns: Sequence[str]) -> "StandardScaler":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != len(columns):
            raise SchemaError(f"matrix shape {matrix.shape} does not match {len(columns)} columns")
        if matrix.shape[0] == 0:
            raise SchemaError("cannot fit a scaler on zero rows")
        mean = matrix.mean(axis=0)
        std = matrix.std(axis=0)
        for name, s in zip(columns, std):
            if not s > 0:
                raise SchemaError(f"column {name!r} is constant; cannot standardize")
        return cls(tuple(columns), mean, std)

    def transform(self, matrix) -> np.ndarray:
        matrix = self._check(matrix)
        return (matrix - self.mean) / self.std

    def inverse_transform(self, matrix) -> np.ndarray:
        matrix = self._check(matrix)
        return matrix * self.std + self.mean

    def subset(self, columns: Iterable[str]) -> "StandardScaler":
        columns = tuple(columns)
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise SchemaError(f"scaler does not cover columns {missing}")
        idx = [self.columns.index(c) for c in columns]
        return StandardScaler(columns, self.mean[idx].copy(), self.std[idx].copy())

    def _check(self, matrix) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[-1] != len(self.columns):
            raise SchemaError(
                f"matrix has {matrix.shape[-1]} columns, scaler covers {len(self.columns)}")
        return matrix


def fit_scaler(records: Sequence[ChfRecord], columns: Sequence[str]) -> StandardScaler:
    return StandardScaler.fit(records_to_matrix(records, columns), columns)


def transform(records, scaler: StandardScaler) -> np.ndarray:
    if not isinstance(records, np.ndarray):
        records = records_to_matrix(records, scaler.columns)
    return scaler.transform(records)


def inverse_transform(matrix, scaler: StandardScaler) -> np.ndarray:
    return scaler.inverse_transform(matrix)


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class DataSplit:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def indices(self, label: str) -> tuple[int, ...]:
        if label not in SPLIT_LABELS:
            raise ConfigError(f"unknown split label {label!r}")
        return getattr(self, label)

    def labels(self, n: int) -> list[str]:
        out = [""] * n
        for label in SPLIT_LABELS:
            for i in getattr(self, label):
                out[i] = label
        return out

    def to_csv(self, path, header_lines=()):
        n = sum(self.sizes())
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("row_index,split_label\n")
            for i, label in enumerate(self.labels(n)):
                fh.write(f"{i},{label}\n")

    @classmethod
    def from_csv(cls, path, seed: int = -1) -> "DataSplit":
        groups = {label: [] for label in SPLIT_LABELS}
        with open(path, newline="", encoding="utf-8") as fh:
            rows = csv.reader(line for line in fh if not line.startswith("#"))
            head = next(rows)
            if head != ["row_index", "split_label"]:
                raise SchemaError(f"{path}: not a split manifest")
            for idx, label in rows:
                if label not in groups:
                    raise SchemaError(f"{path}: unknown split label {label!r}")
                groups[label].append(int(idx))
        return cls(*(tuple(groups[label]) for label in SPLIT_LABELS), seed=seed)


def split_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    """Validation/test get ``round(f * n)`` (at least one each), train the rest."""
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError(f"fractions must be three non-negative numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)!r}")
    if n < 3:
        raise ConfigError(f"need at least 3 records to split, got {n}")
    n_val, n_test = (max(1, math.floor(f * n + 0.5)) if f > 0 else 0 for f in fractions[1:])
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ConfigError(f"fractions {fractions} leave no training records out of {n}")
    return n_train, n_val, n_test


def split(records, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> DataSplit:
    n = len(records)
    n_train, n_val, _ = split_sizes(n, fractions)
    order = np.random.default_rng(seed).permutation(n)
    train = tuple(sorted(int(i) for i in order[:n_train]))
    val = tuple(sorted(int(i) for i in order[n_train:n_train + n_val]))
    test = tuple(sorted(int(i) for i in order[n_train + n_val:]))
    return DataSplit(train, val, test, seed)


def subset(records: Sequence[ChfRecord], indices: Iterable[int]) -> list[ChfRecord]:
    return [records[i] for i in indices]
