"""Observed-data containers, CSV ingestion, and fold plans for cross-fitting.

The on-disk format is a plain UTF-8 CSV with header ``x1,...,xd,a,y``;
columns are matched by name, never by position.  Lines starting with ``#``
are metadata comments and are skipped on read, which lets emitted datasets
carry their generating configuration without breaking round-trips.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .rng import RngStream


class TreatmentKind(enum.Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Observation:
    """One record (x, a, y); all entries must be finite."""

    x: tuple[float, ...]
    a: float
    y: float

    def __post_init__(self):
        vals = (*self.x, self.a, self.y)
        if not all(math.isfinite(v) for v in vals):
            raise DataError("observation contains a non-finite value")


@dataclass(frozen=True)
class Dataset:
    """Immutable columnar dataset.

    Arrays are frozen (non-writeable) after construction, so a Dataset can be
    shared read-only across parallel workers.
    """

    x: np.ndarray  # shape (n, dim)
    a: np.ndarray  # shape (n,)
    y: np.ndarray  # shape (n,)
    kind: TreatmentKind

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        a = np.asarray(self.a, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape[0] != a.shape[0] or a.shape[0] != y.shape[0]:
            raise DataError("column lengths disagree")
        if x.shape[0] < 1:
            raise DataError("dataset must contain at least one row")
        if not (np.isfinite(x).all() and np.isfinite(a).all() and np.isfinite(y).all()):
            raise DataError("dataset contains non-finite values")
        if self.kind is TreatmentKind.BINARY:
            if not np.isin(a, (0.0, 1.0)).all():
                bad = int(np.flatnonzero(~np.isin(a, (0.0, 1.0)))[0]) + 1
                raise DataError(f"non-binary treatment at row {bad}")
        else:
            if np.unique(a).size < 2:
                raise DataError("continuous treatment needs at least 2 distinct values")
        for name, arr in (("x", x), ("a", a), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def row(self, i: int) -> Observation:
        return Observation(tuple(self.x[i]), float(self.a[i]), float(self.y[i]))

    def with_kind(self, kind: TreatmentKind) -> "Dataset":
        """Same rows re-tagged; revalidates the new kind's invariants."""
        return Dataset(self.x, self.a, self.y, kind)


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of rows to k cross-fitting folds.

    Pure function of (n, k, seed): rebuilding with the same arguments gives an
    elementwise-identical assignment.
    """

    n: int
    k: int
    assignment: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (self.n,):
            raise ConfigError("fold assignment length must equal n")
        sizes = np.bincount(a, minlength=self.k)
        if sizes.size != self.k or (sizes == 0).any():
            raise ConfigError("every fold must be nonempty")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def eval_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def make_folds(n: int, k: int, seed: int) -> FoldPlan:
    """Balanced k-fold plan; fold sizes differ by at most one."""
    if k < 2 or k > n:
        raise ConfigError(f"fold count must satisfy 2 <= k <= n, got k={k}, n={n}")
    perm = RngStream(seed, stream_id=0x0F01D5).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return FoldPlan(n=n, k=k, assignment=assignment, seed=seed)


def _expected_columns(header: Sequence[str]) -> int:
    names = set(header)
    if "a" not in names:
        raise DataError("missing column a")
    if "y" not in names:
        raise DataError("missing column y")
    d = 0
    while f"x{d + 1}" in names:
        d += 1
    if d == 0:
        raise DataError("missing column x1")
    expected = {f"x{j + 1}" for j in range(d)} | {"a", "y"}
    extra = names - expected
    if extra:
        raise DataError(f"unexpected column {sorted(extra)[0]}")
    if len(header) != len(names):
        raise DataError("duplicate column in header")
    return d


def load_csv(path: str | Path, kind: TreatmentKind) -> Dataset:
    """Parse a dataset CSV; validation errors carry the 1-based data row."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError("empty file")
    header = [c.strip() for c in rows[0]]
    d = _expected_columns(header)
    cols = {name: header.index(name) for name in header}
    xs, as_, ys = [], [], []
    for i, rec in enumerate(rows[1:], start=1):
        if len(rec) != len(header):
            raise DataError(f"wrong field count at row {i}")

        def cell(name, rec=rec, i=i):
            raw = rec[cols[name]].strip()
            try:
                v = float(raw)
            except ValueError:
                raise DataError(f"non-numeric {name} at row {i}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite {name} at row {i}")
            return v

        a = cell("a")
        if kind is TreatmentKind.BINARY and a not in (0.0, 1.0):
            raise DataError(f"non-binary treatment at row {i}")
        xs.append([cell(f"x{j + 1}") for j in range(d)])
        as_.append(a)
        ys.append(cell("y"))
    if not xs:
        raise DataError("file has a header but no data rows")
    return Dataset(np.array(xs), np.array(as_), np.array(ys), kind)


def write_csv(dataset: Dataset, path: str | Path, comments: Sequence[str] = ()) -> None:
    """Write a dataset with full-precision floats (``repr`` round-trips exactly)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow([f"x{j + 1}" for j in range(dataset.dim)] + ["a", "y"])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.x[i]]
                + [repr(float(dataset.a[i])), repr(float(dataset.y[i]))]
            )
