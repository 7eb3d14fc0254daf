"""Tabular datasets with a declared schema, CSV I/O, seeded splits and the
synthetic xd6 Boolean benchmark."""
from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

KINDS = ("numeric", "boolean", "categorical")

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = "numeric"
    alphabet: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.alphabet:
                raise ValueError(f"categorical column {self.name!r} needs an alphabet")
            object.__setattr__(self, "alphabet", tuple(str(a) for a in self.alphabet))
            if len(set(self.alphabet)) != len(self.alphabet):
                raise ValueError(f"column {self.name!r}: repeated symbols in alphabet")
        elif self.alphabet is not None:
            raise ValueError(f"column {self.name!r}: only categorical columns take an alphabet")

    @classmethod
    def parse(cls, spec) -> "Column":
        """Accepts a Column, a mapping ``{name, type|kind, alphabet}`` or a tuple."""
        if isinstance(spec, Column):
            return spec
        if isinstance(spec, Mapping):
            kind = spec.get("type", spec.get("kind", "numeric"))
            alpha = spec.get("alphabet")
            return cls(str(spec["name"]), kind, tuple(alpha) if alpha is not None else None)
        name, kind, *rest = spec
        return cls(str(name), kind, tuple(rest[0]) if rest and rest[0] is not None else None)

    def encode(self, cell: str) -> float:
        cell = cell.strip()
        if self.kind == "numeric":
            v = float(cell)
            if not math.isfinite(v):
                raise ValueError("non-finite value")
            return v
        if self.kind == "boolean":
            low = cell.lower()
            if low in _TRUE:
                return 1.0
            if low in _FALSE:
                return 0.0
            raise ValueError(f"not a boolean: {cell!r}")
        return float(self.alphabet.index(cell))

    def decode(self, v: float) -> str:
        if self.kind == "numeric":
            return repr(float(v))
        if self.kind == "boolean":
            return "1" if v else "0"
        return self.alphabet[int(v)]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature table ``X`` (categorical cells hold alphabet codes) and labels in {-1, +1}."""

    X: np.ndarray
    y: np.ndarray
    columns: tuple[Column, ...]
    label_names: tuple[str, str] = ("-1", "1")
    name: str = "dataset"

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=np.int8)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be m x d and y of length m")
        if X.shape[1] != len(self.columns):
            raise ValueError("schema length does not match the number of feature columns")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be in {-1, +1}")
        for j, c in enumerate(self.columns):
            col = X[:, j]
            if c.kind == "boolean" and not np.all((col == 0) | (col == 1)):
                raise ValueError(f"boolean column {c.name!r} holds non-0/1 values")
            if c.kind == "categorical" and not np.all(
                (col == np.round(col)) & (col >= 0) & (col < len(c.alphabet))
            ):
                raise ValueError(f"categorical column {c.name!r} holds invalid codes")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def orders(self) -> np.ndarray:
        """Stable per-column sort orders, shape ``(m, d)``."""
        o = np.argsort(self.X, axis=0, kind="stable")
        o.setflags(write=False)
        return o

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update(repr(self.columns).encode())
        return h.hexdigest()[:16]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(f"no column named {name!r}")

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.columns, self.label_names, self.name)

    def replace(self, X=None, y=None) -> "Dataset":
        return Dataset(self.X if X is None else X, self.y if y is None else y,
                       self.columns, self.label_names, self.name)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.columns == other.columns
            and self.label_names == other.label_names
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True)
class SplitPlan:
    train_fraction: float = 0.7
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be >= 1")


def split(ds: Dataset, plan: SplitPlan, fold: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle then a train/test cut; the permutation depends on ``(seed, fold)``."""
    if not 0 <= fold < plan.folds:
        raise ValueError(f"fold must be in [0, {plan.folds})")
    rng = np.random.default_rng(np.random.SeedSequence([plan.seed, fold]))
    perm = rng.permutation(ds.m)
    n_train = int(round(plan.train_fraction * ds.m))
    if ds.m >= 2:
        n_train = min(max(n_train, 1), ds.m - 1)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


# --------------------------------------------------------------------------
# CSV


class CsvError(ValueError):
    pass


def load_csv(path, schema_spec: Sequence, label_column: str, positive_label: str,
             name: str | None = None) -> Dataset:
    """Parse a headed CSV against a declared schema.

    Rows with an unparseable or missing cell are dropped, and the drop count is
    reported through a warning. Labels equal to ``positive_label`` map to +1,
    the other label value to -1.
    """
    columns = tuple(Column.parse(s) for s in schema_spec)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c.name for c in columns if c.name not in header]
        if label_column not in header:
            missing.append(label_column)
        if missing:
            raise CsvError(f"{path}: missing column(s) {missing}")
        pos = [header.index(c.name) for c in columns]
        lab = header.index(label_column)
        rows, labels, bad = [], [], 0
        for rec in reader:
            if not rec:
                continue
            try:
                if len(rec) != len(header):
                    raise ValueError("ragged row")
                rows.append([c.encode(rec[p]) for c, p in zip(columns, pos)])
                cell = rec[lab].strip()
                if not cell:
                    raise ValueError("missing label")
                labels.append(cell)
            except ValueError:
                if len(rows) > len(labels):
                    rows.pop()
                bad += 1
    if bad:
        warnings.warn(f"{path}: dropped {bad} unparseable row(s)", stacklevel=2)
    if not rows:
        raise CsvError(f"{path}: no usable rows")
    values = sorted(set(labels))
    if len(values) > 2:
        raise CsvError(f"{path}: label column {label_column!r} is not binary: {values[:5]}")
    positive_label = str(positive_label)
    others = [v for v in values if v != positive_label]
    negative = others[0] if others else "-1"
    y = np.where(np.array(labels) == positive_label, 1, -1)
    X = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return Dataset(X, y, columns, (negative, positive_label), name or path.stem)


def write_csv(ds: Dataset, path, label_column: str = "label") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    neg, pos = ds.label_names
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in ds.columns] + [label_column])
        for row, yi in zip(ds.X, ds.y):
            w.writerow([c.decode(v) for c, v in zip(ds.columns, row)] + [pos if yi == 1 else neg])
    return path


def schema_to_dicts(columns: Iterable[Column]) -> list[dict]:
    out = []
    for c in columns:
        d = {"name": c.name, "type": c.kind}
        if c.alphabet is not None:
            d["alphabet"] = list(c.alphabet)
        out.append(d)
    return out


# --------------------------------------------------------------------------
# xd6


def xd6_label(X: np.ndarray) -> np.ndarray:
    """``(x1 & x2 & x3) | (x4 & x5 & x6) | (x7 & x8 & x9)`` as +/-1."""
    B = np.asarray(X, dtype=bool).reshape(-1, 3, 3)
    return np.where(B.all(axis=2).any(axis=1), 1, -1)


def synth_xd6(m: int = 973, seed: int = 0) -> Dataset:
    """Nine fair Boolean features labelled by the xd6 three-term DNF."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(m, 9)).astype(float)
    cols = tuple(Column(f"x{j + 1}", "boolean") for j in range(9))
    return Dataset(X, xd6_label(X), cols, ("-1", "1"), "xd6")
