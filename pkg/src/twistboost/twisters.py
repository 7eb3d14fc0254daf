"""Corruptions applied to a training split: symmetric class noise, Boolean
feature flips and the insider twister (Gaussian jitter on numeric columns,
cyclic symbol shifts on categorical ones)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset

KINDS = ("none", "class_noise", "feature_noise", "insider")


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _check_prob(*ps):
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")


@dataclass(frozen=True)
class InsiderRule:
    """``gaussian``: add N(0, sigma^2) noise; ``increment``: cyclic +1 with prob ``prob``."""

    column: str | int
    kind: str = "gaussian"
    sigma: float = 60.0
    prob: float = 0.5

    def __post_init__(self):
        if self.kind not in ("gaussian", "increment"):
            raise ValueError(f"unknown insider rule kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        _check_prob(self.prob)

    @classmethod
    def parse(cls, spec) -> "InsiderRule":
        return spec if isinstance(spec, InsiderRule) else cls(**spec)


@dataclass(frozen=True)
class TwisterSpec:
    kind: str = "none"
    p: float = 0.0
    p1: float | None = None
    p2: float | None = None
    rules: tuple[InsiderRule, ...] = field(default_factory=tuple)
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown twister kind {self.kind!r}")
        _check_prob(self.p)
        if self.kind == "feature_noise":
            # a single level p sets both stages unless they are given separately
            object.__setattr__(self, "p1", self.p if self.p1 is None else self.p1)
            object.__setattr__(self, "p2", self.p if self.p2 is None else self.p2)
            _check_prob(self.p1, self.p2)
        object.__setattr__(self, "rules", tuple(InsiderRule.parse(r) for r in self.rules))

    @property
    def level(self) -> float:
        return self.p

    def apply(self, train: Dataset, rng=None) -> Dataset:
        rng = _rng(self.rng_seed if rng is None else rng)
        if self.kind == "class_noise":
            return apply_class_noise(train, self.p, rng)
        if self.kind == "feature_noise":
            return apply_feature_noise(train, self.p1, self.p2, rng)
        if self.kind == "insider":
            return apply_insider_twist(train, self.rules, rng)
        return train

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "p": self.p}
        if self.kind == "feature_noise":
            d.update(p1=self.p1, p2=self.p2)
        if self.rules:
            d["rules"] = [r.__dict__.copy() for r in self.rules]
        return d


def apply_class_noise(train: Dataset, p: float, rng) -> Dataset:
    """Flip each label independently with probability ``p``."""
    _check_prob(p)
    flip = _rng(rng).random(train.m) < p
    return train.replace(y=np.where(flip, -train.y, train.y))


def apply_feature_noise(train: Dataset, p1: float, p2: float, rng,
                        columns: Sequence[int] | None = None) -> Dataset:
    """Pick each row with prob ``p1``; in picked rows flip each Boolean cell with prob ``p2``."""
    _check_prob(p1, p2)
    cols = list(range(train.d)) if columns is None else list(columns)
    bad = [train.columns[j].name for j in cols if train.columns[j].kind != "boolean"]
    if bad:
        raise ValueError(f"feature noise targets non-Boolean column(s) {bad}")
    g = _rng(rng)
    picked = g.random(train.m) < p1
    flip = (g.random((train.m, len(cols))) < p2) & picked[:, None]
    X = train.X.copy()
    sub = X[:, cols]
    X[:, cols] = np.where(flip, 1.0 - sub, sub)
    return train.replace(X=X)


def apply_insider_twist(train: Dataset, rules: Sequence[InsiderRule], rng) -> Dataset:
    g = _rng(rng)
    X = train.X.copy()
    for rule in map(InsiderRule.parse, rules):
        j = rule.column if isinstance(rule.column, int) else train.column_index(rule.column)
        col = train.columns[j]
        if rule.kind == "gaussian":
            if col.kind != "numeric":
                raise ValueError(f"gaussian rule on non-numeric column {col.name!r}")
            X[:, j] += g.normal(0.0, rule.sigma, size=train.m)
        else:
            if col.kind != "categorical":
                raise ValueError(f"increment rule on non-categorical column {col.name!r}")
            bump = g.random(train.m) < rule.prob
            X[:, j] = np.where(bump, (X[:, j] + 1) % len(col.alphabet), X[:, j])
    return train.replace(X=X)
