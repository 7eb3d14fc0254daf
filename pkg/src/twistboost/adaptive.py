"""Data-driven choice of a fixed alpha from an estimated symmetric noise rate.

The noise rate is read off the extreme leaf posteriors of one shallow
information-gain tree, ``p = sqrt(eta_min (1 - eta_max))``; alpha then
undoes symmetric label noise at the average posterior.
"""
from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .losses import is_bayes_blunting, sln_twist_posterior

ALPHA_CAP = (1.0, 8.0)
P_CAP = 0.5 - 1e-6


@dataclass(frozen=True)
class NoiseEstimate:
    eta_min: float
    eta_max: float
    p_hat: float
    eta_c_avg: float
    alpha0: float
    blunting: bool = True

    def __post_init__(self):
        if not 0.0 <= self.eta_min <= self.eta_max <= 1.0:
            raise ValueError("need 0 <= eta_min <= eta_max <= 1")


def _entropy_counts(pos, n):
    """Total entropy (nats) ``n * H(pos / n)``; zero where n == 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(n > 0, pos / np.where(n > 0, n, 1), 0.0)
        h = -(np.where(q > 0, q * np.log(q), 0.0) + np.where(q < 1, (1 - q) * np.log1p(-q), 0.0))
    return n * h


def _best_split(ds: Dataset, mask: np.ndarray, min_leaf: int):
    """Best information-gain split of the rows in ``mask``: (gain, feature, kind, param)."""
    n = int(mask.sum())
    if n < 2 * min_leaf:
        return None
    pos_all = (ds.y == 1).astype(float)
    P = pos_all[mask].sum()
    parent = float(_entropy_counts(np.array(P), np.array(float(n))))
    best = None
    cat = [j for j, c in enumerate(ds.columns) if c.kind == "categorical"]
    num = [j for j in range(ds.d) if j not in cat]
    if num:
        orders = ds.orders[:, num].T
        sub = orders[mask[orders]].reshape(len(num), n)
        xs = np.take_along_axis(ds.X[:, num].T, sub, axis=1)
        cp = np.cumsum(pos_all[sub], axis=1)[:, :-1]
        nl = np.arange(1, n, dtype=float)
        g = parent - _entropy_counts(cp, nl) - _entropy_counts(P - cp, n - nl)
        ok = (xs[:, :-1] < xs[:, 1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        g = np.where(ok, g, -np.inf)
        flat = int(np.argmax(g))
        r, k = divmod(flat, n - 1)
        if np.isfinite(g[r, k]):
            best = (float(g[r, k]), num[r], "num", 0.5 * (xs[r, k] + xs[r, k + 1]))
    for j in cat:
        codes = ds.X[mask, j].astype(int)
        k = len(ds.columns[j].alphabet)
        cnt = np.bincount(codes, minlength=k).astype(float)
        cp = np.bincount(codes, weights=pos_all[mask], minlength=k)
        g = parent - _entropy_counts(cp, cnt) - _entropy_counts(P - cp, n - cnt)
        g = np.where((cnt >= min_leaf) & (n - cnt >= min_leaf), g, -np.inf)
        c = int(np.argmax(g))
        if np.isfinite(g[c]) and (best is None or g[c] > best[0]):
            best = (float(g[c]), j, "cat", float(c))
    if best is None or not best[0] > 1e-12:
        return None
    return best


def estimate_posterior_range(train: Dataset, max_leaves: int | None = None,
                             min_leaf: int | None = None) -> tuple[float, float, float]:
    """Leaf posteriors of a best-first information-gain tree: (min, max, example-weighted mean).

    Leaf budget defaults to ``ceil(ln m)`` and minimum leaf size to ``ceil(2 sqrt m)``.
    """
    m = train.m
    if m < 16:
        raise ValueError("need at least 16 examples")
    max_leaves = max_leaves or math.ceil(math.log(m))
    min_leaf = min_leaf or math.ceil(2.0 * math.sqrt(m))
    pos = train.y == 1
    if pos.all() or (~pos).all():
        e = float(pos.mean())
        return e, e, e
    leaves = [np.ones(m, dtype=bool)]
    heap = []
    counter = 0

    def push(mask):
        nonlocal counter
        s = _best_split(train, mask, min_leaf)
        if s is not None:
            # max-heap on gain; the counter keeps ties in creation order
            heapq.heappush(heap, (-s[0], counter, s, mask))
            counter += 1

    push(leaves[0])
    final = [] if heap else [leaves[0]]
    while heap and len(final) + len(heap) < max_leaves:
        _, _, (g, j, kind, param), mask = heapq.heappop(heap)
        go = (train.X[:, j] == param) if kind == "cat" else (train.X[:, j] <= param)
        for child in (mask & go, mask & ~go):
            before = len(heap)
            push(child)
            if len(heap) == before:
                final.append(child)
    final.extend(h[3] for h in heap)
    post = np.array([pos[mk].mean() for mk in final])
    sizes = np.array([mk.sum() for mk in final], dtype=float)
    return float(post.min()), float(post.max()), float(sizes @ post / sizes.sum())


def estimate_sln_rate(eta_min: float, eta_max: float) -> float:
    if not 0.0 <= eta_min <= eta_max <= 1.0:
        raise ValueError("need 0 <= eta_min <= eta_max <= 1")
    return float(min(max(math.sqrt(eta_min * (1.0 - eta_max)), 0.0), P_CAP))


def _logit(u: float) -> float:
    return math.log(u) - math.log1p(-u)


def estimate_alpha0(p_hat: float, eta_c_avg: float, eta_t: float | None = None) -> float:
    """``logit(eta_c) / logit(eta_t)`` capped to [1, 8]; ``eta_t`` defaults to SLN of ``eta_c``."""
    if not 0.0 <= p_hat < 0.5:
        raise ValueError("p_hat must lie in [0, 1/2)")
    if not 0.0 < eta_c_avg < 1.0:
        raise ValueError("eta_c_avg must lie in (0, 1)")
    if eta_c_avg == 0.5:
        warnings.warn("average posterior is 1/2: alpha0 defaults to 1", stacklevel=2)
        return 1.0
    if eta_t is None:
        eta_t = float(sln_twist_posterior(eta_c_avg, p_hat))
    if eta_t in (0.0, 1.0) or eta_t == 0.5:
        warnings.warn("twisted posterior is degenerate: alpha0 capped", stacklevel=2)
        return ALPHA_CAP[1] if eta_t == 0.5 else ALPHA_CAP[0]
    a = _logit(eta_c_avg) / _logit(eta_t)
    return float(min(max(a, ALPHA_CAP[0]), ALPHA_CAP[1]))


def estimate_noise(train: Dataset, **tree_kw) -> NoiseEstimate:
    lo, hi, avg = estimate_posterior_range(train, **tree_kw)
    p = estimate_sln_rate(lo, hi)
    if avg in (0.0, 1.0):
        return NoiseEstimate(lo, hi, p, avg, 1.0, True)
    eta_t = float(sln_twist_posterior(avg, p))
    blunting = bool(is_bayes_blunting(avg, eta_t))
    if not blunting:
        warnings.warn("estimated twist is not Bayes blunting", stacklevel=2)
    return NoiseEstimate(lo, hi, p, avg, estimate_alpha0(p, avg), blunting)


@dataclass(frozen=True)
class ConfusionEstimate:
    """Estimate that peeks at clean validation labels (oracle variant)."""

    p_hat: float
    eta_c_hat: float
    eta_t_hat: float
    alpha0: float
    counts: dict


def estimate_from_confusion(predictions, clean_labels) -> ConfusionEstimate:
    pred = np.asarray(predictions)
    true = np.asarray(clean_labels)
    if pred.shape != true.shape or pred.size == 0:
        raise ValueError("predictions and labels must be equal-length and nonempty")
    tp = int(np.sum((pred == 1) & (true == 1)))
    fp = int(np.sum((pred == 1) & (true == -1)))
    fn = int(np.sum((pred == -1) & (true == 1)))
    tn = int(np.sum((pred == -1) & (true == -1)))
    n = tp + fp + fn + tn
    terms = []
    for num, den, label in ((fp, tp + fp, "FP/(TP+FP)"), (fn, fn + tn, "FN/(FN+TN)")):
        if den == 0:
            warnings.warn(f"{label} has an empty denominator; dropped from the average", stacklevel=2)
        else:
            terms.append(num / den)
    p = float(np.mean(terms)) if terms else 0.0
    eta_c = (fn + tp) / n
    eta_t = (fp + tp) / n
    if p == 0.0 or eta_c in (0.0, 1.0):
        alpha0 = 1.0
    else:
        alpha0 = estimate_alpha0(min(p, P_CAP), eta_c, eta_t)
    return ConfusionEstimate(p, eta_c, eta_t, alpha0, {"TP": tp, "FP": fp, "FN": fn, "TN": tn})
