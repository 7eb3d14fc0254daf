"""Weighted least-squares regression trees used as boosting weak learners.

Targets are the labels in {-1, +1}; each leaf predicts the weighted label mean
clamped to ``[-M, M]``. Numeric and Boolean columns split on midpoints
between adjacent distinct values, categorical columns on one-vs-rest
singletons. Split search is vectorised across features using the dataset's
presorted column orders.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

LEAF = -1


@dataclass(frozen=True, eq=False)
class WeightedSample:
    dataset: Dataset
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.dataset.m,):
            raise ValueError("one weight per example is required")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("all weights are zero")
        object.__setattr__(self, "weights", w)


@dataclass(eq=False)
class Tree:
    """Array-encoded binary tree; node 0 is the root.

    Internal nodes route ``x[feature] <= threshold`` (numeric) or
    ``x[feature] == category`` (categorical) to ``left``. ``majority_left``
    routes categories never seen in training at that node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    categorical: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    majority_left: np.ndarray
    depth: int
    M_bound: float
    n_features: int
    seen: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_splits(self) -> int:
        return int((self.feature != LEAF).sum())

    def leaf_values(self) -> np.ndarray:
        return self.value[self.feature == LEAF]

    @classmethod
    def from_nodes(cls, nodes: list[dict], depth: int, M: float, n_features: int,
                   seen: dict | None = None) -> "Tree":
        """Build from dicts with keys feature/threshold/left/right/value (and optionals)."""
        def col(key, default, dtype):
            return np.array([n.get(key, default) for n in nodes], dtype=dtype)

        return cls(col("feature", LEAF, np.int64), col("threshold", np.nan, float),
                   col("categorical", False, bool), col("left", LEAF, np.int64),
                   col("right", LEAF, np.int64), col("value", 0.0, float),
                   col("gain", 0.0, float), col("majority_left", True, bool),
                   depth, float(M), n_features, dict(seen or {}))


def _best_numeric(sub, xs, w, wy, minw):
    """Best midpoint split per feature given member rows ``sub`` sorted per feature.

    ``sub`` and ``xs`` are ``(d, n)`` row indices and their values. Returns
    (gain, threshold) arrays of length d, gain -inf where no valid cut exists.
    """
    d, n = sub.shape
    if n < 2:
        return np.full(d, -np.inf), np.zeros(d)
    cw = np.cumsum(w[sub], axis=1)
    cs = np.cumsum(wy[sub], axis=1)
    W, S = cw[:, -1:], cs[:, -1:]
    wl, sl = cw[:, :-1], cs[:, :-1]
    wr, sr = W - wl, S - sl
    ok = (xs[:, :-1] < xs[:, 1:]) & (wl >= minw) & (wr >= minw)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = sl * sl / wl + sr * sr / wr - S * S / W
    g = np.where(ok, g, -np.inf)
    k = np.argmax(g, axis=1)
    rows = np.arange(d)
    thr = 0.5 * (xs[rows, k] + xs[rows, np.minimum(k + 1, n - 1)])
    return g[rows, k], thr


def _best_categorical(codes, n_cat, rows, w, wy, minw):
    cw = np.bincount(codes[rows], weights=w[rows], minlength=n_cat)
    cs = np.bincount(codes[rows], weights=wy[rows], minlength=n_cat)
    W, S = cw.sum(), cs.sum()
    wr, sr = W - cw, S - cs
    ok = (cw >= minw) & (wr >= minw)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = cs * cs / cw + sr * sr / wr - S * S / W
    g = np.where(ok, g, -np.inf)
    k = int(np.argmax(g))
    return g[k], float(k)


def fit_tree(ws: WeightedSample, depth: int = 3, M: float = 1.0,
             min_leaf_frac: float = 1e-9) -> Tree:
    """Greedy top-down weighted least-squares tree of at most ``depth`` levels.

    Ties between equal-gain splits go to the lowest feature index, then the
    lowest threshold (or category code).
    """
    ds = ws.dataset
    if ds.m < 2:
        raise ValueError("need at least two examples")
    if depth not in (1, 2, 3):
        raise ValueError("depth must be 1, 2 or 3")
    if not M > 0:
        raise ValueError("M must be positive")
    X, y, w = ds.X, ds.y.astype(float), ws.weights
    wy = w * y
    minw = min_leaf_frac * w.sum()
    cat_cols = [j for j, c in enumerate(ds.columns) if c.kind == "categorical"]
    num_cols = [j for j in range(ds.d) if j not in cat_cols]
    # per-feature sorted member rows; a node's rows are sub[0] (or all rows when d_num = 0)
    if num_cols:
        root_sub = np.ascontiguousarray(ds.orders[:, num_cols].T)
        root_xs = np.take_along_axis(X[:, num_cols].T, root_sub, axis=1)
    else:
        root_sub = np.arange(ds.m)[None, :]
        root_xs = np.zeros((1, ds.m))
    codes = {j: X[:, j].astype(np.int64) for j in cat_cols}
    nodes: list[dict] = []

    def grow(sub, xs, level) -> int:
        rows = sub[0]
        W, S = w[rows].sum(), wy[rows].sum()
        idx = len(nodes)
        nodes.append({"value": float(np.clip(S / W if W > 0 else 0.0, -M, M))})
        if level >= depth or rows.size < 2:
            return idx
        gains = np.full(ds.d, -np.inf)
        params = np.zeros(ds.d)
        if num_cols:
            gains[num_cols], params[num_cols] = _best_numeric(sub, xs, w, wy, minw)
        for j in cat_cols:
            gains[j], params[j] = _best_categorical(codes[j], len(ds.columns[j].alphabet),
                                                    rows, w, wy, minw)
        j = int(np.argmax(gains))
        if not gains[j] > 1e-12 * W:
            return idx
        is_cat = j in codes
        go_left = (X[:, j] == params[j]) if is_cat else (X[:, j] <= params[j])
        wl = w[rows[go_left[rows]]].sum()
        nodes[idx].update(feature=j, threshold=params[j], categorical=is_cat, gain=float(gains[j]),
                          majority_left=bool(wl >= W - wl))
        # children inherit the parent's per-feature order, filtered
        sel = go_left[sub]
        k = sub.shape[0]
        nodes[idx]["left"] = grow(sub[sel].reshape(k, -1), xs[sel].reshape(k, -1), level + 1)
        nodes[idx]["right"] = grow(sub[~sel].reshape(k, -1), xs[~sel].reshape(k, -1), level + 1)
        return idx

    grow(root_sub, root_xs, 0)
    seen = {j: np.unique(codes[j][w > 0]) for j in cat_cols}
    return Tree.from_nodes(nodes, depth, M, ds.d, seen)


def predict(t: Tree, X, return_unseen: bool = False):
    """Leaf values for the rows of ``X`` (a single row is accepted too)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != t.n_features:
        raise ValueError(f"expected {t.n_features} features, got {X.shape[1]}")
    node = np.zeros(X.shape[0], dtype=np.int64)
    unseen = 0
    rows = np.arange(X.shape[0])
    for _ in range(t.depth):
        f = t.feature[node]
        internal = f != LEAF
        if not internal.any():
            break
        fi = np.where(internal, f, 0)
        xv = X[rows, fi]
        thr = t.threshold[node]
        cat = t.categorical[node]
        go_left = np.where(cat, xv == thr, xv <= thr)
        if cat.any():
            for j, known in t.seen.items():
                odd = internal & cat & (f == j) & ~np.isin(xv, known)
                if odd.any():
                    unseen += int(odd.sum())
                    go_left = np.where(odd, t.majority_left[node], go_left)
        nxt = np.where(go_left, t.left[node], t.right[node])
        node = np.where(internal, nxt, node)
    out = t.value[node]
    if unseen:
        warnings.warn(f"{unseen} unseen categorical value(s) routed to the majority child",
                      stacklevel=2)
    res = float(out[0]) if single else out
    return (res, unseen) if return_unseen else res


def feature_importance(trees, n_features: int | None = None) -> np.ndarray:
    """Split gains summed per feature, weighted by ``|beta|`` and normalised to 1."""
    trees = list(trees)
    if n_features is None:
        if not trees:
            raise ValueError("need n_features for an empty ensemble")
        n_features = trees[0][0].n_features
    imp = np.zeros(n_features)
    for tree, beta in trees:
        internal = tree.feature != LEAF
        np.add.at(imp, tree.feature[internal], abs(beta) * tree.gain[internal])
    s = imp.sum()
    if not s > 0:
        warnings.warn("ensemble has no informative splits; returning a uniform profile",
                      stacklevel=2)
        return np.full(n_features, 1.0 / n_features)
    return imp / s
