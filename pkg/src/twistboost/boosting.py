"""PILBoost and an AdaBoost baseline with per-round convergence diagnostics.

PILBoost weights every example by the pseudo-inverse link of its negated
margin, fits a tree on those weights, and gives the tree the coefficient
``a_f * eta`` where ``eta = mean(w * y * h)`` is its (unnormalised) edge.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .links import PilTable, SurrogateEval, sigmoid_link
from .losses import AlphaParam
from .trees import Tree, WeightedSample, feature_importance, fit_tree, predict

ADABOOST = "adaboost"


@dataclass(frozen=True)
class BoostConfig:
    T: int = 1000
    a_f: float = 8.0
    alpha: float | str = 2.0
    tree_depth: int = 3
    M: float = 1.0
    rng_seed: int = 0
    diagnostics: bool = True
    stop_weight_frac: float = 1e-9

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.a_f > 0:
            raise ValueError("a_f must be positive")
        if self.alpha != ADABOOST:
            a = float(self.alpha)
            if not (a == 1.0 or 1.0 < a < math.inf):
                raise ValueError(f"PILBoost needs alpha = 1 or finite alpha > 1, got {a}")
            object.__setattr__(self, "alpha", a)

    @property
    def is_adaboost(self) -> bool:
        return self.alpha == ADABOOST


def make_link(alpha: float):
    """Sigmoid at alpha = 1, the alpha-PIL otherwise."""
    if alpha == 1.0:
        return sigmoid_link
    table = PilTable(AlphaParam(float(alpha)))
    return lambda z: np.asarray(table(z), dtype=float)


@dataclass
class Ensemble:
    members: list[tuple[Tree, float]] = field(default_factory=list)
    link: str = "sigmoid"
    n_features: int = 0

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        H = np.zeros(X.shape[0])
        for tree, beta in self.members:
            if beta != 0.0:
                H += beta * predict(tree, X)
        return H

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def accuracy(self, ds: Dataset) -> float:
        return float(np.mean(self.predict(ds.X) == ds.y))

    def feature_importance(self) -> np.ndarray:
        return feature_importance(self.members, self.n_features)


@dataclass
class BoostDiagnostics:
    """Per-round records; ``risk`` has one extra leading entry, the risk of H = 0."""

    alpha: float | str
    a_f: float
    M: float
    edge: list[float] = field(default_factory=list)
    edge_normalized: list[float] = field(default_factory=list)
    total_weight: list[float] = field(default_factory=list)
    delta: list[float] = field(default_factory=list)
    max_abs_h: list[float] = field(default_factory=list)
    risk: list[float] = field(default_factory=list)
    min_weight: list[float] = field(default_factory=list)
    max_weight: list[float] = field(default_factory=list)
    wla_violations: list[int] = field(default_factory=list)
    early_stop: bool = False
    F_star: float = math.nan
    F_zero: float = math.nan
    final_margins: np.ndarray | None = None

    @property
    def iterations(self) -> int:
        return len(self.edge)

    @property
    def zeta_observed(self) -> np.ndarray:
        """Per-round ``Delta / eta``; infinite when the edge is not positive."""
        e, d = np.asarray(self.edge), np.asarray(self.delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(e > 0, d / np.where(e > 0, e, 1.0), np.where(d == 0, 0.0, np.inf))
        return z

    def o1_holds(self, zeta: float | None = None) -> np.ndarray:
        zo = self.zeta_observed
        return zo < 1.0 if zeta is None else zo <= zeta

    def o2_holds(self, zeta: np.ndarray | float | None = None) -> np.ndarray:
        """Per-round step-size condition ``a_f F* M^2 < 2 (1 - zeta)``."""
        z = self.zeta_observed if zeta is None else np.broadcast_to(zeta, (self.iterations,))
        return self.a_f * self.F_star * self.M ** 2 < 2.0 * (1.0 - z)

    _LISTS = ("edge", "edge_normalized", "total_weight", "delta", "max_abs_h", "risk",
              "min_weight", "max_weight", "wla_violations")

    def to_dict(self) -> dict:
        d = {k: list(getattr(self, k)) for k in self._LISTS}
        d.update(alpha=self.alpha, a_f=self.a_f, M=self.M, early_stop=self.early_stop,
                 F_star=None if math.isnan(self.F_star) else self.F_star,
                 F_zero=None if math.isnan(self.F_zero) else self.F_zero,
                 final_margins=None if self.final_margins is None else self.final_margins.tolist())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BoostDiagnostics":
        out = cls(d["alpha"], float(d["a_f"]), float(d["M"]))
        for k in cls._LISTS:
            setattr(out, k, list(d.get(k, [])))
        out.early_stop = bool(d.get("early_stop", False))
        out.F_star = math.nan if d.get("F_star") is None else float(d["F_star"])
        out.F_zero = math.nan if d.get("F_zero") is None else float(d["F_zero"])
        fm = d.get("final_margins")
        out.final_margins = None if fm is None else np.asarray(fm, dtype=float)
        return out

    def summary(self) -> dict:
        zo = self.zeta_observed
        fin = zo[np.isfinite(zo)]
        return {
            "iterations": self.iterations,
            "early_stop": self.early_stop,
            "mean_zeta": float(fin.mean()) if fin.size else None,
            "final_risk": self.risk[-1] if self.risk else None,
            "wla_violations": len(self.wla_violations),
        }


def edge_discrepancy(dataset: Dataset, H, h, weights, surrogate: SurrogateEval) -> float:
    """``|mean(y h (-F'(y H))) - mean(w y h)|`` with ``F'`` by central differences."""
    yh = dataset.y * np.asarray(h, dtype=float)
    if not np.any(yh):
        return 0.0
    g = -surrogate.dF(dataset.y * np.asarray(H, dtype=float))
    return float(abs(np.mean(yh * g) - np.mean(yh * np.asarray(weights, dtype=float))))


def _new_diag(dataset: Dataset, config: BoostConfig, surrogate: SurrogateEval | None):
    diag = BoostDiagnostics(config.alpha, config.a_f, config.M)
    if surrogate is not None:
        diag.F_star = surrogate.F_star()
        diag.F_zero = float(surrogate.F(0.0))
        diag.risk.append(diag.F_zero)
    return diag


def pilboost_fit(dataset: Dataset, config: BoostConfig,
                 surrogate: SurrogateEval | None = None) -> tuple[Ensemble, BoostDiagnostics]:
    """Fit PILBoost for ``config.T`` rounds, one fresh tree per round."""
    if config.is_adaboost:
        raise ValueError("use adaboost_fit for the AdaBoost baseline")
    alpha = float(config.alpha)
    link = make_link(alpha)
    if config.diagnostics and surrogate is None:
        surrogate = SurrogateEval.for_alpha(alpha)
    if not config.diagnostics:
        surrogate = None
    y = dataset.y.astype(float)
    m = dataset.m
    H = np.zeros(m)
    ens = Ensemble([], "sigmoid" if alpha == 1.0 else f"pil(alpha={alpha:g})", dataset.d)
    diag = _new_diag(dataset, config, surrogate)
    for t in range(config.T):
        w = link(-y * H)
        if w.sum() < config.stop_weight_frac * m:
            diag.early_stop = True
            break
        tree = fit_tree(WeightedSample(dataset, w), config.tree_depth, config.M)
        h = predict(tree, dataset.X)
        eta = float(np.mean(w * y * h))
        beta = config.a_f * eta
        diag.edge.append(eta)
        diag.total_weight.append(float(w.mean()))
        diag.edge_normalized.append(eta / float(w.mean()))
        diag.max_abs_h.append(float(np.abs(h).max()))
        diag.min_weight.append(float(w.min()))
        diag.max_weight.append(float(w.max()))
        if eta == 0.0:
            diag.wla_violations.append(t)
        if surrogate is not None:
            diag.delta.append(edge_discrepancy(dataset, H, h, w, surrogate))
        H = H + beta * h
        ens.members.append((tree, beta))
        if surrogate is not None:
            diag.risk.append(float(np.mean(surrogate.F(y * H))))
    diag.final_margins = y * H
    return ens, diag


def adaboost_fit(dataset: Dataset, config: BoostConfig,
                 delta: float = 1e-10) -> tuple[Ensemble, BoostDiagnostics]:
    """AdaBoost with confidence-rated tree outputs and exponential reweighting."""
    y = dataset.y.astype(float)
    m = dataset.m
    H = np.zeros(m)
    ens = Ensemble([], "exp", dataset.d)
    diag = BoostDiagnostics(ADABOOST, config.a_f, config.M)
    diag.risk.append(1.0)
    clamp = 0.5 * math.log((2.0 - delta) / delta)
    for t in range(config.T):
        logw = -y * H
        w = np.exp(logw - logw.max())
        w /= w.sum()
        tree = fit_tree(WeightedSample(dataset, w), config.tree_depth, config.M)
        h = predict(tree, dataset.X)
        eta_t = float(np.sum(w * y * h))
        if abs(eta_t) >= 1.0 - delta:
            beta = math.copysign(clamp, eta_t)
        else:
            beta = 0.5 * math.log((1.0 + eta_t) / (1.0 - eta_t))
        diag.edge.append(eta_t)
        diag.edge_normalized.append(eta_t)
        diag.total_weight.append(1.0)
        diag.max_abs_h.append(float(np.abs(h).max()))
        if eta_t == 0.0:
            diag.wla_violations.append(t)
        H = H + beta * h
        ens.members.append((tree, beta))
        if config.diagnostics:
            diag.risk.append(float(np.mean(np.exp(-y * H))))
    diag.final_margins = y * H
    return ens, diag


def fit(dataset: Dataset, config: BoostConfig, **kw) -> tuple[Ensemble, BoostDiagnostics]:
    if config.is_adaboost:
        return adaboost_fit(dataset, config)
    return pilboost_fit(dataset, config, **kw)


# --------------------------------------------------------------------------
# convergence certificate


@dataclass(frozen=True)
class ConvergenceCertificate:
    z_star: float
    gamma: float
    zeta: float
    pi: float
    F_star: float
    Q: float
    cumulative: float
    threshold: float
    satisfied: bool
    crossing_iteration: int | None
    F_z_star: float
    risk_at_crossing: float | None
    risk_bound_held: bool | None
    theta: float
    epsilon: float
    margin_iterations_needed: float
    margin_fraction: float

    def as_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, float) and not math.isfinite(v):
                v = str(v)
            out[k] = v
        return out


def _q_factor(F_star, gamma, zeta, pi) -> float:
    if not (gamma > 0 and 0 <= zeta < 1 and 0 <= pi < 1):
        return math.inf
    return 2.0 * F_star / (gamma ** 2 * (1.0 - zeta) ** 2 * (1.0 - pi ** 2))


def convergence_certificate(diag: BoostDiagnostics, surrogate: SurrogateEval,
                            gamma: float | None = None, zeta: float | None = None,
                            pi: float | None = None, z_star: float | None = None,
                            theta: float = 0.0, epsilon: float = 1.0,
                            link=None) -> ConvergenceCertificate:
    """Check the cumulative-weight condition and the margin iteration bound.

    Unset assumption parameters default to their empirical values: gamma is the
    smallest ``|normalised edge| / M``, zeta the largest ``Delta / eta``, and pi
    the one implied by ``a_f``, ``F*`` and zeta.
    """
    n = diag.iterations
    F_star = diag.F_star if math.isfinite(diag.F_star) else surrogate.F_star()
    F0 = float(surrogate.F(0.0))
    if gamma is None:
        gamma = float(np.min(np.abs(diag.edge_normalized)) / diag.M) if n else 0.0
    if zeta is None:
        zeta = float(np.max(diag.zeta_observed)) if n else 0.0
    if pi is None:
        pi = abs(diag.a_f * F_star * diag.M ** 2 / (1.0 - zeta) - 1.0) if zeta < 1 else math.inf
    if z_star is None:
        z_star = float(np.percentile(diag.final_margins, 10)) if diag.final_margins is not None and n else 0.0
    Q = _q_factor(F_star, gamma, zeta, pi)
    Fz = float(surrogate.F(z_star))
    gap = F0 - Fz
    threshold = 0.0 if gap <= 0 else Q * gap
    csum = np.cumsum(np.square(diag.total_weight)) if n else np.zeros(0)
    cumulative = float(csum[-1]) if n else 0.0
    satisfied = cumulative >= threshold
    crossing = None
    risk_cross = None
    held = None
    if threshold <= 0:
        crossing = -1
    elif n and np.isfinite(threshold):
        hit = np.nonzero(csum >= threshold)[0]
        crossing = int(hit[0]) if hit.size else None
    if crossing is not None and len(diag.risk) == n + 1:
        after = np.asarray(diag.risk[crossing + 1:])
        risk_cross = float(diag.risk[crossing + 1])
        held = bool(np.all(after <= Fz + 1e-6))
    # margin bound
    if link is None:
        link = make_link(float(diag.alpha)) if diag.alpha != ADABOOST else sigmoid_link
    f_inf = float(surrogate.F(50.0))
    F_eps = (1.0 - epsilon) * f_inf + epsilon * float(surrogate.F(theta))
    ft = float(link(-theta))
    if epsilon == 0 or ft == 0:
        needed = math.inf
    else:
        num = Q * max(F0 - F_eps, 0.0)
        needed = 0.0 if num == 0 else num / (epsilon ** 2 * ft ** 2)
    frac = float(np.mean(diag.final_margins <= theta)) if diag.final_margins is not None and n else 1.0
    return ConvergenceCertificate(
        z_star=z_star, gamma=gamma, zeta=zeta, pi=pi, F_star=F_star, Q=Q,
        cumulative=cumulative, threshold=threshold, satisfied=bool(satisfied),
        crossing_iteration=crossing, F_z_star=Fz, risk_at_crossing=risk_cross,
        risk_bound_held=held, theta=theta, epsilon=epsilon,
        margin_iterations_needed=needed, margin_fraction=frac,
    )
