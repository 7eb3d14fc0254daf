"""Pointwise theory of CPE losses: partial losses, risks, tilted estimates
and the population-level untwisting metrics (cross-entropy / KL on a
discrete twist scenario).

Everything here works in nats. Probabilities fed to logs are clamped to
``[EPS, 1 - EPS]`` so that risks stay finite at the endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

EPS = 1e-12

ArrayLike = float | np.ndarray


class DomainError(ValueError):
    """Argument outside the domain of a loss-theory operation."""


@dataclass(frozen=True)
class Interval:
    """Set-valued tilted estimate; only ever the full ``[0, 1]`` here."""

    lo: float = 0.0
    hi: float = 1.0


FULL_INTERVAL = Interval()


def _check_unit(x, name: str = "u") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")
    return a


def _out(a: np.ndarray, like) -> ArrayLike:
    return float(a) if np.ndim(like) == 0 else a


@dataclass(frozen=True)
class AlphaParam:
    """The alpha hyperparameter and its Hölder conjugate ``1/a' + 1/a = 1``."""

    alpha: float

    def __post_init__(self):
        if math.isnan(self.alpha):
            raise ValueError("alpha must not be NaN")

    @property
    def conjugate(self) -> float:
        a = self.alpha
        if math.isinf(a):
            return 1.0
        if a == 1.0:
            return math.inf
        return a / (a - 1.0)

    @property
    def is_degenerate(self) -> bool:
        return self.alpha == 0.0


def _as_alpha(a) -> AlphaParam:
    return a if isinstance(a, AlphaParam) else AlphaParam(float(a))


@dataclass(frozen=True)
class LossSpec:
    """A CPE loss given by its partial losses ``l1`` (y=+1) and ``l-1`` (y=-1).

    ``tilted`` optionally carries a closed form of the Bayes tilted estimate;
    when absent, callers fall back on the grid oracle.
    """

    name: str
    partial_pos: Callable[[np.ndarray], np.ndarray]
    partial_neg: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = True
    differentiable: bool = True
    tilted: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        u = np.linspace(0.01, 0.99, 99)
        lp, ln = self.partial_pos(u), self.partial_neg(u)
        if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(ln))):
            raise ValueError(f"{self.name}: partial losses must be finite on (0,1)")
        # negative alpha mirrors the loss, so either orientation of the zeros is accepted
        ends = (float(self.partial_pos(np.array(1.0))), float(self.partial_neg(np.array(0.0))))
        mirrored = (float(self.partial_pos(np.array(0.0))), float(self.partial_neg(np.array(1.0))))
        if min(max(map(abs, ends)), max(map(abs, mirrored))) > 1e-12:
            raise ValueError(f"{self.name}: partial losses must vanish at matching extremes")
        if self.symmetric and not np.allclose(lp, self.partial_neg(1.0 - u), rtol=1e-9, atol=1e-12):
            raise ValueError(f"{self.name}: symmetric flag set but l1(u) != l-1(1-u)")


@dataclass(frozen=True)
class FocalSpec:
    gamma: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("focal gamma must be >= 0")


# --------------------------------------------------------------------------
# partial losses


def _alpha_pos_positive(a: float) -> Callable[[np.ndarray], np.ndarray]:
    """l1 for a > 0 (including +inf)."""
    if math.isinf(a):
        return lambda u: 1.0 - np.asarray(u, dtype=float)
    if a == 1.0:
        return lambda u: -np.log(np.clip(u, EPS, 1.0))
    c = a / (a - 1.0)
    e = (a - 1.0) / a

    def l1(u):
        u = np.asarray(u, dtype=float)
        # negative exponent for a in (0,1): clamp keeps l1(0) finite
        base = np.clip(u, EPS, 1.0) if e < 0 else u
        return c * (1.0 - np.power(base, e))

    return l1


def alpha_loss_spec(a) -> LossSpec:
    """Alpha-loss with the negative-alpha extension ``l1^a(u) = l1^{-a}(1-u)``."""
    a = _as_alpha(a)
    alpha = a.alpha
    if alpha == 0.0:
        raise ValueError("alpha = 0 is unsupported (l1^0 is identically infinite)")
    base = _alpha_pos_positive(abs(alpha))
    if alpha > 0:
        pos = base
        neg = lambda u: base(1.0 - np.asarray(u, dtype=float))  # noqa: E731
    else:
        pos = lambda u: base(1.0 - np.asarray(u, dtype=float))  # noqa: E731
        neg = base
    tilted = None if math.isinf(alpha) else (lambda v, _a=alpha: _tilt_finite(_a, v))
    return LossSpec(f"alpha={alpha:g}", pos, neg, symmetric=True,
                    differentiable=True, tilted=tilted)


def log_loss_spec() -> LossSpec:
    spec = alpha_loss_spec(1.0)
    return LossSpec("log", spec.partial_pos, spec.partial_neg, tilted=lambda v: np.asarray(v, dtype=float))


def focal_loss_spec(f: FocalSpec) -> LossSpec:
    g = f.gamma

    def pos(u):
        u = np.asarray(u, dtype=float)
        return -np.power(1.0 - u, g) * np.log(np.clip(u, EPS, 1.0))

    return LossSpec(f"focal(gamma={g:g})", pos, lambda u: pos(1.0 - np.asarray(u, dtype=float)))


def partial_loss(spec: LossSpec, y: int, u: ArrayLike) -> ArrayLike:
    ua = _check_unit(u)
    if y == 1:
        r = spec.partial_pos(ua)
    elif y == -1:
        r = spec.partial_neg(ua)
    else:
        raise DomainError(f"label must be +1 or -1, got {y!r}")
    return _out(np.asarray(r, dtype=float), u)


def pointwise_risk(spec: LossSpec, u: ArrayLike, v: ArrayLike) -> ArrayLike:
    """``L(u, v) = v l1(u) + (1 - v) l-1(u)``."""
    ua, va = _check_unit(u), _check_unit(v, "v")
    r = va * spec.partial_pos(ua) + (1.0 - va) * spec.partial_neg(ua)
    return _out(np.asarray(r, dtype=float), np.broadcast(ua, va) if np.ndim(u) or np.ndim(v) else u)


def bayes_risk(spec: LossSpec, v: ArrayLike, grid_n: int = 100_000) -> ArrayLike:
    """Pointwise Bayes risk ``inf_u L(u, v)``, via the closed-form tilt if known."""
    va = _check_unit(v, "v")
    if spec.tilted is not None:
        t = spec.tilted(va)
    else:
        t = np.vectorize(lambda x: bayes_tilted_brute(spec, float(x), grid_n))(va)
    r = va * spec.partial_pos(t) + (1.0 - va) * spec.partial_neg(t)
    return _out(np.asarray(r, dtype=float), v)


# --------------------------------------------------------------------------
# tilted estimates


def logit(u: ArrayLike) -> ArrayLike:
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        r = np.log(u) - np.log1p(-u)
    return float(r) if r.ndim == 0 else r


def _tilt_finite(alpha: float, v) -> np.ndarray:
    # v^a / (v^a + (1-v)^a) == sigmoid(a * logit(v)); endpoints follow the limit
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = alpha * (np.log(v) - np.log1p(-v))
    return expit(z)


def bayes_tilted_estimate(a, v: ArrayLike):
    """Alpha-tilted distribution ``v^a / (v^a + (1-v)^a)``.

    For a = +/-inf this is the hard decision ``1[v > 1/2]`` (resp.
    ``1[v < 1/2]``). Degenerate cases, a = 0 or a = +/-inf at v = 1/2, give
    the whole interval: :data:`FULL_INTERVAL` for scalars, NaN inside arrays.
    """
    a = _as_alpha(a)
    va = _check_unit(v, "v")
    alpha = a.alpha
    scalar = np.ndim(v) == 0
    if alpha == 0.0:
        return FULL_INTERVAL if scalar else np.full(va.shape, np.nan)
    if math.isinf(alpha):
        hi = va > 0.5 if alpha > 0 else va < 0.5
        r = np.where(va == 0.5, np.nan, hi.astype(float))
        if scalar:
            return FULL_INTERVAL if np.isnan(r) else float(r)
        return r
    return _out(_tilt_finite(alpha, va), v)


def bayes_tilted_brute(spec: LossSpec, v: float, grid_n: int = 1_000_000) -> float:
    """Grid minimiser of ``L(., v)`` over ``{0, 1/N, ..., 1}``; smallest u on ties."""
    if grid_n < 100:
        raise ValueError("grid_n must be >= 100")
    u = np.linspace(0.0, 1.0, grid_n + 1)
    risk = v * spec.partial_pos(u) + (1.0 - v) * spec.partial_neg(u)
    return float(u[int(np.argmin(risk))])


def alpha_star_pointwise(eta_c: ArrayLike, eta_t: ArrayLike) -> ArrayLike:
    """Alpha that untwists ``eta_t`` back to ``eta_c``: ``logit(eta_c)/logit(eta_t)``."""
    c, t = np.asarray(eta_c, dtype=float), np.asarray(eta_t, dtype=float)
    if np.any((c <= 0) | (c >= 1)) or np.any((t <= 0) | (t >= 1)):
        raise DomainError("posteriors must lie in the open interval (0, 1)")
    lc, lt = np.log(c) - np.log1p(-c), np.log(t) - np.log1p(-t)
    flat = lt == 0.0
    if np.any(flat & (lc != 0.0)):
        raise DomainError("eta_t = 1/2 with eta_c != 1/2: no finite alpha untwists it")
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(flat, 1.0, lc / np.where(flat, 1.0, lt))
    return _out(r, eta_c if np.ndim(eta_c) else eta_t)


def sln_twist_posterior(eta_c: ArrayLike, p: float) -> ArrayLike:
    """Posterior after symmetric label noise with flip rate ``p``."""
    c = _check_unit(eta_c, "eta_c")
    _check_unit(p, "p")
    return _out(c * (1.0 - p) + (1.0 - c) * p, eta_c)


def is_bayes_blunting(eta_c: ArrayLike, eta_t: ArrayLike, strict: bool = False):
    c, t = _check_unit(eta_c, "eta_c"), _check_unit(eta_t, "eta_t")
    if strict:
        r = ((c < t) & (t <= 0.5)) | ((c > t) & (t >= 0.5))
    else:
        r = ((c <= t) & (t <= 0.5)) | ((c >= t) & (t >= 0.5))
    return bool(r) if r.ndim == 0 else r


def binary_entropy(u: ArrayLike) -> ArrayLike:
    ua = _check_unit(u)
    from scipy.special import entr

    return _out(entr(ua) + entr(1.0 - ua), u)


# --------------------------------------------------------------------------
# population quantities over a discrete scenario


@dataclass(frozen=True)
class TwistScenario:
    """Discrete marginal with clean and twisted posteriors on its support."""

    weights: np.ndarray
    eta_clean: np.ndarray
    eta_twist: np.ndarray
    points: np.ndarray | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        c = np.asarray(self.eta_clean, dtype=float)
        t = np.asarray(self.eta_twist, dtype=float)
        if not (w.shape == c.shape == t.shape and w.ndim == 1 and w.size > 0):
            raise ValueError("weights and posteriors must be 1-d arrays of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        _check_unit(c, "eta_clean")
        _check_unit(t, "eta_twist")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eta_clean", c)
        object.__setattr__(self, "eta_twist", t)

    @classmethod
    def from_functions(cls, points: Sequence[float], weights: Sequence[float] | None,
                       eta_clean: Callable, eta_twist: Callable) -> "TwistScenario":
        x = np.asarray(points, dtype=float)
        w = np.full(x.shape, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float)
        return cls(w, np.asarray(eta_clean(x), dtype=float), np.asarray(eta_twist(x), dtype=float), x)

    @property
    def mean_entropy(self) -> float:
        return float(self.weights @ binary_entropy(self.eta_clean))


def _alpha_values(a, n: int) -> np.ndarray:
    if isinstance(a, AlphaParam):
        a = a.alpha
    arr = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    if np.any(arr == 0.0) or np.any(np.isinf(arr)):
        raise ValueError("cross-entropy needs finite nonzero alpha")
    return arr


def cross_entropy_alpha(scenario: TwistScenario, a) -> float:
    """Averaged cross-entropy of the alpha-tilted twisted posterior against the clean one.

    ``a`` may be a scalar (fixed alpha) or an array with one alpha per
    support point (an alpha mapping).
    """
    alphas = _alpha_values(a, scenario.weights.size)
    z = alphas * logit(np.clip(scenario.eta_twist, EPS, 1.0 - EPS))
    # -log sigmoid(z) = logaddexp(0, -z): stable where the clamp would bite
    ce = scenario.eta_clean * np.logaddexp(0.0, -z) + (1.0 - scenario.eta_clean) * np.logaddexp(0.0, z)
    return float(scenario.weights @ ce)


def kl_alpha(scenario: TwistScenario, a) -> float:
    return cross_entropy_alpha(scenario, a) - scenario.mean_entropy


@dataclass(frozen=True)
class AlphaStarBound:
    alpha_star: float
    bound: float
    logit_edge: float
    q: float
    kl: float
    degenerate: bool

    @property
    def holds(self) -> bool:
        return self.degenerate or self.kl <= self.bound + 1e-9


def constructive_alpha_star(scenario: TwistScenario, B: float) -> AlphaStarBound:
    """Fixed alpha from the logit-edge of the twisted posterior, with its KL bound.

    Every support point must have ``|logit(eta_t)| <= B`` (full clipped
    support); points outside raise.
    """
    if not B > 0:
        raise ValueError("B must be positive")
    lt = logit(np.clip(scenario.eta_twist, 0.0, 1.0))
    if np.any(~np.isfinite(lt)) or np.any(np.abs(lt) > B * (1 + 1e-12)):
        raise DomainError("twisted posterior violates the clipping condition |logit| <= B")
    # E_{x, Y ~ Bern(eta_c(x))}[Y logit(eta_t(x))]
    eta_b = float(scenario.weights @ ((2.0 * scenario.eta_clean - 1.0) * lt)) / B
    eta_b = min(1.0, max(-1.0, eta_b))
    q = (1.0 + eta_b) / 2.0
    bound = float(binary_entropy(q)) - scenario.mean_entropy
    if eta_b == 0.0 or q in (0.0, 1.0):
        return AlphaStarBound(0.0 if eta_b == 0.0 else math.copysign(math.inf, eta_b),
                              bound, eta_b, q, math.nan, True)
    a_star = float(logit(q)) / B
    kl = kl_alpha(scenario, a_star)
    out = AlphaStarBound(a_star, bound, eta_b, q, kl, False)
    assert out.holds, f"KL bound violated: {kl} > {bound}"
    return out


# --------------------------------------------------------------------------
# focal loss is not twist-proper


def _focal_f(u: float, gamma: np.ndarray) -> np.ndarray:
    return np.power(u, gamma) * (gamma * (1.0 - u) * math.log1p(-u) - u)


def focal_twist_improper_witness(u: float, K: float, gamma_grid: Sequence[float]) -> tuple[float, bool]:
    """Max over the gamma grid of ``f(u,g)/f(1-u,g)`` and whether it stays below ``K``."""
    if not 0.0 < u <= 0.5:
        raise DomainError("u must lie in (0, 1/2]")
    g = np.asarray(gamma_grid, dtype=float)
    if g.size == 0 or np.any(g < 0):
        raise ValueError("gamma_grid must be a nonempty list of nonnegative reals")
    ratio = _focal_f(u, g) / _focal_f(1.0 - u, g)
    m = float(ratio.max())
    return m, m < K
