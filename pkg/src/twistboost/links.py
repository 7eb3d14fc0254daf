"""Surrogate losses and (pseudo-)inverse links.

The surrogate of a CPE loss is ``F(z) = sup_u {-z u + Lb(u)}`` with ``Lb``
the pointwise Bayes risk. Boosting weights are ``-F'(y H) = u*(y H)``, the
maximiser of that supremum; for the alpha-loss this has no closed form, so
PILBoost uses a clipped closed-form approximation ``pil_alpha`` instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import expit

from .losses import (
    EPS,
    AlphaParam,
    DomainError,
    LossSpec,
    _as_alpha,
    alpha_loss_spec,
)

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def sigmoid_link(z):
    """Inverse canonical link of the log-loss, ``1 / (1 + exp(-z))``."""
    r = expit(np.asarray(z, dtype=float))
    return float(r) if r.ndim == 0 else r


def _golden_max(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray, iters: int):
    """Vectorised golden-section search for the max of a unimodal ``f`` on ``[lo, hi]``."""
    a, b = lo.copy(), hi.copy()
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = b - _GOLD * (b - a)
        nd = a + _GOLD * (b - a)
        # only one new point per lane is really needed; recomputing both keeps it simple
        c, d = nc, nd
        fc, fd = f(c), f(d)
    x = np.where(fc >= fd, c, d)
    return x


def _bayes_risk_fn(spec: LossSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised ``Lb(v) = inf_u L(u, v)``."""
    if spec.tilted is not None:
        def lb(v):
            t = spec.tilted(v)
            return v * spec.partial_pos(t) + (1.0 - v) * spec.partial_neg(t)
        return lb

    def lb_numeric(v):
        v = np.asarray(v, dtype=float)
        risk = lambda u: -(v * spec.partial_pos(u) + (1.0 - v) * spec.partial_neg(u))  # noqa: E731
        u = _golden_max(risk, np.zeros_like(v), np.ones_like(v), 60)
        best = -risk(u)
        # the endpoints are never probed by golden section
        return np.minimum(best, np.minimum(-risk(np.zeros_like(v)), -risk(np.ones_like(v))))

    return lb_numeric


@dataclass
class SurrogateEval:
    """Numeric convex conjugate of the negated Bayes risk of ``loss``.

    The supremum over u is located on a grid that is uniform in logit space
    (``grid_n`` points plus both endpoints), then polished by golden-section
    search between the neighbouring grid points.
    """

    loss: LossSpec
    grid_n: int = 100_000
    logit_range: float = 28.0
    polish_iters: int = 30
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.grid_n < 100:
            raise ValueError("grid_n must be >= 100")
        self._lb = _bayes_risk_fn(self.loss)
        s = np.linspace(-self.logit_range, self.logit_range, self.grid_n)
        u = np.concatenate(([0.0], expit(s), [1.0]))
        lb = self._lb(u)
        slope = np.diff(lb) / np.diff(u)
        # Lb is concave, so its chord slopes decrease; enforce that against rounding
        self._u = u
        self._lbu = lb
        self._neg_slope = -np.minimum.accumulate(slope)

    @classmethod
    def for_alpha(cls, alpha, **kw) -> "SurrogateEval":
        return cls(alpha_loss_spec(alpha), **kw)

    def argmax(self, z) -> np.ndarray:
        """Maximiser ``u*(z)`` of ``-z u + Lb(u)``; equals ``-F'(z)``."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        # the objective rises on segment k iff slope_k > z; first segment where it stops
        k = np.searchsorted(self._neg_slope, -z, side="left")
        k = np.minimum(k, self._u.size - 1)
        lo = self._u[np.maximum(k - 1, 0)]
        hi = self._u[np.minimum(k + 1, self._u.size - 1)]
        obj = lambda uu: -z * uu + self._lb(uu)  # noqa: E731
        polished = _golden_max(obj, lo, hi, self.polish_iters)
        grid = self._u[k]
        return np.where(obj(polished) >= -z * grid + self._lbu[k], polished, grid)

    def F(self, z):
        zz = np.asarray(z, dtype=float)
        zf = np.atleast_1d(zz)
        u = self.argmax(zf)
        val = -zf * u + self._lb(u)
        return float(val[0]) if zz.ndim == 0 else val.reshape(zz.shape)

    def dF(self, z, h: float = 1e-5):
        """Central finite difference of ``F``."""
        z = np.asarray(z, dtype=float)
        return (self.F(z + h) - self.F(z - h)) / (2.0 * h)

    def F_star(self, zmax: float = 10.0, n: int = 4001, h: float = 1e-3) -> float:
        """Largest second finite difference of ``F`` over ``[-zmax, zmax]``."""
        key = ("F_star", zmax, n, h)
        if key not in self.cache:
            z = np.linspace(-zmax, zmax, n)
            d2 = (self.F(z + h) - 2.0 * self.F(z) + self.F(z - h)) / (h * h)
            self.cache[key] = float(d2.max())
        return self.cache[key]


def surrogate_F(s: SurrogateEval, z):
    return s.F(z)


# --------------------------------------------------------------------------
# exact link of the alpha-loss


def neg_bayes_risk_derivative(a, u):
    """``-Lb'(u)`` for the alpha-loss (the exact link), with ``-Lb'`` = logit at alpha=1."""
    alpha = _as_alpha(a).alpha
    u = np.asarray(u, dtype=float)
    if alpha == 1.0:
        uc = np.clip(u, EPS, 1.0 - EPS)
        return np.log(uc) - np.log1p(-uc)
    if not alpha > 1.0 or math.isinf(alpha):
        raise DomainError("exact link implemented for 1 <= alpha < inf")
    ap = alpha / (alpha - 1.0)
    with np.errstate(divide="ignore"):
        t = expit(alpha * (np.log(u) - np.log1p(-u)))
    return ap * (np.power(t, 1.0 / ap) - np.power(1.0 - t, 1.0 / ap))


def exact_inverse_link(a, z, iters: int = 80):
    """Bisection inverse of :func:`neg_bayes_risk_derivative` on ``u in [0, 1]``."""
    z = np.asarray(z, dtype=float)
    lo, hi = np.zeros_like(z), np.ones_like(z)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = neg_bayes_risk_derivative(a, mid) < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r = 0.5 * (lo + hi)
    return float(r) if r.ndim == 0 else r


# --------------------------------------------------------------------------
# pseudo-inverse links


def _pil_conjugate(a) -> float:
    alpha = _as_alpha(a).alpha
    if not 1.0 < alpha < math.inf:
        raise DomainError(f"the alpha-PIL needs finite alpha > 1, got {alpha}")
    return alpha / (alpha - 1.0)


def pil_alpha(a, z):
    """Closed-form clipped inverse link of the alpha-loss (alpha > 1).

    Saturates to 0 below ``-a'`` and to 1 above ``a'``. Evaluated through
    ``s = (1 - |z|/a')^a' / 2`` and a logit so that it stays accurate as
    alpha approaches 1, where ``a'`` explodes.
    """
    alpha = _as_alpha(a).alpha
    ap = _pil_conjugate(alpha)
    zz = np.asarray(z, dtype=float)
    r = np.clip(1.0 - np.abs(zz) / ap, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        log_s = ap * np.log(r) - math.log(2.0)
        # logit of (1 - s) tilted back by 1/alpha
        v = expit((np.log1p(-np.exp(log_s)) - log_s) / alpha)
    out = np.where(zz >= 0, v, 1.0 - v)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PilTable:
    """Immutable alpha-PIL evaluator with its saturation points."""

    alpha: AlphaParam

    def __post_init__(self):
        _pil_conjugate(self.alpha)

    @property
    def saturation_hi(self) -> float:
        return _pil_conjugate(self.alpha)

    @property
    def saturation_lo(self) -> float:
        return -self.saturation_hi

    def __call__(self, z):
        return pil_alpha(self.alpha, z)

    def rows(self, n: int = 21) -> list[tuple[float, float, float]]:
        """``(z, pil(z), exact(z))`` rows spanning ``[2 lo, 2 hi]``."""
        z = np.linspace(2 * self.saturation_lo, 2 * self.saturation_hi, n)
        return list(zip(z.tolist(), np.atleast_1d(self(z)).tolist(),
                        np.atleast_1d(exact_inverse_link(self.alpha, z)).tolist()))


def _bisect_increasing(f, target, lo: float, hi: float, iters: int = 100):
    target = np.asarray(target, dtype=float)
    a, b = np.full(target.shape, lo), np.full(target.shape, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = f(mid) < target
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def _clamped(partial, end: float) -> bool:
    """True when ``partial`` is flat between ``end`` and ``EPS`` away but steep just past it.

    That shape is the clamp cutting off a divergence, as for ``-log u`` at 0.
    """
    step = EPS if end == 0.0 else -EPS
    v0, v1, v2 = (float(partial(np.array(end + k * step))) for k in (0, 1, 2))
    return v0 == v1 and abs(v1 - v2) > 0.1


def clipped_inverse_link(spec: LossSpec, z):
    """Four-branch clipped inverse link built from the partial losses.

    Needs finite ``l1(0)`` and ``l-1(1)``, a symmetric loss and a closed-form
    tilted estimate; every inverse is taken by bisection.
    """
    if not spec.symmetric or spec.tilted is None:
        raise DomainError("clipped link needs a symmetric loss with a known tilted estimate")
    l1_0 = float(spec.partial_pos(np.array(0.0)))
    l1_h = float(spec.partial_pos(np.array(0.5)))
    ln_1 = float(spec.partial_neg(np.array(1.0)))
    ln_h = float(spec.partial_neg(np.array(0.5)))
    if not (np.isfinite(l1_0) and np.isfinite(ln_1)) or _clamped(spec.partial_pos, 0.0) \
            or _clamped(spec.partial_neg, 1.0):
        raise DomainError(f"{spec.name}: infinite partial loss at the extremes; use sigmoid_link")
    zz = np.asarray(z, dtype=float)
    zf = np.atleast_1d(zz)
    out = np.where(zf < 0, 0.0, 1.0)
    neg = (zf >= -l1_0) & (zf < 0)
    pos = (zf >= 0) & (zf < ln_1)
    t_inv = lambda x: _bisect_increasing(spec.tilted, x, 0.0, 1.0)  # noqa: E731
    if np.any(neg):
        target = (l1_h - l1_0) / l1_0 * zf[neg] + l1_h
        # l1 is decreasing
        u = _bisect_increasing(lambda x: -spec.partial_pos(x), -target, 0.0, 1.0)
        out[neg] = t_inv(u)
    if np.any(pos):
        target = (ln_1 - ln_h) / ln_1 * zf[pos] + ln_h
        u = _bisect_increasing(spec.partial_neg, target, 0.0, 1.0)
        out[pos] = t_inv(u)
    return float(out[0]) if zz.ndim == 0 else out.reshape(zz.shape)


class GapReport(NamedTuple):
    max_gap: float
    forbidden_interval: tuple[float, float]
    skipped: int


def pil_gap_report(a, grid: Sequence[float] | None = None) -> GapReport:
    """Largest ``|pil - exact inverse|`` over grid points outside the saturation band.

    The band is ``+/- a' [1 - alpha^-4, 1]``; its positive half is returned as
    ``forbidden_interval`` and points inside either half are skipped.
    """
    alpha = _as_alpha(a).alpha
    if not alpha >= 1.2:
        raise DomainError("gap report needs alpha >= 1.2")
    ap = _pil_conjugate(alpha)
    inner = ap * (1.0 - alpha ** -4)
    if grid is None:
        grid = np.linspace(-inner, inner, 20001)
    z = np.asarray(grid, dtype=float)
    keep = np.abs(z) <= inner
    zk = z[keep]
    gap = np.abs(np.atleast_1d(pil_alpha(alpha, zk)) - np.atleast_1d(exact_inverse_link(alpha, zk)))
    return GapReport(float(gap.max()) if gap.size else 0.0, (inner, ap), int((~keep).sum()))
