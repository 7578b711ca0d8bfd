"""Exponential tilts of treatment laws.

A tilt with parameter ``delta`` reweights a base law ``P`` by ``exp(delta*a)``
and renormalizes.  For a two-point {0,1} law this multiplies the odds of
treatment by ``exp(delta)``, which is the incremental-propensity intervention;
for general laws the tilted family is stochastically increasing in ``delta``
and is the KL-closest law to the base subject to a mean constraint.

All exponentials are computed after subtracting the maximum exponent, so
tilted masses and moment ratios never overflow; only a genuinely divergent
normalizer ``E[exp(delta*A)]`` raises :class:`NumericError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError

_MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDist:
    """Finite distribution on a strictly increasing real support.

    Supports exact arithmetic: if ``support`` and ``mass`` hold
    :class:`fractions.Fraction` entries, the cdf/quantile/moment helpers stay
    in exact rationals.
    """

    support: tuple
    mass: tuple

    def __post_init__(self):
        support = tuple(self.support)
        mass = tuple(self.mass)
        if len(support) != len(mass) or not support:
            raise ValueError("support and mass must be equal-length and nonempty")
        if any(support[i] >= support[i + 1] for i in range(len(support) - 1)):
            raise ValueError("support must be strictly increasing")
        if any(m < 0 for m in mass):
            raise ValueError("masses must be nonnegative")
        if abs(sum(mass) - 1) > _MASS_TOL:
            raise ValueError("masses must sum to 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return len(self.support)

    def cumulative(self) -> list:
        out, acc = [], 0
        for m in self.mass:
            acc = acc + m
            out.append(acc)
        return out

    def cdf(self, a) -> float:
        acc = 0
        for s, m in zip(self.support, self.mass):
            if s <= a:
                acc = acc + m
        return acc

    def quantile(self, v):
        """Left-continuous generalized inverse inf{a : F(a) >= v}."""
        for s, c in zip(self.support, self.cumulative()):
            if c >= v:
                return s
        return self.support[-1]

    def mean(self):
        return sum(s * m for s, m in zip(self.support, self.mass))

    def prob(self, a):
        """Point mass at ``a`` (0 if not a support atom)."""
        for s, m in zip(self.support, self.mass):
            if s == a:
                return m
        return 0

    @staticmethod
    def uniform(support: Sequence) -> "DiscreteDist":
        n = len(support)
        return DiscreteDist(tuple(support), (1.0 / n,) * n)

    @staticmethod
    def point(a) -> "DiscreteDist":
        return DiscreteDist((a,), (1.0,))


def _shifted_weights(dist: DiscreteDist, delta: float):
    """exp(delta*a - max exponent) paired with the shift, as float arrays."""
    a = np.asarray(dist.support, dtype=float)
    m = np.asarray(dist.mass, dtype=float)
    expo = delta * a
    shift = float(np.max(expo))
    return a, m, np.exp(expo - shift), shift


def tilt_discrete(base: DiscreteDist, delta: float) -> DiscreteDist:
    """Tilted law with mass proportional to ``exp(delta*a) * base_mass``."""
    a, m, w, _ = _shifted_weights(base, delta)
    num = w * m
    z = num.sum()
    if not np.isfinite(z) or z <= 0:
        raise NumericError("tilt normalizer is not finite")
    return DiscreteDist(tuple(base.support), tuple(num / z))


def incremental_propensity(pi: float, delta: float) -> float:
    """Propensity whose treatment odds are multiplied by exp(delta).

    Degenerate propensities are fixed points, so no positivity assumption is
    needed: pi in {0, 1} returns pi for every delta.
    """
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"propensity must lie in [0,1], got {pi}")
    if pi in (0.0, 1.0):
        return pi
    if delta < -745.0:
        return 0.0  # exp(-delta) would overflow; the odds map saturates
    # q = e^d pi / (e^d pi + 1 - pi), computed in the overflow-free form
    return pi / (pi + math.exp(-delta) * (1.0 - pi))


def tilt_moments(base: DiscreteDist, delta: float) -> tuple[float, float]:
    """(alpha, beta) = (E[exp(delta*A)], tilted mean E_tilt[A])."""
    a, m, w, shift = _shifted_weights(base, delta)
    wm = w * m
    z = wm.sum()
    if z <= 0:
        raise NumericError("tilt normalizer vanished")
    alpha = math.exp(shift) * z if shift < 700 else math.inf
    if not math.isfinite(alpha):
        raise NumericError("overflow in E[exp(delta*A)]")
    beta = float((a * wm).sum() / z)
    return float(alpha), beta


def tilted_mean(base: DiscreteDist, delta: float) -> float:
    a, m, w, _ = _shifted_weights(base, delta)
    wm = w * m
    return float((a * wm).sum() / wm.sum())


def _tilted_mean_and_var(base: DiscreteDist, delta: float) -> tuple[float, float]:
    a, m, w, _ = _shifted_weights(base, delta)
    wm = w * m
    z = wm.sum()
    mu = float((a * wm).sum() / z)
    var = float(((a - mu) ** 2 * wm).sum() / z)
    return mu, var


def tilt_for_mean(base: DiscreteDist, m: float, tol: float = 1e-12) -> float:
    """Tilt parameter whose tilted mean equals ``m``.

    The map delta -> tilted mean is strictly increasing from min(support) to
    max(support), so the root is found by expanding a bracket and then
    bisection with Newton polishing; the residual |tilted mean - m| is driven
    below ``tol``.  Targets outside the open support hull are infeasible.
    """
    lo_s, hi_s = float(base.support[0]), float(base.support[-1])
    if not lo_s < m < hi_s:
        raise NumericError(
            f"target mean {m} outside the open support hull ({lo_s}, {hi_s})"
        )
    if len(base) == 1:
        raise NumericError("point mass admits no interior mean target")

    def resid(lam: float) -> float:
        return tilted_mean(base, lam) - m

    lo, hi = -1.0, 1.0
    while resid(lo) > 0:
        lo *= 2.0
        if lo < -1e6:
            raise NumericError("failed to bracket the tilt parameter")
    while resid(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            raise NumericError("failed to bracket the tilt parameter")

    lam = 0.5 * (lo + hi)
    for _ in range(200):
        r = resid(lam)
        if abs(r) <= tol:
            return lam
        if r > 0:
            hi = lam
        else:
            lo = lam
        mu, var = _tilted_mean_and_var(base, lam)
        step = lam - (mu - m) / var if var > 0 else 0.5 * (lo + hi)
        lam = step if lo < step < hi else 0.5 * (lo + hi)
    if abs(resid(lam)) <= 10 * tol:
        return lam
    raise NumericError("tilt root-finding did not converge")


def kl_divergence(q: DiscreteDist, p: DiscreteDist) -> float:
    """KL(q || p) for laws sharing a support; +inf when q is not dominated."""
    pm = {s: m for s, m in zip(p.support, p.mass)}
    total = 0.0
    for s, mq in zip(q.support, q.mass):
        if mq == 0:
            continue
        mp = pm.get(s, 0)
        if mp == 0:
            return math.inf
        total += float(mq) * math.log(float(mq) / float(mp))
    return total
