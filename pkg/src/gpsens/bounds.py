"""Population-level sharp bounds under unmeasured-confounding models.

Four sensitivity models restrict how far the counterfactual arm means can
drift from the observed regression function:

* bounded outcomes (gap at most the outcome range, here handled as the
  outcome-gap model after affine rescaling to [0, 1]);
* outcome gap: |drift| <= gamma uniformly;
* outcome gap with Holder growth: |drift| <= gamma * |a' - a|^p;
* propensity odds ratio: the treatment odds given (X, Y(a)) differ from the
  observational odds by a factor in [1/gamma, gamma].

Each model pairs with the coupling that minimizes worst-case bound width:
the maximal coupling (width proportional to total variation), the
rank-preserving coupling (width proportional to Wasserstein cost), and for
the odds-ratio model the width is driven by sharp multiplier bounds solved
exactly as a two-bound linear program with a fractional atom split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .coupling import PolicyKind, _merged_masses
from .errors import ConfigError, NumericError
from .tilt import DiscreteDist


@dataclass(frozen=True)
class BoundedOutcome:
    """Outcomes known to lie in a bounded interval (rescaled to [0,1])."""


@dataclass(frozen=True)
class OutcomeGap:
    """|E(Y(a)|X, A=a') - E(Y|X, A=a)| <= gamma for all a, a'."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("outcome-gap strength must be >= 0")


@dataclass(frozen=True)
class OutcomeGapHolder:
    """|E(Y(a)|X, A=a') - E(Y|X, A=a)| <= gamma * |a' - a|^p."""

    gamma: float
    p: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("outcome-gap strength must be >= 0")
        if self.p < 1:
            raise ConfigError("growth exponent p must be >= 1")


@dataclass(frozen=True)
class OddsRatio:
    """Treatment odds given (X, Y(a)) within a gamma-factor of observational odds."""

    gamma: float

    def __post_init__(self):
        if self.gamma < 1:
            raise ConfigError("odds-ratio strength must be >= 1")


SensitivityModel = Union[BoundedOutcome, OutcomeGap, OutcomeGapHolder, OddsRatio]


@dataclass(frozen=True)
class ConditionalBound:
    """An identified center with lower/upper partial-identification bounds."""

    center: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.center + 1e-12 and
                self.center <= self.upper + 1e-12):
            raise ValueError("bounds must bracket the center")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def t_and_tau(mu: Callable, q_law: Callable,
              x_weights: DiscreteDist) -> tuple[np.ndarray, float]:
    """Per-x identified center t(x) = sum_a mu(x, a) q(a|x) and its mean.

    ``mu(x, a)`` is the arm mean, ``q_law(x)`` the target treatment law at x,
    and ``x_weights`` the covariate law (exact atoms or quadrature nodes with
    weights).
    """
    xs = np.asarray(x_weights.support, dtype=float)
    ws = np.asarray(x_weights.mass, dtype=float)
    t = np.empty_like(xs)
    for i, x in enumerate(xs):
        law = q_law(x)
        t[i] = sum(mu(x, a) * m for a, m in zip(law.support, law.mass))
    return t, float((ws * t).sum())


def marginal_bound(x_weights: DiscreteDist, bounds) -> ConditionalBound:
    """Plain expectation of conditional bounds under the covariate law."""
    ws = np.asarray(x_weights.mass, dtype=float)
    c = float((ws * np.array([b.center for b in bounds])).sum())
    lo = float((ws * np.array([b.lower for b in bounds])).sum())
    hi = float((ws * np.array([b.upper for b in bounds])).sum())
    return ConditionalBound(c, lo, hi)


def bounds_maximal_tv(t: float, tv: float, gamma_minus: float,
                      gamma_plus: float) -> ConditionalBound:
    """Sharp bounds t -/+ gamma * TV for the maximal coupling."""
    if not 0 <= tv <= 1 + 1e-12:
        raise ValueError("total variation must lie in [0,1]")
    if gamma_minus < 0 or gamma_plus < 0:
        raise ValueError("bound strengths must be nonnegative")
    return ConditionalBound(t, t - gamma_minus * tv, t + gamma_plus * tv)


def bounds_monotone_wasserstein(t: float, w_cost: float,
                                gamma: float) -> ConditionalBound:
    """Sharp bounds t -/+ gamma * W for the rank-preserving coupling."""
    if w_cost < 0:
        raise ValueError("transport cost must be nonnegative")
    return ConditionalBound(t, t - gamma * w_cost, t + gamma * w_cost)


def bounds_binary(t: float, pi: float, q: float, kind: PolicyKind,
                  gamma0_minus: float, gamma0_plus: float,
                  gamma1_minus: float, gamma1_plus: float) -> ConditionalBound:
    """Two-point specialization with arm-specific strengths.

    Maximal coupling: width (gamma_s^- + gamma_s^+) |q - pi| where s picks the
    arm subjects are moved into, s = 1(q > pi).  Pure draw: both arms leak,
    width gamma_0 * pi(1-q) + gamma_1 * (1-pi) q, which does not vanish at
    q = pi unless pi is degenerate.
    """
    if not (0 <= pi <= 1 and 0 <= q <= 1):
        raise ValueError("pi and q must be probabilities")
    if min(gamma0_minus, gamma0_plus, gamma1_minus, gamma1_plus) < 0:
        raise ValueError("bound strengths must be nonnegative")
    if kind is PolicyKind.MAXIMAL:
        gap = abs(q - pi)
        gm, gp = ((gamma1_minus, gamma1_plus) if q > pi
                  else (gamma0_minus, gamma0_plus))
        return ConditionalBound(t, t - gm * gap, t + gp * gap)
    if kind is PolicyKind.PURE:
        lo = gamma0_minus * pi * (1 - q) + gamma1_minus * (1 - pi) * q
        hi = gamma0_plus * pi * (1 - q) + gamma1_plus * (1 - pi) * q
        return ConditionalBound(t, t - lo, t + hi)
    raise NumericError("rank-preserving coupling needs a continuous treatment CDF")


@dataclass(frozen=True)
class SharpMultiplier:
    """Extremal reweighting of an arm outcome law under the odds-ratio model.

    The optimizers of min/max E[Y h] over {1/gamma <= h <= gamma, E[h] = 1}
    put multiplier gamma on an extreme tail of mass 1/(1+gamma) and 1/gamma
    elsewhere; with outcome atoms the boundary atom is split fractionally.
    ``quantile_lo``/``quantile_hi`` are the tail quantiles at levels
    1/(1+gamma) and gamma/(1+gamma); the ``allocation_*`` tuples list
    (y, mass, h) rows of the exact optimizers.
    """

    quantile_lo: float
    quantile_hi: float
    nu_lower: float
    nu_upper: float
    boundary_atom_lower: bool = False
    boundary_atom_upper: bool = False
    allocation_lower: tuple = ()
    allocation_upper: tuple = ()


def _tail_split(cond_y: DiscreteDist, level, upper: bool):
    """Quantile, exact tail partial moment, and (y, mass, h)-style pieces.

    For ``upper``, returns the top-mass block of size 1 - level; otherwise the
    bottom block of size level.  All arithmetic stays in the input number
    types.
    """
    cum = cond_y.cumulative()
    # left-continuous quantile at the requested level
    gamma_q = cond_y.quantile(level if not upper else level)
    if upper:
        target = 1 - level          # tail mass receiving the high multiplier
        above = sum(m for s, m in zip(cond_y.support, cond_y.mass) if s > gamma_q)
        split = target - above      # slice of the atom at the quantile
        pieces = [(s, m) for s, m in zip(cond_y.support, cond_y.mass) if s > gamma_q]
    else:
        target = level
        below = sum(m for s, m in zip(cond_y.support, cond_y.mass) if s < gamma_q)
        split = target - below
        pieces = [(s, m) for s, m in zip(cond_y.support, cond_y.mass) if s < gamma_q]
    if split > 0:
        pieces.append((gamma_q, split))
    exact = cond_y.cdf(gamma_q) == level
    return gamma_q, pieces, not exact


def sharp_multiplier_bounds(cond_y: DiscreteDist, gamma) -> SharpMultiplier:
    """Sharp bounds on E[Y h] over the odds-ratio multiplier class.

    Solved in closed form through the tail quantiles and partial moments;
    the returned allocations satisfy E[h] = 1 and 1/gamma <= h <= gamma
    exactly, matching the greedy / vertex-enumeration oracles.
    """
    if gamma < 1:
        raise ValueError("odds-ratio strength must be >= 1")
    mean = cond_y.mean()
    if gamma == 1:
        alloc = tuple((s, m, 1) for s, m in zip(cond_y.support, cond_y.mass))
        med = cond_y.quantile(0.5)
        return SharpMultiplier(med, med, mean, mean,
                               allocation_lower=alloc, allocation_upper=alloc)
    lvl_lo = 1 / (1 + gamma)
    lvl_hi = gamma / (1 + gamma)
    inv = 1 / gamma

    q_lo, lo_pieces, flag_lo = _tail_split(cond_y, lvl_lo, upper=False)
    q_hi, hi_pieces, flag_hi = _tail_split(cond_y, lvl_hi, upper=True)

    lo_block = sum(s * m for s, m in lo_pieces)       # bottom 1/(1+gamma) mass
    hi_block = sum(s * m for s, m in hi_pieces)       # top 1/(1+gamma) mass
    nu_lower = inv * mean + (gamma - inv) * lo_block
    nu_upper = inv * mean + (gamma - inv) * hi_block

    def allocation(extreme_pieces):
        extreme = {}
        for s, m in extreme_pieces:
            extreme[s] = extreme.get(s, 0) + m
        rows = []
        for s, m in zip(cond_y.support, cond_y.mass):
            hot = extreme.get(s, 0)
            if hot > 0:
                rows.append((s, hot, gamma))
            if m - hot > 0:
                rows.append((s, m - hot, inv))
        return tuple(rows)

    return SharpMultiplier(
        quantile_lo=q_lo, quantile_hi=q_hi,
        nu_lower=nu_lower, nu_upper=nu_upper,
        boundary_atom_lower=flag_lo, boundary_atom_upper=flag_hi,
        allocation_lower=allocation(lo_pieces),
        allocation_upper=allocation(hi_pieces),
    )


def bounds_model4_maximal(pi: DiscreteDist, q: DiscreteDist,
                          gamma_minus: Callable, gamma_plus: Callable,
                          t: float) -> ConditionalBound:
    """Odds-ratio-model bounds for the maximal coupling, general treatments.

    Only treatment levels gaining mass contribute: the width integrates the
    arm-specific strengths against (q(a) - pi(a))_+.
    """
    support, pm, qm = _merged_masses(pi, q)
    lo = hi = 0.0
    for s, mp, mq in zip(support, pm, qm):
        gain = mq - mp
        if gain > 0:
            gm, gp = float(gamma_minus(s)), float(gamma_plus(s))
            if gm < 0 or gp < 0:
                raise ValueError("arm strengths must be nonnegative")
            lo += gm * float(gain)
            hi += gp * float(gain)
    return ConditionalBound(t, t - lo, t + hi)
