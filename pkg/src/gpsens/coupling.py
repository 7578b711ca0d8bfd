"""Policy constructions coupling the natural treatment to a target law.

Three ways to realize a target treatment distribution Q alongside the
observational law Pi:

* pure: an independent quantile draw, ignoring the natural treatment;
* monotone (rank-preserving): push the natural value through its own CDF and
  the target quantile, optimal for convex transport costs on the line;
* maximal: keep the natural value with the largest possible probability and
  redraw from the residual law otherwise, so the mismatch probability equals
  the total variation distance exactly.

Exact discrete distances (total variation, one-dimensional Wasserstein) are
computed with dtype-generic arithmetic: Fraction-valued inputs give exact
rational outputs, which the brute-force transport oracle can match bit for
bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError
from .rng import RngStream
from .tilt import DiscreteDist


class PolicyKind(enum.Enum):
    """Which coupling realizes the target law (monotone = rank-preserving)."""

    PURE = "pure"
    MONOTONE = "monotone"
    MAXIMAL = "maximal"


@dataclass(frozen=True)
class CouplingSample:
    a_natural: float
    a_assigned: float


def _merged_masses(p: DiscreteDist, q: DiscreteDist):
    """Common support with aligned mass sequences, preserving exact types."""
    support = sorted(set(p.support) | set(q.support))
    pm = {s: m for s, m in zip(p.support, p.mass)}
    qm = {s: m for s, m in zip(q.support, q.mass)}
    return support, [pm.get(s, 0) for s in support], [qm.get(s, 0) for s in support]


def tv_distance(p: DiscreteDist, q: DiscreteDist):
    """Total variation distance 1 - sum(min(p, q)) = 0.5 * sum|p - q|."""
    _, pm, qm = _merged_masses(p, q)
    return 1 - sum(min(a, b) for a, b in zip(pm, qm))


def wasserstein_line(p: DiscreteDist, q: DiscreteDist,
                     cost: Callable = abs):
    """Transport cost int_0^1 cost(|P^{-1}(u) - Q^{-1}(u)|) du, exactly.

    ``cost`` must be convex with cost(0) = 0; the integral is evaluated by
    merging the two quantile-function breakpoints, so the result is exact for
    exact inputs.
    """
    cum_p, cum_q = p.cumulative(), q.cumulative()
    events = sorted(set(cum_p) | set(cum_q))
    ip = iq = 0
    prev = 0
    total = 0
    for c in events:
        while cum_p[ip] < c:
            ip += 1
        while cum_q[iq] < c:
            iq += 1
        seg = c - prev
        if seg > 0:
            gap = p.support[ip] - q.support[iq]
            total = total + seg * cost(gap if gap >= 0 else -gap)
        prev = c
    return total


def pure_policy_draw(q, v):
    """Quantile of the target law at ``v``: the independent coupling.

    ``q`` is a :class:`DiscreteDist` or a quantile callable; ``v`` may be a
    scalar or an array of uniforms in [0, 1).  The left-continuous
    generalized inverse inf{a : F(a) >= v} is used throughout.
    """
    if callable(q):
        return q(v)
    v_arr = np.asarray(v, dtype=float)
    cum = np.cumsum(np.asarray(q.mass, dtype=float))
    idx = np.minimum(np.searchsorted(cum, v_arr, side="left"), len(cum) - 1)
    out = np.asarray(q.support, dtype=float)[idx]
    return float(out) if np.isscalar(v) else out


def monotone_policy_map(pi_cdf: Callable, q_quantile: Callable, a):
    """Rank-preserving map Q^{-1}(Pi(a)); requires a continuous base law.

    The caller asserts continuity of the base law on an interval; under that
    assumption Pi(A) is uniform and the pushforward has law Q.
    """
    return q_quantile(pi_cdf(a))


def maximal_policy_draw_binary(pi: float, q: float, a, v):
    """Maximal coupling for two-point treatments.

    Keeps the natural value when q = pi; otherwise moves the smallest
    possible fraction of subjects in the direction of sign(q - pi):

    * q < pi: treated stay treated only when v <= q/pi;
    * q > pi: controls are promoted when v > (1-q)/(1-pi).
    """
    if not (0.0 <= pi <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("pi and q must be probabilities")
    if pi in (0.0, 1.0) and q != pi:
        raise NumericError(
            f"positivity violation: pi={pi} is degenerate but q={q} != pi"
        )
    a_arr = np.asarray(a, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if q == pi:
        out = a_arr
    elif q < pi:
        out = a_arr * (v_arr <= q / pi)
    else:
        out = a_arr + (1.0 - a_arr) * (v_arr > (1.0 - q) / (1.0 - pi))
    return float(out) if np.isscalar(v) and np.isscalar(a) else out


def maximal_policy_draw_discrete(pi: DiscreteDist, q: DiscreteDist, a, v1, v2):
    """Maximal coupling for discrete laws.

    Keep the natural value ``a`` when v1 <= min{1, q(a)/pi(a)}; otherwise
    draw from the residual law (q - min{pi, q})_+ / TV(pi, q) via v2.  The
    residual normalizer is the exactly computed total variation distance,
    never a sampled estimate.
    """
    support, pm, qm = _merged_masses(pi, q)
    for s, mp, mq in zip(support, pm, qm):
        if mq > 0 and mp == 0:
            raise NumericError(
                f"target law puts mass at {s} where the base law has none"
            )
    sup = np.asarray(support, dtype=float)
    pm_arr = np.asarray(pm, dtype=float)
    qm_arr = np.asarray(qm, dtype=float)
    tv = float(tv_distance(pi, q))

    a_arr = np.atleast_1d(np.asarray(a, dtype=float))
    idx = np.searchsorted(sup, a_arr)
    ok = (idx < len(sup)) & (sup[np.minimum(idx, len(sup) - 1)] == a_arr)
    if not ok.all():
        raise ValueError("natural treatment value outside the base support")
    with np.errstate(divide="ignore", invalid="ignore"):
        keep = np.minimum(1.0, qm_arr[idx] / pm_arr[idx])
    keep = np.where(pm_arr[idx] > 0, keep, 1.0)

    v1_arr = np.atleast_1d(np.asarray(v1, dtype=float))
    v2_arr = np.atleast_1d(np.asarray(v2, dtype=float))
    stay = v1_arr <= keep
    if tv == 0.0:
        # q = pi pointwise: keep probability is 1 everywhere, residual unused
        out = a_arr
    else:
        resid = np.maximum(qm_arr - np.minimum(pm_arr, qm_arr), 0.0) / tv
        cum = np.cumsum(resid)
        ridx = np.minimum(np.searchsorted(cum, v2_arr, side="left"), len(sup) - 1)
        out = np.where(stay, a_arr, sup[ridx])
    if np.isscalar(a) and np.isscalar(v1):
        return float(out[0])
    return out


def mismatch_probability_exact(pi: DiscreteDist, q: DiscreteDist,
                               kind: PolicyKind):
    """P[A != d] for the coupling realized by ``kind``, in closed form.

    Maximal achieves the total variation distance; the pure draw is
    independent so mismatch is 1 - sum_a pi(a) q(a).  The rank-preserving map
    has no discrete closed form (it needs a continuous base law).
    """
    if kind is PolicyKind.MAXIMAL:
        return tv_distance(pi, q)
    if kind is PolicyKind.PURE:
        _, pm, qm = _merged_masses(pi, q)
        return 1 - sum(a * b for a, b in zip(pm, qm))
    raise NumericError("rank-preserving mismatch undefined for discrete laws")


def sample_policy(kind: PolicyKind, pi: DiscreteDist, q: DiscreteDist,
                  stream: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n coupled pairs (A, d) with A ~ pi and d realizing ``kind``.

    Distinct derived streams supply the natural draw and the one or two
    auxiliary uniforms, so the coupling randomness is independent of A by
    construction.
    """
    a = pure_policy_draw(pi, stream.derive(1).uniforms(n))
    if kind is PolicyKind.PURE:
        d = pure_policy_draw(q, stream.derive(2).uniforms(n))
    elif kind is PolicyKind.MAXIMAL:
        d = maximal_policy_draw_discrete(
            pi, q, a, stream.derive(2).uniforms(n), stream.derive(3).uniforms(n)
        )
    else:
        raise NumericError("rank-preserving sampling needs a continuous base law")
    return a, d


def sample_monotone(pi_quantile: Callable, pi_cdf: Callable,
                    q_quantile: Callable, stream: RngStream,
                    n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n pairs (A, d) under the rank-preserving map for continuous laws."""
    a = pi_quantile(stream.derive(1).uniforms(n))
    return a, monotone_policy_map(pi_cdf, q_quantile, a)
