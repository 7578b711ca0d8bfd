"""Data-generating processes, quadrature ground truths, and brute-force oracles.

Everything here exists to check the production paths independently:

* seeded simulators for the benchmark designs;
* ground-truth functionals evaluated by high-order quadrature over the
  closed-form designs;
* an exact min-cost-flow transport solver over integer-scaled rational
  masses (the optimal-coupling oracle);
* greedy and vertex-enumeration solvers for the extremal multiplier linear
  program of the odds-ratio sensitivity model;
* deterministic decay probes that feed perturbed nuisances through the real
  score implementations and fit the log-log bias slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np
from scipy.special import roots_legendre

from .coupling import PolicyKind
from .data import Dataset, TreatmentKind
from .errors import ConfigError, NumericError
from .rng import RngStream
from .tilt import DiscreteDist, incremental_propensity
from . import estimators as est

_NORMAL = NormalDist()

MOTIVATING_NOISE_SD = 0.25  # artifact choice; the design pins only the arm means

_PURPOSE_X, _PURPOSE_A, _PURPOSE_Y = 11, 12, 13


@dataclass(frozen=True)
class DgpSpec:
    """A named benchmark design with its resolved parameters.

    ``motivating``: X ~ Unif(0,1), P[A=1|X] = X, E[Y|X,A=a] = (2a-1)X with
    Gaussian outcome noise; binary treatment tag.  ``continuous-custom`` is
    the same law tagged as a two-point continuous treatment.
    ``binary-custom``: constant propensity with discrete-uniform arm
    outcomes, used for exact quantile/partial-moment truths.
    """

    name: str
    n: int
    seed: int
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("sample size must be positive")
        params = dict(self.params)
        if self.name in ("motivating", "continuous-custom"):
            extra = set(params) - {"noise_sd"}
            if extra:
                raise ConfigError(f"{self.name} has no parameter {sorted(extra)[0]}")
            params.setdefault("noise_sd", MOTIVATING_NOISE_SD)
        elif self.name == "binary-custom":
            extra = set(params) - {"pi"}
            if extra:
                raise ConfigError(f"binary-custom has no parameter {sorted(extra)[0]}")
            params.setdefault("pi", 0.5)
            if not 0 < params["pi"] < 1:
                raise ConfigError("binary-custom propensity must lie in (0,1)")
        else:
            raise ConfigError(f"unknown dgp name: {self.name}")
        object.__setattr__(self, "params", params)


def simulate(spec: DgpSpec) -> Dataset:
    """Seeded, reproducible draw from the named design."""
    root = RngStream(spec.seed)
    x = root.derive(_PURPOSE_X).uniforms(spec.n)
    ua = root.derive(_PURPOSE_A).uniforms(spec.n)
    if spec.name in ("motivating", "continuous-custom"):
        a = (ua < x).astype(float)
        noise = root.derive(_PURPOSE_Y).normals(spec.n, spec.params["noise_sd"])
        y = (2 * a - 1) * x + noise
        kind = (TreatmentKind.BINARY if spec.name == "motivating"
                else TreatmentKind.CONTINUOUS)
        return Dataset(x[:, None], a, y, kind)
    # binary-custom: arm outcomes uniform on {a, a+1, a+2, a+3}
    a = (ua < spec.params["pi"]).astype(float)
    uy = root.derive(_PURPOSE_Y).uniforms(spec.n)
    y = np.floor(uy * 4.0) + a
    return Dataset(x[:, None], a, y, kind=TreatmentKind.BINARY)


# ---------------------------------------------------------------------------
# Quadrature ground truths


@lru_cache(maxsize=8)
def _legendre_cached(nodes: int):
    xs, ws = roots_legendre(nodes)
    xs = 0.5 * (xs + 1.0)
    ws = 0.5 * ws
    xs.setflags(write=False)
    ws.setflags(write=False)
    return xs, ws


def quadrature_grid(nodes: int = 2001) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1].

    At 2001 nodes the smooth benchmark integrands are exact to well below
    1e-12, so halving the step perturbs truths at roundoff level only.
    Node sets are cached; treat the returned arrays as read-only.
    """
    return _legendre_cached(nodes)


def _gaussian_tail_multiplier(gamma: float, noise_sd: float) -> float:
    """Arm drift bound E[Y(g^+ - 1)] for a Gaussian arm, any mean.

    For symmetric laws the minus-side drift bound coincides, so one constant
    serves all four zeta functionals of the motivating design.
    """
    if gamma == 1.0:
        return 0.0
    z = _NORMAL.inv_cdf(gamma / (1.0 + gamma))
    return noise_sd * (gamma - 1.0 / gamma) * _NORMAL.pdf(z)


def _discrete_drift_bounds(law: DiscreteDist, gamma: float) -> tuple[float, float]:
    """(minus, plus) drift bounds for a discrete arm law via tail moments."""
    mean = float(law.mean())
    if gamma == 1.0:
        return 0.0, 0.0
    lvl_lo, lvl_hi = 1.0 / (1.0 + gamma), gamma / (1.0 + gamma)
    g_lo = float(law.quantile(lvl_lo))
    g_hi = float(law.quantile(lvl_hi))
    kap_lo = sum(m * max(g_lo - s, 0.0) for s, m in zip(law.support, law.mass))
    kap_hi = sum(m * max(s - g_hi, 0.0) for s, m in zip(law.support, law.mass))
    c1, c2 = 1.0 - 1.0 / gamma, gamma - 1.0 / gamma
    return c1 * (mean - g_lo) + c2 * kap_lo, c1 * (g_hi - mean) + c2 * kap_hi


_ZETA_TAGS = {"zeta0_minus": (0, "-"), "zeta0_plus": (0, "+"),
              "zeta1_minus": (1, "-"), "zeta1_plus": (1, "+")}


def truth_by_quadrature(dgp: DgpSpec, functional: str, delta: float,
                        gamma: float | None = None, nodes: int = 2001) -> float:
    """Ground-truth value of a bound functional for a closed-form design."""
    if dgp.name in ("motivating", "continuous-custom"):
        x, w = quadrature_grid(nodes)
        ed = math.exp(delta)
        alpha = ed * x + (1.0 - x)
        q = ed * x / alpha
        if functional == "tau":
            return float((w * (2.0 * q - 1.0) * x).sum())
        if functional == "chi":
            return float((w * x * (1.0 - x) / alpha).sum())
        if functional == "xi":
            return abs(ed - 1.0) * truth_by_quadrature(dgp, "chi", delta, nodes=nodes)
        if functional == "theta":
            return (ed - 1.0) * truth_by_quadrature(dgp, "chi", delta, nodes=nodes)
        if functional == "pure_halfwidth":
            return float((w * (x * (1.0 - q) + (1.0 - x) * q)).sum())
        if functional in _ZETA_TAGS:
            if gamma is None:
                raise ConfigError("zeta truths need a gamma")
            m = _gaussian_tail_multiplier(gamma, dgp.params["noise_sd"])
            return m * truth_by_quadrature(dgp, "chi", delta, nodes=nodes)
        raise ConfigError(f"functional {functional!r} unavailable for {dgp.name}")
    if dgp.name == "binary-custom":
        pi = dgp.params["pi"]
        ed = math.exp(delta)
        alpha = ed * pi + 1.0 - pi
        q = incremental_propensity(pi, delta)
        law1 = DiscreteDist.uniform((1.0, 2.0, 3.0, 4.0))
        law0 = DiscreteDist.uniform((0.0, 1.0, 2.0, 3.0))
        if functional == "tau":
            return float(law0.mean()) * (1.0 - q) + float(law1.mean()) * q
        if functional == "chi":
            return pi * (1.0 - pi) / alpha
        if functional in _ZETA_TAGS:
            if gamma is None:
                raise ConfigError("zeta truths need a gamma")
            arm, side = _ZETA_TAGS[functional]
            law = law1 if arm == 1 else law0
            minus, plus = _discrete_drift_bounds(law, gamma)
            m = minus if side == "-" else plus
            return m * pi * (1.0 - pi) / alpha
        raise ConfigError(f"functional {functional!r} unavailable for binary-custom")
    raise ConfigError(f"no closed-form truths for dgp {dgp.name!r}")


def truth_bounds(dgp: DgpSpec, model: str, policy: PolicyKind, delta: float,
                 gamma: float, nodes: int = 2001) -> tuple[float, float, float]:
    """(lower, upper, tau) population bounds for the motivating design."""
    tau = truth_by_quadrature(dgp, "tau", delta, nodes=nodes)
    if model in ("outcome-gap", "outcome-gap-holder") and gamma < 0:
        raise ConfigError("outcome-gap strength must be >= 0")
    if model == "odds-ratio" and gamma < 1:
        raise ConfigError("odds-ratio strength must be >= 1")
    if model in ("outcome-gap", "outcome-gap-holder"):
        if policy is PolicyKind.MAXIMAL or policy is PolicyKind.MONOTONE:
            # two-point treatment: Wasserstein-1 and TV widths coincide
            half = gamma * truth_by_quadrature(dgp, "xi", delta, nodes=nodes)
        elif policy is PolicyKind.PURE:
            half = gamma * truth_by_quadrature(dgp, "pure_halfwidth", delta,
                                               nodes=nodes)
        else:
            raise ConfigError(f"no truth for policy {policy}")
        return tau - half, tau + half, tau
    if model == "odds-ratio":
        if policy is not PolicyKind.MAXIMAL:
            raise ConfigError("odds-ratio truths cover the maximal policy only")
        ed = math.exp(delta)
        if delta > 0:
            lo = (ed - 1.0) * truth_by_quadrature(dgp, "zeta1_minus", delta, gamma,
                                                  nodes)
            hi = (ed - 1.0) * truth_by_quadrature(dgp, "zeta1_plus", delta, gamma,
                                                  nodes)
        elif delta < 0:
            lo = (1.0 - ed) * truth_by_quadrature(dgp, "zeta0_minus", delta, gamma,
                                                  nodes)
            hi = (1.0 - ed) * truth_by_quadrature(dgp, "zeta0_plus", delta, gamma,
                                                  nodes)
        else:
            lo = hi = 0.0
        return tau - lo, tau + hi, tau
    raise ConfigError(f"no truth for model {model!r}")


def figure_grid(deltas: Sequence[float], gammas: Sequence[float],
                nodes: int = 2001) -> list[dict]:
    """Population bound grid over tilt strengths for pure and maximal policies."""
    dgp = DgpSpec("motivating", n=1, seed=0)
    rows = []
    for gamma in gammas:
        for delta in deltas:
            for policy in (PolicyKind.PURE, PolicyKind.MAXIMAL):
                lo, hi, tau = truth_bounds(dgp, "outcome-gap", policy, delta,
                                           gamma, nodes)
                rows.append({"delta": delta, "gamma": gamma,
                             "policy": policy.value,
                             "lower": lo, "upper": hi, "tau": tau})
    return rows


# ---------------------------------------------------------------------------
# Exact min-cost transport oracle

_DENOM_CAP = 10 ** 6


def _as_integer_masses(dist: DiscreteDist) -> tuple[list[int], int]:
    """Masses as integers over a common denominator (cap 1e6), exactly."""
    fracs = []
    for m in dist.mass:
        f = Fraction(m) if not isinstance(m, Fraction) else m
        fracs.append(f)
        if f.denominator > _DENOM_CAP:
            raise NumericError(
                "mass denominator exceeds the integer-scaling cap; "
                "supply exact rational masses"
            )
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // math.gcd(denom, f.denominator)
        if denom > _DENOM_CAP:
            raise NumericError("least common denominator exceeds the cap")
    return [int(f * denom) for f in fracs], denom


@dataclass(frozen=True)
class TransportInstance:
    """A balanced discrete transport problem with rational masses."""

    supply: DiscreteDist
    demand: DiscreteDist
    cost: tuple  # row-major (len(supply) x len(demand)) cost matrix

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.cost)
        if len(rows) != len(self.supply) or any(
                len(r) != len(self.demand) for r in rows):
            raise ValueError("cost matrix shape must match the supports")
        object.__setattr__(self, "cost", rows)

    @staticmethod
    def from_cost_fn(supply: DiscreteDist, demand: DiscreteDist,
                     cost_fn) -> "TransportInstance":
        rows = tuple(tuple(cost_fn(s, d) for d in demand.support)
                     for s in supply.support)
        return TransportInstance(supply, demand, rows)


def oracle_min_cost_transport(inst: TransportInstance):
    """Exact optimum by successive shortest paths on integer-scaled masses.

    Returns ``(value, plan)`` where the plan is a supply-by-demand matrix of
    exact Fractions whose marginals equal the inputs exactly.  Costs are
    carried as Fractions, so the value is exact for rational inputs.
    """
    sup_int, dsup = _as_integer_masses(inst.supply)
    dem_int, ddem = _as_integer_masses(inst.demand)
    scale = dsup * ddem // math.gcd(dsup, ddem)
    sup = [v * (scale // dsup) for v in sup_int]
    dem = [v * (scale // ddem) for v in dem_int]
    if sum(sup) != sum(dem):
        raise NumericError("unbalanced transport instance")
    m, n = len(sup), len(dem)
    cost = [[Fraction(c) for c in row] for row in inst.cost]
    flow = [[0] * n for _ in range(m)]

    remaining = sum(sup)
    while remaining > 0:
        # Bellman-Ford from all supplies with remaining mass; residual
        # backward arcs demand->supply carry cost -c and capacity flow.
        dist_s = [Fraction(0) if sup[i] > 0 else None for i in range(m)]
        dist_d = [None] * n
        pred_d = [None] * n  # supply feeding demand j on the shortest path
        pred_s = [None] * m  # demand feeding supply i backward
        for _ in range(m + n):
            changed = False
            for i in range(m):
                if dist_s[i] is None:
                    continue
                for j in range(n):
                    nd = dist_s[i] + cost[i][j]
                    if dist_d[j] is None or nd < dist_d[j]:
                        dist_d[j], pred_d[j] = nd, i
                        changed = True
            for j in range(n):
                if dist_d[j] is None:
                    continue
                for i in range(m):
                    if flow[i][j] > 0:
                        nd = dist_d[j] - cost[i][j]
                        if dist_s[i] is None or nd < dist_s[i]:
                            dist_s[i], pred_s[i] = nd, j
                            changed = True
            if not changed:
                break
        target = None
        for j in range(n):
            if dem[j] > 0 and dist_d[j] is not None:
                if target is None or dist_d[j] < dist_d[target]:
                    target = j
        if target is None:
            raise NumericError("transport oracle failed to find an augmenting path")
        # walk back to a source supply, recording the path and bottleneck
        path = []  # (i, j, forward?)
        j = target
        bottleneck = dem[j]
        while True:
            i = pred_d[j]
            path.append((i, j, True))
            if pred_s[i] is None:
                break  # reached a supply that seeded the search
            jj = pred_s[i]
            path.append((i, jj, False))
            bottleneck = min(bottleneck, flow[i][jj])
            j = jj
        src = path[-1][0]
        bottleneck = min(bottleneck, sup[src])
        for i, j, forward in path:
            if forward:
                flow[i][j] += bottleneck
            else:
                flow[i][j] -= bottleneck
        sup[src] -= bottleneck
        dem[target] -= bottleneck
        remaining -= bottleneck

    value = sum(cost[i][j] * flow[i][j] for i in range(m) for j in range(n))
    plan = [[Fraction(flow[i][j], scale) for j in range(n)] for i in range(m)]
    return value / scale, plan


# ---------------------------------------------------------------------------
# Extremal multiplier linear program


def oracle_sharp_multiplier(cond_y: DiscreteDist, gamma, direction: str):
    """Exact LP optimum of E[Y h] over {1/gamma <= h <= gamma, E[h] = 1}.

    Greedy sweep: the extreme tail of mass 1/(1+gamma) (taken from the low
    end for ``min``, the high end for ``max``, splitting the boundary atom
    fractionally) receives multiplier gamma, everything else 1/gamma.
    """
    if direction not in ("min", "max"):
        raise ValueError("direction must be 'min' or 'max'")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if len(cond_y.support) > 10 ** 4:
        raise NumericError("support too large for the multiplier oracle")
    if gamma == 1:
        return cond_y.mean()
    inv = 1 / gamma
    budget = 1 / (1 + gamma)
    pairs = list(zip(cond_y.support, cond_y.mass))
    if direction == "max":
        pairs = pairs[::-1]
    total = 0
    for y, m in pairs:
        take = m if m < budget else budget
        total = total + y * (take * gamma + (m - take) * inv)
        budget = budget - take
    return total


def oracle_multiplier_vertex(cond_y: DiscreteDist, gamma, direction: str):
    """Exhaustive vertex enumeration of the same LP; supports of size <= 12.

    A vertex of the box-with-one-equality polytope fixes every coordinate at
    a bound except at most one, which the equality pins down.
    """
    n = len(cond_y.support)
    if n > 12:
        raise NumericError("vertex enumeration limited to small supports")
    if gamma == 1:
        return cond_y.mean()
    inv = 1 / gamma
    ys, ms = list(cond_y.support), list(cond_y.mass)
    best = None
    better = (lambda a, b: a < b) if direction == "min" else (lambda a, b: a > b)
    for free in list(range(n)) + [None]:
        others = [i for i in range(n) if i != free]
        for bits in range(1 << len(others)):
            h = [None] * n
            acc = 0
            for b, i in enumerate(others):
                h[i] = gamma if (bits >> b) & 1 else inv
                acc = acc + ms[i] * h[i]
            if free is None:
                if acc != 1:
                    continue
            else:
                if ms[free] == 0:
                    if acc != 1:
                        continue
                    h[free] = inv
                else:
                    hf = (1 - acc) / ms[free]
                    if not inv <= hf <= gamma:
                        continue
                    h[free] = hf
            val = sum(y * m * hv for y, m, hv in zip(ys, ms, h))
            if best is None or better(val, best):
                best = val
    if best is None:
        raise NumericError("no feasible vertex found")
    return best


# ---------------------------------------------------------------------------
# Deterministic second-order remainder probes


def _probe_motivating_parts(nodes: int):
    x, w = quadrature_grid(nodes)
    pi = x
    mu0, mu1 = -x, x
    return x, w, pi, mu0, mu1


# Perturbation directions for the decay probes.  The 1/4 amplitude keeps the
# largest probe point (eps = 0.4) inside the quadratic regime: without it the
# cubic terms of the remainder (and propensity clipping near the boundary)
# drag the fitted log-log slope visibly below 2.
def _dir_pi(x):
    return 0.25 * np.sin(3.0 * x)


def _dir_mu(x):
    return 0.25 * np.cos(2.0 * x)


def _binary_design_mean(score_fn, x, w, pi, mu0, mu1):
    """E[score] over the design: linear-in-Y scores admit exact integration."""
    s0 = score_fn(a=np.zeros_like(x), y=mu0)
    s1 = score_fn(a=np.ones_like(x), y=mu1)
    return float((w * ((1.0 - pi) * s0 + pi * s1)).sum())


def remainder_decay_probe(functional: str, eps_grid: Sequence[float],
                          nodes: int = 2001, delta: float = 1.0,
                          gamma: float = 2.0):
    """Fit the log-log slope of |bias(eps)| for smoothly perturbed nuisances.

    The perturbations are fixed smooth functions (sin/cos), the perturbed
    scores are integrated exactly against the motivating design, and the bias
    is measured against the independent quadrature truth, so the probe is
    deterministic.  Returns ``(slope, biases)`` with one bias per eps.
    """
    dgp = DgpSpec("motivating", n=1, seed=0)
    x, w, pi, mu0, mu1 = _probe_motivating_parts(nodes)
    biases = []
    if functional == "tau_binary":
        truth = truth_by_quadrature(dgp, "tau", delta, nodes=nodes)
        for eps in eps_grid:
            pbar = np.clip(pi + eps * _dir_pi(x), 1e-3, 1.0 - 1e-3)
            m0b, m1b = mu0 + eps * _dir_mu(x), mu1 + eps * _dir_mu(x)
            val = _binary_design_mean(
                lambda a, y: est.binary_tau_score(y, a, pbar, m0b, m1b, delta),
                x, w, pi, mu0, mu1)
            biases.append(val - truth)
    elif functional == "chi":
        truth = truth_by_quadrature(dgp, "chi", delta, nodes=nodes)
        for eps in eps_grid:
            pbar = np.clip(pi + eps * _dir_pi(x), 1e-3, 1.0 - 1e-3)
            val = _binary_design_mean(
                lambda a, y: est.binary_chi_score(a, pbar, delta),
                x, w, pi, mu0, mu1)
            biases.append(val - truth)
    elif functional == "tau_continuous":
        truth = truth_by_quadrature(dgp, "tau", delta, nodes=nodes)
        ed = math.exp(delta)
        alpha = ed * pi + (1.0 - pi)
        greg = (ed * pi * mu1 + (1.0 - pi) * mu0) / alpha
        for eps in eps_grid:
            abar = alpha + eps * _dir_pi(x)
            gbar = greg + eps * _dir_mu(x)
            val = _binary_design_mean(
                lambda a, y: est.continuous_tau_score(y, a, np.log(abar), gbar,
                                                      delta),
                x, w, pi, mu0, mu1)
            biases.append(val - truth)
    elif functional == "quantile_bracket":
        # first-order cancellation between a shifted tail quantile and the
        # matching partial moment, for a unit Gaussian outcome law
        z = _NORMAL.inv_cdf(gamma / (1.0 + gamma))

        def partial_moment(c):
            return _NORMAL.pdf(c) - c * (1.0 - _NORMAL.cdf(c))

        for eps in eps_grid:
            term = eps / (1.0 + gamma) + partial_moment(z + eps) - partial_moment(z)
            biases.append(term)
    else:
        raise ConfigError(f"unknown probe functional {functional!r}")

    pos = [(e, abs(b)) for e, b in zip(eps_grid, biases) if e > 0]
    if any(b == 0 for _, b in pos) or len(pos) < 2:
        raise NumericError("probe biases vanish; cannot fit a slope")
    le = np.log([e for e, _ in pos])
    lb = np.log([b for _, b in pos])
    slope = float(np.polyfit(le, lb, 1)[0])
    return slope, biases
