"""Nonparametric nuisance estimation with K-fold cross-fitting.

Every fitted quantity at row i is computed from training rows outside i's
fold, so downstream score averages never reuse a row's own outcome.  The
default learner is k-nearest-neighbors with covariate standardization and
k = max(25, ceil(n^0.7) capped at n/2); conditional quantiles and partial
moments are taken over the same neighbor multisets as the arm means, with the
left-continuous empirical quantile convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .data import Dataset, FoldPlan, TreatmentKind
from .errors import ConfigError, DataError, NumericError

PROPENSITY_CLIP = 1e-3


@dataclass(frozen=True)
class RegressorSpec:
    """Learner configuration for all nuisance fits."""

    method: str = "knn"            # "knn" | "kernel"
    k: int | None = None           # neighbor count; None = size-based default
    bandwidth: float | None = None  # kernel width on the standardized scale
    standardize: bool = True

    def __post_init__(self):
        if self.method not in ("knn", "kernel"):
            raise ConfigError(f"unknown regression method {self.method!r}")
        if self.k is not None and self.k < 1:
            raise ConfigError("neighbor count must be >= 1")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")


def default_neighbor_count(n: int) -> int:
    return max(25, min(math.ceil(n ** 0.7), n // 2))


class _Standardizer:
    def __init__(self, x: np.ndarray, enabled: bool):
        if enabled:
            self.mean = x.mean(axis=0)
            sd = x.std(axis=0)
            self.sd = np.where(sd > 0, sd, 1.0)
        else:
            self.mean = np.zeros(x.shape[1])
            self.sd = np.ones(x.shape[1])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.sd


class _KnnIndex:
    """Standardized-metric neighbor lookup over a training slice."""

    def __init__(self, x: np.ndarray, standardize: bool):
        self.scale = _Standardizer(x, standardize)
        self.tree = cKDTree(self.scale(x))
        self.n = x.shape[0]

    def neighbors(self, query: np.ndarray, k: int) -> np.ndarray:
        k = min(k, self.n)
        _, idx = self.tree.query(self.scale(query), k=k)
        return np.atleast_2d(idx) if k > 1 else np.atleast_2d(idx).T


def fit_mean_regression(x: np.ndarray, target: np.ndarray,
                        spec: RegressorSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Fit E[target | x] and return a vectorized predictor.

    KNN averages the k nearest targets in the standardized Euclidean metric;
    the kernel method is Nadaraya-Watson with a Gaussian kernel, falling back
    to the nearest neighbor wherever the kernel mass underflows.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] == 0:
        raise DataError("empty training set")
    target = np.asarray(target, dtype=float)
    if spec.method == "knn":
        k = spec.k if spec.k is not None else default_neighbor_count(x.shape[0])
        index = _KnnIndex(x, spec.standardize)

        def predict(query):
            q = np.atleast_2d(np.asarray(query, dtype=float))
            return target[index.neighbors(q, k)].mean(axis=1)

        return predict

    scale = _Standardizer(x, spec.standardize)
    xs = scale(x)
    n, d = xs.shape
    bw = spec.bandwidth if spec.bandwidth is not None else n ** (-1.0 / (d + 4))

    def predict(query):
        q = scale(np.atleast_2d(np.asarray(query, dtype=float)))
        out = np.empty(q.shape[0])
        for i, row in enumerate(q):
            d2 = ((xs - row) ** 2).sum(axis=1)
            w = np.exp(-0.5 * d2 / bw ** 2)
            mass = w.sum()
            if mass <= 0 or not np.isfinite(mass):
                out[i] = target[int(np.argmin(d2))]
            else:
                out[i] = float((w * target).sum() / mass)
        return out

    return predict


@dataclass(frozen=True)
class ContinuousNuisances:
    """Cross-fit tilt-moment nuisances, one out-of-fold value per row."""

    delta: float
    log_alpha: np.ndarray   # log E[exp(delta*A) | X]
    alpha: np.ndarray
    gamma_reg: np.ndarray   # E[Y exp(delta*A) | X] / alpha
    beta: np.ndarray        # E[A exp(delta*A) | X] / alpha
    kappa: np.ndarray       # mean exp(delta*A) over neighbors below alpha-hat
    kappa_fallback: np.ndarray = field(repr=False)
    provenance: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class BinaryNuisances:
    """Cross-fit propensity/arm-mean nuisances, plus quantile fits when a
    sensitivity strength is supplied."""

    pi: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    clip_count: int
    gamma: float | None = None
    gamma_lo: tuple | None = None   # (arm0, arm1) quantiles at 1/(1+gamma)
    gamma_hi: tuple | None = None   # (arm0, arm1) quantiles at gamma/(1+gamma)
    kappa_lo: tuple | None = None   # (arm0, arm1) means of (gamma_lo - Y)_+
    kappa_hi: tuple | None = None   # (arm0, arm1) means of (Y - gamma_hi)_+
    provenance: Mapping = field(default_factory=dict)


def _resolve_k(spec: RegressorSpec, n: int) -> int:
    if spec.method != "knn":
        raise ConfigError("cross-fit nuisance sets are neighbor-based; use knn")
    return spec.k if spec.k is not None else default_neighbor_count(n)


def _quantile_index(level: float, m: int) -> int:
    """0-based index of the left-continuous empirical quantile in a sorted
    multiset of size m; tiny slack guards float fuzz at exactly-attained
    levels."""
    return max(int(math.ceil(level * m - 1e-9)) - 1, 0)


def fit_continuous_nuisances(data: Dataset, delta: float, plan: FoldPlan,
                             spec: RegressorSpec) -> ContinuousNuisances:
    """Cross-fit the tilt moments alpha, gamma, beta and the conditional
    below-mean moment kappa for a real-valued treatment."""
    if data.kind is not TreatmentKind.CONTINUOUS:
        raise ConfigError("continuous nuisances require a continuous-kind dataset")
    if plan.n != data.n:
        raise ConfigError("fold plan size does not match the dataset")
    k = _resolve_k(spec, data.n)
    n = data.n
    log_alpha = np.empty(n)
    gamma_reg = np.empty(n)
    beta = np.empty(n)
    kappa = np.empty(n)
    fallback = np.zeros(n, dtype=bool)
    for fold in range(plan.k):
        tr, ev = plan.train_rows(fold), plan.eval_rows(fold)
        index = _KnnIndex(data.x[tr], spec.standardize)
        idx = index.neighbors(data.x[ev], k)
        a_nb = data.a[tr][idx]
        y_nb = data.y[tr][idx]
        expo = delta * a_nb
        shift = expo.max(axis=1, keepdims=True)
        w = np.exp(expo - shift)
        sw = w.sum(axis=1)
        la = shift[:, 0] + np.log(sw / a_nb.shape[1])
        log_alpha[ev] = la
        gamma_reg[ev] = (y_nb * w).sum(axis=1) / sw
        beta[ev] = (a_nb * w).sum(axis=1) / sw
        below = expo < la[:, None]
        # exp is evaluated only where bounded by alpha-hat, so never overflows
        vals = np.where(below, np.exp(np.minimum(expo, la[:, None])), 0.0)
        counts = below.sum(axis=1)
        with np.errstate(invalid="ignore"):
            kap = vals.sum(axis=1) / counts
        empty = counts == 0
        kap[empty] = np.exp(la[empty])
        fallback[ev] = empty
        kappa[ev] = kap
    with np.errstate(over="ignore"):
        alpha = np.exp(log_alpha)
    if not np.isfinite(alpha).all():
        raise NumericError("overflow in E[exp(delta*A)|X]; reduce |delta|")
    prov = {"k": k, "folds": plan.k, "seed": plan.seed, "delta": delta,
            "standardize": spec.standardize,
            "kappa_fallback_count": int(fallback.sum())}
    return ContinuousNuisances(delta, log_alpha, alpha, gamma_reg, beta, kappa,
                               fallback, prov)


def fit_binary_nuisances(data: Dataset, plan: FoldPlan, spec: RegressorSpec,
                         gamma: float | None = None) -> BinaryNuisances:
    """Cross-fit the propensity and arm means; with ``gamma``, also the arm
    outcome quantiles at levels 1/(1+gamma), gamma/(1+gamma) and the matching
    one-sided partial moments over the same neighbor multisets."""
    if data.kind is not TreatmentKind.BINARY:
        raise ConfigError("binary nuisances require a binary-kind dataset")
    if plan.n != data.n:
        raise ConfigError("fold plan size does not match the dataset")
    if gamma is not None and gamma < 1:
        raise ConfigError("odds-ratio strength must be >= 1")
    k = _resolve_k(spec, data.n)
    n = data.n
    pi = np.empty(n)
    mu = [np.empty(n), np.empty(n)]
    want_quant = gamma is not None
    g_lo = [np.empty(n), np.empty(n)] if want_quant else None
    g_hi = [np.empty(n), np.empty(n)] if want_quant else None
    k_lo = [np.empty(n), np.empty(n)] if want_quant else None
    k_hi = [np.empty(n), np.empty(n)] if want_quant else None
    if want_quant:
        lvl_lo, lvl_hi = 1.0 / (1.0 + gamma), gamma / (1.0 + gamma)
    for fold in range(plan.k):
        tr, ev = plan.train_rows(fold), plan.eval_rows(fold)
        index = _KnnIndex(data.x[tr], spec.standardize)
        pi[ev] = data.a[tr][index.neighbors(data.x[ev], k)].mean(axis=1)
        for arm in (0, 1):
            rows = tr[data.a[tr] == arm]
            if rows.size == 0:
                raise DataError(
                    f"treatment arm {arm} is empty in the training split of fold {fold}"
                )
            arm_index = _KnnIndex(data.x[rows], spec.standardize)
            idx = arm_index.neighbors(data.x[ev], k)
            y_nb = data.y[rows][idx]
            mu[arm][ev] = y_nb.mean(axis=1)
            if want_quant:
                m = y_nb.shape[1]
                y_sorted = np.sort(y_nb, axis=1)
                glo = y_sorted[:, _quantile_index(lvl_lo, m)]
                ghi = y_sorted[:, _quantile_index(lvl_hi, m)]
                g_lo[arm][ev] = glo
                g_hi[arm][ev] = ghi
                k_lo[arm][ev] = np.maximum(glo[:, None] - y_nb, 0.0).mean(axis=1)
                k_hi[arm][ev] = np.maximum(y_nb - ghi[:, None], 0.0).mean(axis=1)
    clipped = np.clip(pi, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
    clip_count = int((clipped != pi).sum())
    prov = {"k": k, "folds": plan.k, "seed": plan.seed, "gamma": gamma,
            "standardize": spec.standardize, "clip_count": clip_count}
    return BinaryNuisances(
        pi=clipped, mu0=mu[0], mu1=mu[1], clip_count=clip_count, gamma=gamma,
        gamma_lo=tuple(g_lo) if want_quant else None,
        gamma_hi=tuple(g_hi) if want_quant else None,
        kappa_lo=tuple(k_lo) if want_quant else None,
        kappa_hi=tuple(k_hi) if want_quant else None,
        provenance=prov,
    )


NuisanceFit = ContinuousNuisances | BinaryNuisances
