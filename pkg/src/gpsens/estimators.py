"""Cross-fit one-step estimators of the bound functionals, with Wald CIs.

Each functional is estimated by the mean of a per-observation debiased score
evaluated at out-of-fold nuisances.  Bound endpoints combine the center score
with a scaled width score; endpoint standard errors use the empirical
variance of the composed per-observation score, never a delta method on the
separate pieces, so the reported intervals match the joint fluctuation of
center and width.

Sign conventions, fixed here once:

* outcome-gap model, maximal coupling: width scale is gamma*|e^delta - 1| for
  two-point treatments (times the propensity-curvature functional chi) and
  gamma for real treatments (times the expected total variation xi);
* Holder outcome model (p = 1), rank-preserving coupling: scale is
  gamma*sign(delta) times the signed transport functional theta, so the
  width is nonnegative for either tilt direction;
* odds-ratio model, two-point maximal coupling: for delta > 0 the bounds are
  tau -/+ (e^delta - 1) * zeta_1^-/+, for delta < 0 they are
  tau -/+ (1 - e^delta) * zeta_0^-/+, and at delta = 0 the width is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Mapping

import numpy as np

from .bounds import (BoundedOutcome, OddsRatio, OutcomeGap, OutcomeGapHolder,
                     SensitivityModel)
from .coupling import PolicyKind
from .data import Dataset, FoldPlan, TreatmentKind, make_folds
from .errors import ConfigError, NumericError
from .nuisance import (BinaryNuisances, ContinuousNuisances, RegressorSpec,
                       fit_binary_nuisances, fit_continuous_nuisances)

DEGENERATE_VARIANCE = 1e-20


@dataclass(frozen=True)
class ScoreVector:
    """Per-observation values of one debiased score."""

    values: np.ndarray
    functional_tag: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.isfinite(v).all():
            raise NumericError(f"non-finite score values for {self.functional_tag}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]


# -- pure score evaluators (shared with the decay probes) -------------------


def continuous_tau_score(y, a, log_alpha, gamma_reg, delta):
    """e^{dA}/alpha (Y - gamma) + gamma, with the exponent ratio in log space."""
    w = np.exp(delta * a - log_alpha)
    return w * (y - gamma_reg) + gamma_reg


def xi_score(a, log_alpha, kappa, delta):
    """{1(e^{dA} < alpha) - kappa} {1 - e^{dA}/alpha}."""
    expo = delta * a
    ind = (expo < log_alpha).astype(float)
    w = np.exp(expo - log_alpha)
    return (ind - kappa) * (1.0 - w)


def theta_score(a, log_alpha, beta, delta):
    """(e^{dA}/alpha - 1)(A - beta); identical to the displayed score
    e^{dA}/alpha (A - beta) + beta - A but exactly zero at delta = 0."""
    w = np.exp(delta * a - log_alpha)
    return (w - 1.0) * (a - beta)


def binary_tau_score(y, a, pi, mu0, mu1, delta):
    ed = math.exp(delta)
    alpha = ed * pi + (1.0 - pi)
    # the arm indicator already zeroes the residual term, so a degenerate
    # propensity fed by an oracle must not turn 0/0 into NaN
    with np.errstate(invalid="ignore", divide="ignore"):
        phi0 = np.where(a < 1.0, (1.0 - a) / (1.0 - pi) * (y - mu0), 0.0) + mu0
        phi1 = np.where(a > 0.0, a / pi * (y - mu1), 0.0) + mu1
    return (ed * pi * phi1 + (1.0 - pi) * phi0) / alpha \
        + ed * (mu1 - mu0) * (a - pi) / alpha ** 2


def binary_chi_score(a, pi, delta):
    ed = math.exp(delta)
    alpha = ed * pi + (1.0 - pi)
    return pi * (1.0 - pi) / alpha \
        + ((1.0 - pi) ** 2 - ed * pi ** 2) * (a - pi) / alpha ** 2


def zeta_score(y, a, pi, mu, gamma_q, kappa, delta, gamma, arm, side):
    """Debiased score for the arm drift-bound functionals zeta.

    ``mu``, ``gamma_q``, ``kappa`` are the requested arm's mean, tail
    quantile, and matching one-sided partial moment; ``side`` picks the lower
    ("-", quantile at 1/(1+gamma)) or upper ("+", at gamma/(1+gamma)) bound.
    Every term carries a factor (1 - 1/gamma) or (gamma - 1/gamma), so the
    score vanishes identically at gamma = 1.
    """
    ed = math.exp(delta)
    alpha = ed * pi + (1.0 - pi)
    c1 = 1.0 - 1.0 / gamma
    c2 = gamma - 1.0 / gamma
    curv = ((1.0 - pi) ** 2 - ed * pi ** 2) / alpha ** 2 * (a - pi)
    if arm == 1:
        lead = (1.0 - pi) / alpha
        arm_w, arm_ind = pi, a
    else:
        lead = pi / alpha
        arm_w, arm_ind = 1.0 - pi, 1.0 - a
    if side == "+":
        inner = (-c1 * (arm_w * mu + arm_ind * (y - mu))
                 + c2 * (arm_w * (gamma_q / (1.0 + gamma) + kappa)
                         + arm_ind * (np.maximum(y - gamma_q, 0.0) - kappa)))
        tail = c1 * (gamma_q - mu) + c2 * kappa
    else:
        # The residual term enters with a plus sign, mirroring the upper
        # score under y -> -y; only then does the conditional mean lose its
        # first-order sensitivity to the fitted quantile and partial moment.
        inner = (c1 * (arm_w * mu + arm_ind * (y - mu))
                 + c2 * (arm_w * (kappa - gamma_q / (1.0 + gamma))
                         + arm_ind * (np.maximum(gamma_q - y, 0.0) - kappa)))
        tail = c1 * (mu - gamma_q) + c2 * kappa
    return lead * inner + curv * tail


# -- estimator entry points --------------------------------------------------


def estimate_tau_continuous(data: Dataset, fit: ContinuousNuisances,
                            delta: float) -> tuple[float, ScoreVector]:
    """Mean counterfactual outcome under the tilted target law."""
    _check_delta(fit, delta)
    scores = continuous_tau_score(data.y, data.a, fit.log_alpha, fit.gamma_reg,
                                  delta)
    return float(scores.mean()), ScoreVector(scores, "tau")


def estimate_xi(data: Dataset, fit: ContinuousNuisances,
                delta: float) -> tuple[float, ScoreVector]:
    """Expected total variation between the natural and tilted laws."""
    _check_delta(fit, delta)
    scores = xi_score(data.a, fit.log_alpha, fit.kappa, delta)
    return float(scores.mean()), ScoreVector(scores, "xi")


def estimate_theta(data: Dataset, fit: ContinuousNuisances,
                   delta: float) -> tuple[float, ScoreVector]:
    """Signed expected Wasserstein-1 shift of the tilt (positive for delta>0)."""
    _check_delta(fit, delta)
    if (data.a < 0).any():
        raise NumericError("theta requires nonnegative treatments")
    scores = theta_score(data.a, fit.log_alpha, fit.beta, delta)
    return float(scores.mean()), ScoreVector(scores, "theta")


def estimate_binary_tau_chi(data: Dataset, fit: BinaryNuisances,
                            delta: float):
    """(tau, chi) for two-point treatments; chi scales the bound width."""
    tau_scores = binary_tau_score(data.y, data.a, fit.pi, fit.mu0, fit.mu1,
                                  delta)
    chi_scores = binary_chi_score(data.a, fit.pi, delta)
    return (float(tau_scores.mean()), float(chi_scores.mean()),
            (ScoreVector(tau_scores, "tau"), ScoreVector(chi_scores, "chi")))


def estimate_zeta(data: Dataset, fit: BinaryNuisances, delta: float,
                  gamma: float, arm: int, side: str) -> tuple[float, ScoreVector]:
    """One of the four arm drift-bound functionals of the odds-ratio model."""
    if fit.gamma is None:
        raise ConfigError("nuisance fit lacks quantile components; refit with gamma")
    if fit.gamma != gamma:
        raise ConfigError(
            f"gamma mismatch: fit at {fit.gamma}, requested {gamma}")
    if arm not in (0, 1) or side not in ("-", "+"):
        raise ConfigError("arm must be 0/1 and side '-' or '+'")
    gq = (fit.gamma_lo if side == "-" else fit.gamma_hi)[arm]
    kap = (fit.kappa_lo if side == "-" else fit.kappa_hi)[arm]
    mu = fit.mu1 if arm == 1 else fit.mu0
    scores = zeta_score(data.y, data.a, fit.pi, mu, gq, kap, delta, gamma,
                        arm, side)
    tag = f"zeta{arm}_{'minus' if side == '-' else 'plus'}"
    return float(scores.mean()), ScoreVector(scores, tag)


def _check_delta(fit: ContinuousNuisances, delta: float) -> None:
    if fit.delta != delta:
        raise ConfigError(f"nuisances fitted at delta={fit.delta}, got {delta}")


# -- bound composition -------------------------------------------------------


@dataclass(frozen=True)
class WidthPart:
    """One side's width functional: estimate, scores, and scale constant."""

    estimate: float
    scores: ScoreVector
    scale: float


@dataclass(frozen=True)
class BoundReport:
    """Estimated bounds with per-endpoint Wald confidence intervals."""

    tau_hat: float
    width_component: float
    lower: float
    upper: float
    se_lower: float
    se_upper: float
    ci_lower: tuple[float, float]
    ci_upper: tuple[float, float]
    crossed: bool
    meta: Mapping = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau_hat": self.tau_hat,
            "width_component": self.width_component,
            "lower": self.lower, "upper": self.upper,
            "se_lower": self.se_lower, "se_upper": self.se_upper,
            "ci_lower": list(self.ci_lower), "ci_upper": list(self.ci_upper),
            "crossed": self.crossed,
            "meta": dict(self.meta),
        }


def _endpoint_se(composed: np.ndarray) -> float:
    var = float(composed.var())
    return 0.0 if var < DEGENERATE_VARIANCE else math.sqrt(var / composed.size)


def compose_bound_report(tau_hat: float, tau_scores: ScoreVector,
                         lower: WidthPart, upper: WidthPart,
                         level: float, meta: Mapping | None = None) -> BoundReport:
    """Assemble endpoints, SEs, and Wald CIs from center and width parts.

    If sampling noise makes the estimated lower endpoint exceed the upper,
    both are clamped to their midpoint and the report is flagged; the
    underlying asymptotics make no claim in that corner.
    """
    if not 0.0 < level < 1.0:
        raise ConfigError("confidence level must lie in (0,1)")
    lo = tau_hat - lower.scale * lower.estimate
    hi = tau_hat + upper.scale * upper.estimate
    crossed = lo > hi
    if crossed:
        lo = hi = 0.5 * (lo + hi)
    z = NormalDist().inv_cdf(0.5 * (1.0 + level))
    lo_scores = tau_scores.values - lower.scale * lower.scores.values
    hi_scores = tau_scores.values + upper.scale * upper.scores.values
    se_lo, se_hi = _endpoint_se(lo_scores), _endpoint_se(hi_scores)
    return BoundReport(
        tau_hat=tau_hat,
        width_component=upper.estimate,
        lower=lo, upper=hi,
        se_lower=se_lo, se_upper=se_hi,
        ci_lower=(lo - z * se_lo, lo + z * se_lo),
        ci_upper=(hi - z * se_hi, hi + z * se_hi),
        crossed=crossed,
        meta=dict(meta or {}),
    )


def _fit_meta(fit) -> dict:
    keep = ("k", "clip_count", "kappa_fallback_count")
    return {key: v for key, v in fit.provenance.items() if key in keep}


_SUPPORTED = (
    "supported (model, policy, kind) combinations: "
    "(bounded|outcome-gap, maximal, binary), "
    "(bounded|outcome-gap, maximal, continuous), "
    "(outcome-gap-holder p=1, monotone, continuous), "
    "(odds-ratio, maximal, binary)"
)


def _rescale_report(report: BoundReport, lo: float, span: float) -> BoundReport:
    """Map a report on the [0,1]-rescaled outcome back to the original scale."""
    def back(v):
        return lo + span * v

    return replace(
        report,
        tau_hat=back(report.tau_hat),
        width_component=span * report.width_component,
        lower=back(report.lower), upper=back(report.upper),
        se_lower=span * report.se_lower, se_upper=span * report.se_upper,
        ci_lower=tuple(back(v) for v in report.ci_lower),
        ci_upper=tuple(back(v) for v in report.ci_upper),
    )


def estimate_bounds(data: Dataset, delta: float, model: SensitivityModel,
                    policy: PolicyKind, folds: int = 5, seed: int = 0,
                    level: float = 0.95,
                    regressor: RegressorSpec | None = None,
                    plan: FoldPlan | None = None) -> BoundReport:
    """Fit nuisances, evaluate the matching scores, and compose the report.

    The bounded-outcome model is routed through the outcome-gap machinery at
    strength 1 after affinely rescaling outcomes to [0,1]; the rescaling
    parameters are recorded in the report metadata and the endpoints are
    mapped back to the original outcome scale.
    """
    spec = regressor or RegressorSpec()
    if plan is None:
        plan = make_folds(data.n, folds, seed)

    if isinstance(model, BoundedOutcome):
        y_lo, y_hi = float(data.y.min()), float(data.y.max())
        span = y_hi - y_lo
        if span == 0.0:
            # constant outcome: zero drift possible, collapse via gap 0
            report = estimate_bounds(data, delta, OutcomeGap(0.0), policy,
                                     folds, seed, level, spec, plan)
            report.meta["model"] = "bounded"
            return report
        scaled = Dataset(data.x, data.a, (data.y - y_lo) / span, data.kind)
        report = estimate_bounds(scaled, delta, OutcomeGap(1.0), policy,
                                 folds, seed, level, spec, plan)
        report = _rescale_report(report, y_lo, span)
        report.meta.update({"model": "bounded", "rescale": [y_lo, y_hi]})
        return report

    meta = {"delta": delta, "policy": policy.value, "kind": data.kind.value,
            "n": data.n, "folds": plan.k, "seed": plan.seed, "level": level,
            "regressor": {"method": spec.method, "k": spec.k,
                          "standardize": spec.standardize}}

    if isinstance(model, OutcomeGap) and policy is PolicyKind.MAXIMAL:
        g = model.gamma
        meta.update({"model": "outcome-gap", "gamma": g})
        if data.kind is TreatmentKind.BINARY:
            fit = fit_binary_nuisances(data, plan, spec)
            tau_hat, chi_hat, (sv_tau, sv_chi) = estimate_binary_tau_chi(
                data, fit, delta)
            scale = g * abs(math.exp(delta) - 1.0)
            part = WidthPart(chi_hat, sv_chi, scale)
            meta.update(_fit_meta(fit))
            return compose_bound_report(tau_hat, sv_tau, part, part, level, meta)
        fit = fit_continuous_nuisances(data, delta, plan, spec)
        tau_hat, sv_tau = estimate_tau_continuous(data, fit, delta)
        xi_hat, sv_xi = estimate_xi(data, fit, delta)
        part = WidthPart(xi_hat, sv_xi, g)
        meta.update(_fit_meta(fit))
        return compose_bound_report(tau_hat, sv_tau, part, part, level, meta)

    if isinstance(model, OutcomeGapHolder) and policy is PolicyKind.MONOTONE:
        if model.p != 1.0:
            raise ConfigError("estimation supports the Holder model at p=1 only")
        if data.kind is not TreatmentKind.CONTINUOUS:
            raise ConfigError(
                "the rank-preserving policy needs a continuous treatment; " + _SUPPORTED)
        meta.update({"model": "outcome-gap-holder", "gamma": model.gamma,
                     "p": model.p})
        fit = fit_continuous_nuisances(data, delta, plan, spec)
        tau_hat, sv_tau = estimate_tau_continuous(data, fit, delta)
        theta_hat, sv_theta = estimate_theta(data, fit, delta)
        sign = 0.0 if delta == 0 else math.copysign(1.0, delta)
        part = WidthPart(theta_hat, sv_theta, model.gamma * sign)
        meta.update(_fit_meta(fit))
        return compose_bound_report(tau_hat, sv_tau, part, part, level, meta)

    if isinstance(model, OddsRatio) and policy is PolicyKind.MAXIMAL:
        if data.kind is not TreatmentKind.BINARY:
            raise ConfigError(
                "odds-ratio estimation covers binary treatments; " + _SUPPORTED)
        g = model.gamma
        meta.update({"model": "odds-ratio", "gamma": g})
        fit = fit_binary_nuisances(data, plan, spec, gamma=g)
        tau_hat, _, (sv_tau, _) = estimate_binary_tau_chi(data, fit, delta)
        ed = math.exp(delta)
        if delta > 0:
            zl, svl = estimate_zeta(data, fit, delta, g, arm=1, side="-")
            zu, svu = estimate_zeta(data, fit, delta, g, arm=1, side="+")
            scale = ed - 1.0
        elif delta < 0:
            zl, svl = estimate_zeta(data, fit, delta, g, arm=0, side="-")
            zu, svu = estimate_zeta(data, fit, delta, g, arm=0, side="+")
            scale = 1.0 - ed
        else:
            zl, svl = estimate_zeta(data, fit, delta, g, arm=1, side="-")
            zu, svu = estimate_zeta(data, fit, delta, g, arm=1, side="+")
            scale = 0.0
        meta.update(_fit_meta(fit))
        return compose_bound_report(tau_hat, sv_tau, WidthPart(zl, svl, scale),
                                    WidthPart(zu, svu, scale), level, meta)

    raise ConfigError(
        f"unsupported combination (model={type(model).__name__}, "
        f"policy={policy.value}, kind={data.kind.value}); " + _SUPPORTED)
