import math

import numpy as np
import pytest

from gpsens import (BoundedOutcome, ConfigError, Dataset, DgpSpec,
                    OddsRatio, OutcomeGap, OutcomeGapHolder, PolicyKind,
                    RegressorSpec, ScoreVector, TreatmentKind, WidthPart,
                    compose_bound_report, estimate_binary_tau_chi,
                    estimate_bounds, estimate_tau_continuous, estimate_theta,
                    estimate_xi, estimate_zeta, fit_binary_nuisances,
                    fit_continuous_nuisances, make_folds, simulate,
                    truth_by_quadrature)
from gpsens.estimators import binary_chi_score, binary_tau_score

LN2 = math.log(2.0)


def _fit_cont(data, delta, folds=5, seed=3, k=None):
    plan = make_folds(data.n, folds, seed)
    spec = RegressorSpec(k=k) if k else RegressorSpec()
    return fit_continuous_nuisances(data, delta, plan, spec)


@pytest.fixture(scope="module")
def twopoint():
    # A ~ Bernoulli(1/2) independent of X; arm outcome laws are discrete
    data = simulate(DgpSpec("binary-custom", n=20000, seed=5))
    return data.with_kind(TreatmentKind.CONTINUOUS)


def test_tau_continuous_constant_outcome():
    rng = np.random.default_rng(0)
    data = Dataset(rng.uniform(0, 1, (300, 1)),
                   rng.integers(0, 2, 300).astype(float), np.full(300, 2.5),
                   TreatmentKind.CONTINUOUS)
    fit = _fit_cont(data, 0.8, folds=3)
    tau, sv = estimate_tau_continuous(data, fit, 0.8)
    assert tau == pytest.approx(2.5, abs=1e-12)
    assert np.allclose(sv.values, 2.5, atol=1e-12)


def test_tau_continuous_delta_zero_is_sample_mean():
    data = simulate(DgpSpec("continuous-custom", n=1500, seed=8))
    fit = _fit_cont(data, 0.0, folds=3)
    tau, _ = estimate_tau_continuous(data, fit, 0.0)
    assert tau == pytest.approx(data.y.mean(), abs=1e-12)


def test_tau_continuous_consistency_twopoint(twopoint):
    fit = _fit_cont(twopoint, LN2)
    tau, sv = estimate_tau_continuous(twopoint, fit, LN2)
    truth = truth_by_quadrature(DgpSpec("binary-custom", n=1, seed=0), "tau", LN2)
    se = sv.values.std() / math.sqrt(len(sv))
    assert abs(tau - truth) < 3 * se


def test_xi_delta_zero_exact(twopoint):
    fit = _fit_cont(twopoint, 0.0)
    xi, sv = estimate_xi(twopoint, fit, 0.0)
    assert xi == 0.0 and (sv.values == 0.0).all()


def test_xi_degenerate_treatment_exact_zero():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, (80, 1))
    a = np.r_[np.full(79, 2.0), 2.00001]  # effectively constant treatment
    data = Dataset(x, a, rng.normal(size=80), TreatmentKind.CONTINUOUS)
    fit = _fit_cont(data, 1.0, folds=2, k=5)
    xi, _ = estimate_xi(data, fit, 1.0)
    assert abs(xi) < 1e-6


def test_xi_consistency_twopoint(twopoint):
    fit = _fit_cont(twopoint, LN2)
    xi, sv = estimate_xi(twopoint, fit, LN2)
    se = sv.values.std() / math.sqrt(len(sv))
    assert abs(xi - 1 / 6) < 3 * se  # exact two-point value at this tilt


def test_theta_delta_zero_exact(twopoint):
    fit = _fit_cont(twopoint, 0.0)
    th, sv = estimate_theta(twopoint, fit, 0.0)
    assert th == 0.0 and (sv.values == 0.0).all()


def test_theta_consistency_twopoint(twopoint):
    fit = _fit_cont(twopoint, LN2)
    th, sv = estimate_theta(twopoint, fit, LN2)
    se = sv.values.std() / math.sqrt(len(sv))
    assert abs(th - 1 / 6) < 3 * se  # tilted mean 2/3 minus natural mean 1/2


def test_theta_rejects_negative_treatments():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, (50, 1))
    a = rng.choice([-1.0, 1.0], 50)
    data = Dataset(x, a, rng.normal(size=50), TreatmentKind.CONTINUOUS)
    fit = _fit_cont(data, 0.5, folds=2, k=5)
    from gpsens import NumericError
    with pytest.raises(NumericError):
        estimate_theta(data, fit, 0.5)


def test_delta_mismatch_rejected(twopoint):
    fit = _fit_cont(twopoint, 0.5)
    with pytest.raises(ConfigError):
        estimate_tau_continuous(twopoint, fit, 0.6)


def test_binary_degenerate_arm_scores():
    # oracle-fed pi = 0 with an all-control sample: tau score collapses to
    # the control-arm mean functional and the chi score vanishes
    n = 50
    y = np.linspace(-1, 1, n)
    a = np.zeros(n)
    pi = np.zeros(n)
    mu0 = np.full(n, y.mean())
    mu1 = np.zeros(n)
    tau_scores = binary_tau_score(y, a, pi, mu0, mu1, 0.7)
    phi0 = y - y.mean() + y.mean()
    assert np.allclose(tau_scores, phi0, atol=1e-12)
    assert np.allclose(binary_chi_score(a, pi, 0.7), 0.0, atol=1e-15)


def test_binary_tau_chi_consistency(motivating20k, plan20k):
    fit = fit_binary_nuisances(motivating20k, plan20k, RegressorSpec())
    dgp = DgpSpec("motivating", n=1, seed=0)
    for delta in (-1.0, 0.5, 1.0):
        tau, chi, (sv_t, sv_c) = estimate_binary_tau_chi(motivating20k, fit,
                                                         delta)
        for est, sv, tag in ((tau, sv_t, "tau"), (chi, sv_c, "chi")):
            truth = truth_by_quadrature(dgp, tag, delta)
            se = sv.values.std() / math.sqrt(len(sv))
            assert abs(est - truth) < 3 * se, (tag, delta)


def test_score_centering_everywhere(motivating20k, plan20k):
    fit = fit_binary_nuisances(motivating20k, plan20k, RegressorSpec())
    tau, chi, (sv_t, sv_c) = estimate_binary_tau_chi(motivating20k, fit, 0.5)
    assert abs((sv_t.values - tau).mean()) < 1e-12
    assert abs((sv_c.values - chi).mean()) < 1e-12


def test_zeta_gamma_one_identically_zero(motivating20k, plan20k):
    fit = fit_binary_nuisances(motivating20k, plan20k, RegressorSpec(),
                               gamma=1.0)
    for arm in (0, 1):
        for side in ("-", "+"):
            z, sv = estimate_zeta(motivating20k, fit, 1.0, 1.0, arm, side)
            assert z == 0.0 and (sv.values == 0.0).all()


def test_zeta_constant_outcome_structure():
    rng = np.random.default_rng(4)
    n = 400
    x = rng.uniform(0, 1, (n, 1))
    a = (rng.uniform(0, 1, n) < 0.5).astype(float)
    data = Dataset(x, a, np.full(n, 3.0), TreatmentKind.BINARY)
    fit = fit_binary_nuisances(data, make_folds(n, 4, seed=2), RegressorSpec(),
                               gamma=2.0)
    z, sv = estimate_zeta(data, fit, 1.0, 2.0, arm=1, side="+")
    # gamma-hat = mu-hat = c and kappa-hat = 0: the drift bound vanishes
    assert z == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(sv.values, 0.0, atol=1e-12)


def test_zeta_consistency_spec_example():
    # pi = 1/2, arm-1 law Unif{1,2,3,4}, gamma = 3, delta = 1
    data = simulate(DgpSpec("binary-custom", n=20000, seed=5))
    fit = fit_binary_nuisances(data, make_folds(data.n, 5, seed=3),
                               RegressorSpec(), gamma=3.0)
    z, sv = estimate_zeta(data, fit, 1.0, 3.0, arm=1, side="+")
    truth = truth_by_quadrature(DgpSpec("binary-custom", n=1, seed=0),
                                "zeta1_plus", 1.0, gamma=3.0)
    se = sv.values.std() / math.sqrt(len(sv))
    assert abs(z - truth) < 3 * se
    assert truth == pytest.approx(0.5 / (math.e + 1), abs=1e-12)


def test_zeta_all_sides_consistency_gaussian():
    data = simulate(DgpSpec("motivating", n=20000, seed=1))
    fit = fit_binary_nuisances(data, make_folds(data.n, 5, seed=101),
                               RegressorSpec(), gamma=3.0)
    dgp = DgpSpec("motivating", n=1, seed=0)
    for arm in (0, 1):
        for side, tag in (("-", "minus"), ("+", "plus")):
            z, sv = estimate_zeta(data, fit, 1.0, 3.0, arm, side)
            truth = truth_by_quadrature(dgp, f"zeta{arm}_{tag}", 1.0, gamma=3.0)
            se = sv.values.std() / math.sqrt(len(sv))
            assert abs(z - truth) < 3 * se, (arm, side)


def test_zeta_gamma_mismatch_rejected(motivating20k, plan20k):
    fit = fit_binary_nuisances(motivating20k, plan20k, RegressorSpec(),
                               gamma=2.0)
    with pytest.raises(ConfigError, match="mismatch"):
        estimate_zeta(motivating20k, fit, 1.0, 3.0, 1, "+")
    bare = fit_binary_nuisances(motivating20k, plan20k, RegressorSpec())
    with pytest.raises(ConfigError, match="quantile"):
        estimate_zeta(motivating20k, bare, 1.0, 2.0, 1, "+")


def test_compose_delta_zero_binary_collapse():
    data = simulate(DgpSpec("motivating", n=2000, seed=13))
    r = estimate_bounds(data, 0.0, OutcomeGap(2.0), PolicyKind.MAXIMAL,
                        folds=4, seed=1)
    assert r.lower == r.upper == r.tau_hat
    assert r.ci_lower[0] <= r.tau_hat <= r.ci_lower[1]
    assert r.se_lower == r.se_upper > 0


def test_compose_gamma_zero_collapse():
    data = simulate(DgpSpec("motivating", n=2000, seed=13))
    r = estimate_bounds(data, 1.0, OutcomeGap(0.0), PolicyKind.MAXIMAL,
                        folds=4, seed=1)
    assert r.lower == r.upper == r.tau_hat


def test_compose_width_monotone_in_gamma():
    data = simulate(DgpSpec("motivating", n=3000, seed=14))
    widths = []
    for g in (0.5, 1.0, 2.0, 4.0):
        r = estimate_bounds(data, 1.0, OutcomeGap(g), PolicyKind.MAXIMAL,
                            folds=4, seed=1)
        widths.append(r.upper - r.lower)
    assert widths == sorted(widths)


def test_compose_degenerate_variance_reports_zero_se():
    n = 500
    rng = np.random.default_rng(15)
    x = rng.uniform(0, 1, (n, 1))
    a = (rng.uniform(0, 1, n) < 0.5).astype(float)
    data = Dataset(x, a, np.full(n, 1.25), TreatmentKind.BINARY)
    r = estimate_bounds(data, 0.0, OutcomeGap(1.0), PolicyKind.MAXIMAL,
                        folds=4, seed=0)
    assert r.tau_hat == pytest.approx(1.25, abs=1e-12)
    assert r.se_lower == 0.0 and r.ci_lower == (r.lower, r.lower)


def test_compose_crossed_bounds_clamped():
    scores = ScoreVector(np.array([0.0, 0.0, 0.0]), "w")
    tau_scores = ScoreVector(np.array([1.0, 1.0, 1.0]), "tau")
    r = compose_bound_report(1.0, tau_scores,
                             WidthPart(-0.2, scores, 1.0),
                             WidthPart(-0.2, scores, 1.0), 0.95)
    assert r.crossed and r.lower == r.upper == pytest.approx(1.0)


def test_compose_level_validated():
    scores = ScoreVector(np.zeros(3), "w")
    with pytest.raises(ConfigError):
        compose_bound_report(0.0, scores, WidthPart(0.0, scores, 1.0),
                             WidthPart(0.0, scores, 1.0), 1.5)


def test_estimate_bounds_unsupported_combo_lists_table():
    data = simulate(DgpSpec("motivating", n=200, seed=16))
    with pytest.raises(ConfigError, match="supported"):
        estimate_bounds(data, 1.0, OutcomeGap(1.0), PolicyKind.PURE)
    with pytest.raises(ConfigError, match="supported|binary"):
        estimate_bounds(data, 1.0, OutcomeGapHolder(1.0), PolicyKind.MONOTONE)
    with pytest.raises(ConfigError, match="p=1"):
        cont = simulate(DgpSpec("continuous-custom", n=200, seed=16))
        estimate_bounds(cont, 1.0, OutcomeGapHolder(1.0, p=2.0),
                        PolicyKind.MONOTONE)


def test_estimate_bounds_model3_sign_flip():
    data = simulate(DgpSpec("continuous-custom", n=4000, seed=17))
    r_pos = estimate_bounds(data, 1.0, OutcomeGapHolder(2.0), PolicyKind.MONOTONE,
                            folds=4, seed=2)
    r_neg = estimate_bounds(data, -1.0, OutcomeGapHolder(2.0), PolicyKind.MONOTONE,
                            folds=4, seed=2)
    assert r_pos.lower < r_pos.upper and r_neg.lower < r_neg.upper


def test_estimate_bounds_bounded_model_rescales():
    data = simulate(DgpSpec("motivating", n=3000, seed=18))
    r = estimate_bounds(data, 1.0, BoundedOutcome(), PolicyKind.MAXIMAL,
                        folds=4, seed=2)
    lo, hi = r.meta["rescale"]
    assert lo == data.y.min() and hi == data.y.max()
    gap = estimate_bounds(data, 1.0, OutcomeGap(hi - lo), PolicyKind.MAXIMAL,
                          folds=4, seed=2)
    # routing through the rescaled outcome equals running the gap model at
    # strength equal to the observed range
    assert r.lower == pytest.approx(gap.lower, abs=1e-10)
    assert r.upper == pytest.approx(gap.upper, abs=1e-10)
    assert r.se_upper == pytest.approx(gap.se_upper, abs=1e-12)


def test_estimate_bounds_report_matches_truth(motivating20k):
    from gpsens import truth_bounds
    r = estimate_bounds(motivating20k, 1.0, OutcomeGap(2.0), PolicyKind.MAXIMAL,
                        folds=5, seed=3)
    dgp = DgpSpec("motivating", n=1, seed=0)
    lo, hi, tau = truth_bounds(dgp, "outcome-gap", PolicyKind.MAXIMAL, 1.0, 2.0)
    assert abs(r.lower - lo) < 3 * r.se_lower
    assert abs(r.upper - hi) < 3 * r.se_upper


def test_estimate_bounds_model4_composition():
    data = simulate(DgpSpec("motivating", n=4000, seed=19))
    r = estimate_bounds(data, 1.0, OddsRatio(2.0), PolicyKind.MAXIMAL,
                        folds=4, seed=2)
    assert r.lower <= r.tau_hat <= r.upper
    r0 = estimate_bounds(data, 0.0, OddsRatio(2.0), PolicyKind.MAXIMAL,
                         folds=4, seed=2)
    assert r0.lower == r0.upper == r0.tau_hat
