import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsens import (DiscreteDist, NumericError, PolicyKind, RngStream,
                    maximal_policy_draw_binary, maximal_policy_draw_discrete,
                    mismatch_probability_exact, monotone_policy_map,
                    pure_policy_draw, sample_monotone, sample_policy,
                    tilt_discrete, tv_distance, wasserstein_line)

from conftest import rational_pair

BERN5 = DiscreteDist((0.0, 1.0), (0.5, 0.5))
BERN8 = DiscreteDist((0.0, 1.0), (0.2, 0.8))


def test_pure_policy_draw_quantiles():
    assert pure_policy_draw(BERN8, 0.1) == 0.0
    assert pure_policy_draw(BERN8, 0.95) == 1.0
    assert pure_policy_draw(DiscreteDist.uniform((1.0, 2.0, 3.0)), 0.5) == 2.0
    out = pure_policy_draw(BERN8, np.array([0.1, 0.2, 0.3, 0.95]))
    # F(0) = 0.2 >= 0.2, so the generalized inverse at 0.2 is still 0
    assert out.tolist() == [0.0, 0.0, 1.0, 1.0]


def test_monotone_policy_map():
    # base Unif(0,1), target Unif(0,2)
    assert monotone_policy_map(lambda a: a, lambda u: 2 * u, 0.3) == pytest.approx(0.6)
    assert monotone_policy_map(lambda a: a, lambda u: u, 0.42) == 0.42
    assert monotone_policy_map(lambda a: a, lambda u: 2 * u, 0.0) == 0.0


def test_monotone_policy_map_is_nondecreasing():
    grid = np.linspace(0.0, 1.0, 101)
    out = monotone_policy_map(lambda a: a ** 2, lambda u: np.sqrt(u) * 3.0, grid)
    assert (np.diff(out) >= 0).all()


def test_maximal_binary_case_split():
    # q > pi: controls promoted when v > (1-q)/(1-pi) = 0.4
    assert maximal_policy_draw_binary(0.5, 0.8, 0.0, 0.39) == 0.0
    assert maximal_policy_draw_binary(0.5, 0.8, 0.0, 0.41) == 1.0
    # treated never switch when q > pi
    for v in (0.01, 0.5, 0.99):
        assert maximal_policy_draw_binary(0.5, 0.8, 1.0, v) == 1.0
    # q = pi keeps the natural value
    assert maximal_policy_draw_binary(0.3, 0.3, 1.0, 0.999) == 1.0
    # q < pi: treated kept iff v <= q/pi
    assert maximal_policy_draw_binary(0.8, 0.4, 1.0, 0.49) == 1.0
    assert maximal_policy_draw_binary(0.8, 0.4, 1.0, 0.51) == 0.0
    with pytest.raises(NumericError, match="positivity"):
        maximal_policy_draw_binary(0.0, 0.5, 0.0, 0.5)


def test_maximal_discrete_examples():
    uni = DiscreteDist.uniform((0.0, 1.0, 2.0))
    tilted = tilt_discrete(uni, math.log(2.0))
    # q(2) = 4/7 > pi(2) = 1/3: keep probability one
    for v1 in (0.001, 0.999):
        assert maximal_policy_draw_discrete(uni, tilted, 2.0, v1, 0.5) == 2.0
    # identical laws always keep
    assert maximal_policy_draw_discrete(uni, uni, 1.0, 0.9999, 0.2) == 1.0
    # Bern(.5) -> Bern(.8): from a=0 keep-prob 0.4, residual point mass at 1
    assert maximal_policy_draw_discrete(BERN5, BERN8, 0.0, 0.39, 0.7) == 0.0
    assert maximal_policy_draw_discrete(BERN5, BERN8, 0.0, 0.41, 0.7) == 1.0


def test_maximal_discrete_rejects_bad_support():
    q = DiscreteDist((0.0, 1.0, 2.0), (0.2, 0.3, 0.5))
    with pytest.raises(NumericError, match="no mass|none"):
        maximal_policy_draw_discrete(BERN5, q, 0.0, 0.5, 0.5)


def test_tv_and_wasserstein_examples():
    assert tv_distance(BERN5, BERN8) == pytest.approx(0.3, abs=1e-15)
    assert tv_distance(BERN5, BERN5) == 0.0
    assert tv_distance(DiscreteDist.point(0.0), DiscreteDist.point(1.0)) == 1.0
    assert wasserstein_line(DiscreteDist.point(0.0),
                            DiscreteDist.point(2.5)) == 2.5
    assert wasserstein_line(BERN5, BERN8) == pytest.approx(0.3, abs=1e-15)
    assert wasserstein_line(BERN8, BERN8, cost=lambda u: u ** 2) == 0.0


def test_mismatch_probability_examples():
    assert mismatch_probability_exact(BERN5, BERN8, PolicyKind.MAXIMAL) == \
        pytest.approx(0.3, abs=1e-15)
    assert mismatch_probability_exact(BERN5, BERN8, PolicyKind.PURE) == \
        pytest.approx(0.5, abs=1e-15)
    assert mismatch_probability_exact(BERN8, BERN8, PolicyKind.MAXIMAL) == 0.0
    with pytest.raises(NumericError):
        mismatch_probability_exact(BERN5, BERN8, PolicyKind.MONOTONE)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_maximal_beats_pure_mismatch(seed):
    rng = np.random.default_rng(seed)
    pi, q = rational_pair(rng)
    mm_max = mismatch_probability_exact(pi, q, PolicyKind.MAXIMAL)
    mm_pure = mismatch_probability_exact(pi, q, PolicyKind.PURE)
    assert mm_max <= mm_pure
    # strict on non-degenerate overlapping laws with a shared atom below 1
    if max(pi.mass) < 1 and max(q.mass) < 1:
        assert mm_max < mm_pure


def test_binary_maximal_equality_iff_degenerate():
    # |q - pi| == pi(1-q) + (1-pi)q only on degenerate propensities
    one = DiscreteDist.point(1.0)
    q = DiscreteDist((0.0, 1.0), (0.0, 1.0))
    assert mismatch_probability_exact(one, q, PolicyKind.MAXIMAL) == \
        mismatch_probability_exact(one, q, PolicyKind.PURE)


def test_sampler_marginals_smoke():
    # modest draw count here; the full-scale law check lives in acceptance
    uni = DiscreteDist.uniform((0.0, 1.0, 2.0))
    tilted = tilt_discrete(uni, math.log(2.0))
    a, d = sample_policy(PolicyKind.MAXIMAL, uni, tilted, RngStream(7), 20000)
    freq = np.array([(d == s).mean() for s in tilted.support])
    assert np.abs(freq - np.asarray(tilted.mass, dtype=float)).max() < 0.02
    mismatch = (a != d).mean()
    assert abs(mismatch - float(tv_distance(uni, tilted))) < 0.02


def test_sampler_reproducible():
    uni = DiscreteDist.uniform((0.0, 1.0, 2.0))
    tilted = tilt_discrete(uni, 0.4)
    a1, d1 = sample_policy(PolicyKind.PURE, uni, tilted, RngStream(3, 5), 100)
    a2, d2 = sample_policy(PolicyKind.PURE, uni, tilted, RngStream(3, 5), 100)
    assert (a1 == a2).all() and (d1 == d2).all()
    a3, _ = sample_policy(PolicyKind.PURE, uni, tilted, RngStream(3, 6), 100)
    assert not (a1 == a3).all()


def test_sample_monotone_pushforward():
    a, d = sample_monotone(lambda u: u, lambda a: a, lambda u: 2 * u,
                           RngStream(11), 5000)
    assert np.allclose(d, 2 * a)


def test_exact_arithmetic_pass_through():
    p = DiscreteDist((0, 1), (Fraction(1, 2), Fraction(1, 2)))
    q = DiscreteDist((0, 1), (Fraction(1, 5), Fraction(4, 5)))
    assert tv_distance(p, q) == Fraction(3, 10)
    assert wasserstein_line(p, q) == Fraction(3, 10)
    assert mismatch_probability_exact(p, q, PolicyKind.PURE) == Fraction(1, 2)
