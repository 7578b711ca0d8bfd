"""Generalized treatment policies, sharp sensitivity bounds, and estimators.

The package is organized around the pipeline:

* :mod:`gpsens.tilt` -- exponential tilts of treatment laws;
* :mod:`gpsens.coupling` -- pure / rank-preserving / maximal couplings, with
  exact total-variation and one-dimensional transport distances;
* :mod:`gpsens.bounds` -- population sharp bounds under four
  unmeasured-confounding sensitivity models;
* :mod:`gpsens.nuisance` / :mod:`gpsens.estimators` -- cross-fit nuisances
  and one-step debiased estimators of the bound functionals with Wald CIs;
* :mod:`gpsens.oracle` -- benchmark designs, quadrature truths, and exact
  brute-force oracles (min-cost transport, extremal-multiplier LP);
* :mod:`gpsens.cli` -- the ``gpsens`` command.
"""

__version__ = "0.1.0"

from .bounds import (BoundedOutcome, ConditionalBound, OddsRatio, OutcomeGap,
                     OutcomeGapHolder, SensitivityModel, SharpMultiplier,
                     bounds_binary, bounds_maximal_tv, bounds_model4_maximal,
                     bounds_monotone_wasserstein, marginal_bound,
                     sharp_multiplier_bounds, t_and_tau)
from .coupling import (CouplingSample, PolicyKind, maximal_policy_draw_binary,
                       maximal_policy_draw_discrete,
                       mismatch_probability_exact, monotone_policy_map,
                       pure_policy_draw, sample_monotone, sample_policy,
                       tv_distance, wasserstein_line)
from .data import (Dataset, FoldPlan, Observation, TreatmentKind, load_csv,
                   make_folds, write_csv)
from .errors import ConfigError, DataError, GpsensError, NumericError
from .estimators import (BoundReport, ScoreVector, WidthPart,
                         compose_bound_report, estimate_binary_tau_chi,
                         estimate_bounds, estimate_tau_continuous,
                         estimate_theta, estimate_xi, estimate_zeta)
from .nuisance import (BinaryNuisances, ContinuousNuisances, NuisanceFit,
                       RegressorSpec, default_neighbor_count,
                       fit_binary_nuisances, fit_continuous_nuisances,
                       fit_mean_regression)
from .oracle import (DgpSpec, TransportInstance, figure_grid,
                     oracle_min_cost_transport, oracle_multiplier_vertex,
                     oracle_sharp_multiplier, quadrature_grid,
                     remainder_decay_probe, simulate, truth_bounds,
                     truth_by_quadrature)
from .rng import RngStream
from .tilt import (DiscreteDist, incremental_propensity, kl_divergence,
                   tilt_discrete, tilt_for_mean, tilt_moments, tilted_mean)

__all__ = [name for name in dir() if not name.startswith("_")]
