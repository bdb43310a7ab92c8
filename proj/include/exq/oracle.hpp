#pragma once

#include <cstdint>
#include <utility>

#include "exq/fixtures.hpp"

namespace exq {

struct QuantileOracle {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int replications = 0;
  std::uint64_t seed = 0;
};

// Brute-force ground truth: R replications of {draw N environments from f_x,
// one response each from family(true_theta(x)), take the max}; returns the
// empirical p-quantile with a distribution-free 95% order-statistic CI.
QuantileOracle mc_extreme_quantile(const SyntheticProblem& problem,
                                   int replications, std::uint64_t seed);

struct CdfEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Crude Monte Carlo estimate of the marginal short-term CDF G(y).
CdfEstimate mc_marginal_cdf(const SyntheticProblem& problem, double y,
                            std::int64_t n_draws, std::uint64_t seed);

// Draw one environment point from f_x: direct sampling when the density
// supports it, otherwise rejection against the box V.
EnvPoint sample_environment(const EnvModel& env, Rng& rng);

}  // namespace exq
