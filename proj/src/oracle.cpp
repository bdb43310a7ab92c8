#include "exq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace exq {

EnvPoint sample_environment(const EnvModel& env, Rng& rng) {
  if (env.density->can_sample()) return env.density->sample(rng);
  // rejection against the enclosing box
  double fmax = 0.0;
  const int probes = 4096;
  EnvPoint x(env.dim());
  for (int n = 0; n < probes; ++n) {
    for (int i = 0; i < env.dim(); ++i)
      x[i] = env.bounds.lo[i] +
             (env.bounds.hi[i] - env.bounds.lo[i]) *
                 ((n * 2654435761u % probes) + 0.5) / probes;
    fmax = std::max(fmax, (*env.density)(x));
  }
  fmax *= 1.5;
  for (long attempts = 1; attempts <= 100000; ++attempts) {
    for (int i = 0; i < env.dim(); ++i)
      x[i] = rng.uniform(env.bounds.lo[i], env.bounds.hi[i]);
    if (rng.uniform() * fmax <= (*env.density)(x)) return x;
  }
  throw InputError("rejection sampler acceptance below 1e-4");
}

QuantileOracle mc_extreme_quantile(const SyntheticProblem& problem,
                                   int replications, std::uint64_t seed) {
  if (replications < 100)
    throw InputError("mc_extreme_quantile: need at least 100 replications");
  const auto n = problem.spec.n_periods;
  std::vector<double> maxima(replications);
  for (int rep = 0; rep < replications; ++rep) {
    Rng rng(derive_seed(seed, 0x04AC1E, rep));
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < n; ++i) {
      EnvPoint x = sample_environment(problem.env, rng);
      const double y = sample(problem.family, problem.true_theta(x), rng);
      best = std::max(best, y);
    }
    maxima[rep] = best;
  }
  std::sort(maxima.begin(), maxima.end());

  const double p = problem.spec.p;
  const double R = replications;
  QuantileOracle out;
  out.replications = replications;
  out.seed = seed;
  auto at = [&](long k) {
    k = std::clamp<long>(k, 1, replications);
    return maxima[static_cast<std::size_t>(k - 1)];
  };
  const long kq = static_cast<long>(std::ceil(p * R));
  out.value = at(kq);
  // distribution-free order-statistic interval via the binomial normal bound
  const double half = 1.959963984540054 * std::sqrt(R * p * (1.0 - p));
  out.ci_low = at(static_cast<long>(std::floor(R * p - half)));
  out.ci_high = at(static_cast<long>(std::ceil(R * p + half)) + 1);
  return out;
}

CdfEstimate mc_marginal_cdf(const SyntheticProblem& problem, double y,
                            std::int64_t n_draws, std::uint64_t seed) {
  if (n_draws < 1000) throw InputError("mc_marginal_cdf: need n_draws >= 1000");
  Rng rng(derive_seed(seed, 0xCDF0));
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < n_draws; ++i) {
    EnvPoint x = sample_environment(problem.env, rng);
    const double v = sample(problem.family, problem.true_theta(x), rng);
    if (v <= y) ++hits;
  }
  CdfEstimate est;
  est.value = static_cast<double>(hits) / static_cast<double>(n_draws);
  est.std_error =
      std::sqrt(std::max(est.value * (1.0 - est.value), 1e-12) /
                static_cast<double>(n_draws));
  return est;
}

}  // namespace exq
