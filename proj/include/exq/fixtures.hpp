#pragma once

#include <functional>
#include <string>

#include "exq/env_model.hpp"
#include "exq/extreme.hpp"
#include "exq/family.hpp"

namespace exq {

// Synthetic ground-truth problem: known environment and known theta(x).
struct SyntheticProblem {
  std::string name;
  EnvModel env;
  Family family = Family::weibull;
  std::function<ParamVector(const EnvPoint&)> true_theta;
  ExtremeSpec spec;
};

// Fixture A: 2-D hierarchical metocean-style environment with a Weibull
// response whose parameters drift across the input box. All constants live
// here; reference quantiles are computed by the oracle, never hand-written.
//
//   x1 ~ Weibull(1.5, 3.0) on [0, 15]
//   x2 | x1 ~ Lognormal(0.5 + 0.2 log(1+x1), 0.15 + 0.05/(1+x1)) on [0, 8]
//   c = 1e-5
//   theta(x) = (1.5 + 0.3 z1, 2 + 0.5 z1^2 + 0.3 z2), z = x standardized to V
//   target: p = 0.5 of the maximum over N = 1000 periods
SyntheticProblem fixture_a();

// Fixture B: 1-D environment, exponential response. Small theta dimension
// keeps the acquisition cross-checks cheap.
//
//   x ~ Weibull(2.0, 3.0) on [0, 12], c = 1e-6
//   theta(x) = 0.5 + 2 (x/12)^2   (exponential scale)
//   target: p = 0.5 of the maximum over N = 1000 periods
SyntheticProblem fixture_b();

SyntheticProblem fixture_by_name(const std::string& name);

// Environment-only builders (for configs that pair a fixture environment
// with an external simulator).
EnvModel fixture_a_env();
EnvModel fixture_b_env();

}  // namespace exq
