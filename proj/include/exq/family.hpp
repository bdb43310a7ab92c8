#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>

#include "exq/errors.hpp"
#include "exq/rng.hpp"

namespace exq {

// Parametric families for the short-term response Y|x.
//   weibull:     theta = (shape alpha, scale beta), support y >= 0
//   gumbel:      theta = (location mu, scale beta), support all reals
//   exponential: theta = (scale beta), support y >= 0
enum class Family { exponential, weibull, gumbel };

Family family_from_string(const std::string& name);
std::string family_to_string(Family f);

int param_dim(Family f);

using ParamVector = Eigen::VectorXd;

bool in_domain(Family f, const ParamVector& theta);

// Clamp positivity-constrained components up to `floor` (location parameters
// are unconstrained). Sets *clamped_components to the number touched.
ParamVector clamp_to_domain(Family f, const ParamVector& theta,
                            double floor = 1e-6,
                            int* clamped_components = nullptr);

double cdf(Family f, const ParamVector& theta, double y);

// 1 - cdf, computed without cancellation in the tail.
double survival(Family f, const ParamVector& theta, double y);

double quantile(Family f, const ParamVector& theta, double p);

// Inverse survival function: the y with survival(y) = eps.
double inverse_survival(Family f, const ParamVector& theta, double eps);

double log_density(Family f, const ParamVector& theta, double y);

// Inverse-CDF sampling; deterministic given the generator state.
double sample(Family f, const ParamVector& theta, Rng& rng);

struct MleResult {
  ParamVector theta;       // MLE
  Eigen::MatrixXd sigma;   // inverse observed information at the MLE
  int iterations = 0;
};

// Maximum-likelihood fit with covariance from the observed information
// (negative log-likelihood Hessian at the MLE, central finite differences).
MleResult mle_fit(Family f, std::span<const double> samples);

// Exposed for the finite-difference cross-checks in tests.
double log_likelihood(Family f, const ParamVector& theta,
                      std::span<const double> samples);

}  // namespace exq
