#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "exq/env_model.hpp"
#include "exq/family.hpp"
#include "exq/gp.hpp"
#include "exq/ut.hpp"

namespace exq {

// N-year extreme target: the p-quantile of the maximum of N i.i.d.
// short-term responses.
struct ExtremeSpec {
  double n_years = 1.0;
  double t_s_hours = 1.0;
  double p = 0.5;
  std::int64_t n_periods = 1;

  static ExtremeSpec make(double n_years, double t_s_hours, double p);
};

std::int64_t compute_n_periods(double n_years, double t_s_hours);

// (sum_m w_m G(y|theta_m))^N, evaluated as exp(N log1p(-sum w_m SF)) so the
// exponent does not destroy the tail.
double mixture_extreme_cdf(Family family, double y,
                           const Eigen::MatrixXd& thetas,
                           const Eigen::VectorXd& weights,
                           std::int64_t n_periods);

// Solve mixture_extreme_cdf(y) = p in exceedance space: the root of
// sum_m w_m SF(y|theta_m) = eps*, eps* = -expm1(log(p)/N).
double invert_extreme_quantile(Family family, double p,
                               const Eigen::MatrixXd& thetas,
                               const Eigen::VectorXd& weights,
                               std::int64_t n_periods);

struct QoIEstimate {
  Eigen::VectorXd z_per_sigma;  // r quantile samples
  double mean = 0.0;            // UT mean
  double variance = 0.0;        // H_k
  double clamp_fraction = 0.0;  // share of theta components clamped to domain
};

// Core uncertainty propagation given per-point posterior means and standard
// deviations (rows: importance points, cols: theta components). The same
// sigma point u_q is shared across all points: the fully correlated
// finite-dimensional realization.
QoIEstimate estimate_qoi(Family family, const Eigen::MatrixXd& mu,
                         const Eigen::MatrixXd& sd,
                         const Eigen::VectorXd& weights,
                         const SigmaPointSet& sp, const ExtremeSpec& spec);

QoIEstimate compute_H_k(const GPosterior& gp, const ImportanceSample& is,
                        const SigmaPointSet& sp, const ExtremeSpec& spec);

// Same, reusing a precomputed batch posterior over the importance points.
QoIEstimate compute_H_k(Family family, const BatchPosterior& batch,
                        const Eigen::VectorXd& weights, const SigmaPointSet& sp,
                        const ExtremeSpec& spec);

}  // namespace exq
