#pragma once

#include <Eigen/Dense>
#include <utility>

#include "exq/errors.hpp"

namespace exq {

// Julier symmetric sigma-point set for a d-dimensional standard normal:
// r = 2d + 1 points matching the first two moments exactly.
struct SigmaPointSet {
  Eigen::MatrixXd points;   // r x d
  Eigen::VectorXd weights;  // sums to 1
  double kappa = 0.0;

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Default kappa policy: matches fourth moments for d <= 3, never produces a
// negative center weight.
inline double default_kappa(int d) { return std::max(3.0 - d, 0.0); }

SigmaPointSet sigma_points(int d, double kappa);

inline SigmaPointSet sigma_points(int d) { return sigma_points(d, default_kappa(d)); }

// Weighted empirical moments of transformed sigma points (rows of values).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> ut_moments(
    const Eigen::MatrixXd& values, const Eigen::VectorXd& weights);

// Scalar convenience.
std::pair<double, double> ut_moments(const Eigen::VectorXd& values,
                                     const Eigen::VectorXd& weights);

}  // namespace exq
