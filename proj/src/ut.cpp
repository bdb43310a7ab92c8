#include "exq/ut.hpp"

#include <cmath>

namespace exq {

SigmaPointSet sigma_points(int d, double kappa) {
  if (d < 1) throw InputError("sigma_points: d must be >= 1");
  if (!(d + kappa > 0.0)) throw InputError("sigma_points: need d + kappa > 0");
  const int r = 2 * d + 1;
  SigmaPointSet sp;
  sp.kappa = kappa;
  sp.points = Eigen::MatrixXd::Zero(r, d);
  sp.weights = Eigen::VectorXd::Zero(r);
  const double s = std::sqrt(d + kappa);
  sp.weights[0] = kappa / (d + kappa);
  for (int i = 0; i < d; ++i) {
    sp.points(1 + 2 * i, i) = s;
    sp.points(2 + 2 * i, i) = -s;
    sp.weights[1 + 2 * i] = 0.5 / (d + kappa);
    sp.weights[2 + 2 * i] = 0.5 / (d + kappa);
  }
  return sp;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> ut_moments(
    const Eigen::MatrixXd& values, const Eigen::VectorXd& weights) {
  if (values.rows() != weights.size())
    throw InputError("ut_moments: values/weights length mismatch");
  Eigen::VectorXd mean = values.transpose() * weights;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(values.cols(), values.cols());
  for (int q = 0; q < values.rows(); ++q) {
    Eigen::VectorXd d = values.row(q).transpose() - mean;
    cov += weights[q] * d * d.transpose();
  }
  return {mean, cov};
}

std::pair<double, double> ut_moments(const Eigen::VectorXd& values,
                                     const Eigen::VectorXd& weights) {
  if (values.size() != weights.size())
    throw InputError("ut_moments: values/weights length mismatch");
  double mean = 0.0;
  for (int q = 0; q < values.size(); ++q) mean += weights[q] * values[q];
  double var = 0.0;
  for (int q = 0; q < values.size(); ++q)
    var += weights[q] * (values[q] - mean) * (values[q] - mean);
  return {mean, var};
}

}  // namespace exq
