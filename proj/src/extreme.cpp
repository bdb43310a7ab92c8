#include "exq/extreme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace exq {

std::int64_t compute_n_periods(double n_years, double t_s_hours) {
  if (!(n_years > 0.0) || !(t_s_hours > 0.0))
    throw InputError("compute_n_periods: inputs must be positive");
  const double n = std::ceil(n_years * 365.25 * 24.0 / t_s_hours);
  if (n > 9.0e15)  // 2^53
    throw InputError("compute_n_periods: period count overflows double precision");
  return static_cast<std::int64_t>(n);
}

ExtremeSpec ExtremeSpec::make(double n_years, double t_s_hours, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("extreme spec: p must be in (0,1)");
  ExtremeSpec s;
  s.n_years = n_years;
  s.t_s_hours = t_s_hours;
  s.p = p;
  s.n_periods = compute_n_periods(n_years, t_s_hours);
  return s;
}

namespace {

// sum_m w_m SF(y | theta_m), fixed summation order for determinism
double mixture_survival(Family family, double y, const Eigen::MatrixXd& thetas,
                        const Eigen::VectorXd& weights) {
  double s = 0.0;
  for (int m = 0; m < thetas.rows(); ++m)
    s += weights[m] * survival(family, thetas.row(m).transpose(), y);
  return s;
}

}  // namespace

double mixture_extreme_cdf(Family family, double y,
                           const Eigen::MatrixXd& thetas,
                           const Eigen::VectorXd& weights,
                           std::int64_t n_periods) {
  const double s = mixture_survival(family, y, thetas, weights);
  if (s >= 1.0) return 0.0;
  return std::exp(static_cast<double>(n_periods) * std::log1p(-s));
}

double invert_extreme_quantile(Family family, double p,
                               const Eigen::MatrixXd& thetas,
                               const Eigen::VectorXd& weights,
                               std::int64_t n_periods) {
  if (!(p > 0.0 && p < 1.0))
    throw InputError("invert_extreme_quantile: p must be in (0,1)");
  const double eps = -std::expm1(std::log(p) / static_cast<double>(n_periods));

  // bracket from per-component exceedance quantiles
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < thetas.rows(); ++m) {
    const double q = inverse_survival(family, thetas.row(m).transpose(), eps);
    if (!std::isfinite(q))
      throw InversionError("invert_extreme_quantile: nonfinite component quantile");
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  if (lo == hi) return lo;

  const double leps = std::log(eps);
  if (mixture_survival(family, lo, thetas, weights) <= eps)
    return lo;  // rounding pushed the root outside; endpoints are exact
  if (mixture_survival(family, hi, thetas, weights) >= eps) return hi;

  // Illinois-safeguarded false position on the log survival, which is close
  // to linear in y; plain regula falsi stagnates one-sided on this function
  double glo = std::log(mixture_survival(family, lo, thetas, weights)) - leps;
  double ghi = std::log(mixture_survival(family, hi, thetas, weights)) - leps;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double y = (lo * ghi - hi * glo) / (ghi - glo);
    if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);
    const double sf = mixture_survival(family, y, thetas, weights);
    const double cdf =
        sf >= 1.0 ? 0.0
                  : std::exp(static_cast<double>(n_periods) * std::log1p(-sf));
    if (std::abs(cdf - p) <= 1e-10) return y;
    const double gy = std::log(sf) - leps;
    if (gy > 0.0) {
      lo = y;
      glo = gy;
      if (side == -1) ghi *= 0.5;
      side = -1;
    } else {
      hi = y;
      ghi = gy;
      if (side == 1) glo *= 0.5;
      side = 1;
    }
    if (hi - lo <= 1e-15 * (1.0 + std::abs(y))) break;
  }
  return 0.5 * (lo + hi);
}

QoIEstimate estimate_qoi(Family family, const Eigen::MatrixXd& mu,
                         const Eigen::MatrixXd& sd,
                         const Eigen::VectorXd& weights,
                         const SigmaPointSet& sp, const ExtremeSpec& spec) {
  const int d_theta = param_dim(family);
  if (mu.cols() != d_theta || sd.cols() != d_theta)
    throw InputError("estimate_qoi: theta dimension mismatch");
  if (sp.dim() != d_theta)
    throw InputError("estimate_qoi: sigma point dimension mismatch");
  if (mu.rows() != weights.size())
    throw InputError("estimate_qoi: weights length mismatch");

  const auto m = mu.rows();
  const int r = sp.size();
  QoIEstimate est;
  est.z_per_sigma.resize(r);
  long clamped = 0;
  Eigen::MatrixXd thetas(m, d_theta);
  for (int q = 0; q < r; ++q) {
    const Eigen::VectorXd u = sp.points.row(q).transpose();
    for (int i = 0; i < m; ++i) {
      ParamVector t = mu.row(i).transpose() + sd.row(i).transpose().cwiseProduct(u);
      int nclamp = 0;
      thetas.row(i) = clamp_to_domain(family, t, 1e-6, &nclamp).transpose();
      clamped += nclamp;
    }
    est.z_per_sigma[q] =
        invert_extreme_quantile(family, spec.p, thetas, weights, spec.n_periods);
  }
  auto [mean, var] = ut_moments(est.z_per_sigma, sp.weights);
  est.mean = mean;
  est.variance = std::max(var, 0.0);
  est.clamp_fraction =
      static_cast<double>(clamped) / static_cast<double>(m * r * d_theta);
  return est;
}

QoIEstimate compute_H_k(Family family, const BatchPosterior& batch,
                        const Eigen::VectorXd& weights, const SigmaPointSet& sp,
                        const ExtremeSpec& spec) {
  return estimate_qoi(family, batch.mu, batch.var.cwiseSqrt(), weights, sp, spec);
}

QoIEstimate compute_H_k(const GPosterior& gp, const ImportanceSample& is,
                        const SigmaPointSet& sp, const ExtremeSpec& spec) {
  BatchPosterior batch = gp.evaluate(is.points);
  return compute_H_k(gp.data().family, batch, is.weights, sp, spec);
}

}  // namespace exq
