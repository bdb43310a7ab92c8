#include "exq/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace exq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_domain(Family f, const ParamVector& theta) {
  if (theta.size() != param_dim(f))
    throw InputError("theta: wrong dimension for family " + family_to_string(f));
  if (!in_domain(f, theta))
    throw InputError("theta outside the domain of family " + family_to_string(f));
}
}  // namespace

Family family_from_string(const std::string& name) {
  if (name == "exponential") return Family::exponential;
  if (name == "weibull") return Family::weibull;
  if (name == "gumbel") return Family::gumbel;
  throw InputError("unknown family: " + name);
}

std::string family_to_string(Family f) {
  switch (f) {
    case Family::exponential: return "exponential";
    case Family::weibull: return "weibull";
    case Family::gumbel: return "gumbel";
  }
  return "?";
}

int param_dim(Family f) {
  switch (f) {
    case Family::exponential: return 1;
    case Family::weibull: return 2;
    case Family::gumbel: return 2;
  }
  return 0;
}

bool in_domain(Family f, const ParamVector& theta) {
  if (theta.size() != param_dim(f)) return false;
  for (int i = 0; i < theta.size(); ++i)
    if (!std::isfinite(theta[i])) return false;
  switch (f) {
    case Family::exponential: return theta[0] > 0.0;
    case Family::weibull: return theta[0] > 0.0 && theta[1] > 0.0;
    case Family::gumbel: return theta[1] > 0.0;  // location free
  }
  return false;
}

ParamVector clamp_to_domain(Family f, const ParamVector& theta, double floor,
                            int* clamped_components) {
  ParamVector t = theta;
  int n = 0;
  auto clamp_pos = [&](int i) {
    if (t[i] < floor) {
      t[i] = floor;
      ++n;
    }
  };
  switch (f) {
    case Family::exponential: clamp_pos(0); break;
    case Family::weibull: clamp_pos(0); clamp_pos(1); break;
    case Family::gumbel: clamp_pos(1); break;
  }
  if (clamped_components) *clamped_components = n;
  return t;
}

double cdf(Family f, const ParamVector& theta, double y) {
  check_domain(f, theta);
  switch (f) {
    case Family::exponential:
      return y <= 0.0 ? 0.0 : -std::expm1(-y / theta[0]);
    case Family::weibull:
      return y <= 0.0 ? 0.0 : -std::expm1(-std::pow(y / theta[1], theta[0]));
    case Family::gumbel:
      return std::exp(-std::exp(-(y - theta[0]) / theta[1]));
  }
  return 0.0;
}

double survival(Family f, const ParamVector& theta, double y) {
  check_domain(f, theta);
  switch (f) {
    case Family::exponential:
      return y <= 0.0 ? 1.0 : std::exp(-y / theta[0]);
    case Family::weibull:
      return y <= 0.0 ? 1.0 : std::exp(-std::pow(y / theta[1], theta[0]));
    case Family::gumbel:
      return -std::expm1(-std::exp(-(y - theta[0]) / theta[1]));
  }
  return 0.0;
}

double quantile(Family f, const ParamVector& theta, double p) {
  check_domain(f, theta);
  if (!(p > 0.0 && p < 1.0)) throw InputError("quantile: p must be in (0,1)");
  switch (f) {
    case Family::exponential:
      return -theta[0] * std::log1p(-p);
    case Family::weibull:
      return theta[1] * std::pow(-std::log1p(-p), 1.0 / theta[0]);
    case Family::gumbel:
      return theta[0] - theta[1] * std::log(-std::log(p));
  }
  return 0.0;
}

double inverse_survival(Family f, const ParamVector& theta, double eps) {
  check_domain(f, theta);
  if (!(eps > 0.0 && eps < 1.0))
    throw InputError("inverse_survival: eps must be in (0,1)");
  switch (f) {
    case Family::exponential:
      return -theta[0] * std::log(eps);
    case Family::weibull:
      return theta[1] * std::pow(-std::log(eps), 1.0 / theta[0]);
    case Family::gumbel:
      return theta[0] - theta[1] * std::log(-std::log1p(-eps));
  }
  return 0.0;
}

double log_density(Family f, const ParamVector& theta, double y) {
  check_domain(f, theta);
  switch (f) {
    case Family::exponential:
      return y < 0.0 ? -kInf : -std::log(theta[0]) - y / theta[0];
    case Family::weibull: {
      if (y <= 0.0) return -kInf;
      const double a = theta[0], b = theta[1];
      const double t = y / b;
      return std::log(a / b) + (a - 1.0) * std::log(t) - std::pow(t, a);
    }
    case Family::gumbel: {
      const double t = (y - theta[0]) / theta[1];
      return -std::log(theta[1]) - t - std::exp(-t);
    }
  }
  return -kInf;
}

double sample(Family f, const ParamVector& theta, Rng& rng) {
  double u = rng.uniform();
  while (u <= 0.0 || u >= 1.0) u = rng.uniform();
  return quantile(f, theta, u);
}

double log_likelihood(Family f, const ParamVector& theta,
                      std::span<const double> samples) {
  double ll = 0.0;
  for (double y : samples) ll += log_density(f, theta, y);
  return ll;
}

namespace {

// Weibull shape profile equation: sum(y^a ln y)/sum(y^a) - 1/a - mean(ln y).
double weibull_profile(double a, std::span<const double> y, double mean_log) {
  double s0 = 0.0, s1 = 0.0;
  // rescale by max to keep y^a finite at large shape
  double ymax = *std::max_element(y.begin(), y.end());
  for (double v : y) {
    const double t = std::pow(v / ymax, a);
    s0 += t;
    s1 += t * std::log(v);
  }
  return s1 / s0 - 1.0 / a - mean_log;
}

MleResult fit_weibull(std::span<const double> y) {
  const auto n = static_cast<double>(y.size());
  double mean_log = 0.0, var_log = 0.0;
  for (double v : y) mean_log += std::log(v);
  mean_log /= n;
  for (double v : y) var_log += (std::log(v) - mean_log) * (std::log(v) - mean_log);
  var_log /= n;
  if (var_log <= 0.0) throw FitError("weibull fit: degenerate samples");

  // moment initialization, then bisection on the monotone profile equation
  double a = (M_PI / std::sqrt(6.0)) / std::sqrt(var_log);
  double lo = 1e-3, hi = 1e3;
  if (weibull_profile(lo, y, mean_log) > 0.0 || weibull_profile(hi, y, mean_log) < 0.0)
    throw FitError("weibull fit: profile equation has no root in [1e-3, 1e3]");
  a = std::clamp(a, lo, hi);
  int iters = 0;
  for (; iters < 200; ++iters) {
    const double g = weibull_profile(a, y, mean_log);
    if (g > 0.0) hi = a; else lo = a;
    // secant-like step via numeric derivative, safeguarded by the bracket
    const double h = 1e-6 * (1.0 + a);
    const double dg = (weibull_profile(a + h, y, mean_log) - g) / h;
    double next = (dg > 0.0) ? a - g / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - a) <= 1e-13 * (1.0 + a)) { a = next; break; }
    a = next;
  }
  double sa = 0.0;
  for (double v : y) sa += std::pow(v, a);
  const double b = std::pow(sa / n, 1.0 / a);
  MleResult r;
  r.theta = ParamVector(2);
  r.theta << a, b;
  r.iterations = iters;
  return r;
}

MleResult fit_gumbel(std::span<const double> y) {
  const auto n = static_cast<double>(y.size());
  double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) throw FitError("gumbel fit: degenerate samples");
  const double sd = std::sqrt(var);
  const double ymin = *std::min_element(y.begin(), y.end());

  // profile equation psi(b) = b - mean + sum(y e^{-y/b})/sum(e^{-y/b}) = 0,
  // shifted by ymin so exponents stay <= 0
  auto psi = [&](double b) {
    double s0 = 0.0, s1 = 0.0;
    for (double v : y) {
      const double e = std::exp(-(v - ymin) / b);
      s0 += e;
      s1 += v * e;
    }
    return b - mean + s1 / s0;
  };
  double lo = 1e-8 * sd, hi = 10.0 * sd;
  int guard = 0;
  while (psi(hi) < 0.0 && guard++ < 60) hi *= 2.0;
  if (psi(lo) > 0.0 || psi(hi) < 0.0)
    throw FitError("gumbel fit: could not bracket the scale");
  double b = sd * std::sqrt(6.0) / M_PI;  // moment start
  b = std::clamp(b, lo, hi);
  int iters = 0;
  for (; iters < 200; ++iters) {
    const double g = psi(b);
    if (g > 0.0) hi = b; else lo = b;
    const double h = 1e-7 * (1.0 + b);
    const double dg = (psi(b + h) - g) / h;
    double next = (dg > 0.0) ? b - g / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - b) <= 1e-13 * (1.0 + b)) { b = next; break; }
    b = next;
  }
  double s0 = 0.0;
  for (double v : y) s0 += std::exp(-(v - ymin) / b);
  const double mu = ymin + b * std::log(n / s0);
  MleResult r;
  r.theta = ParamVector(2);
  r.theta << mu, b;
  r.iterations = iters;
  return r;
}

Eigen::MatrixXd observed_information_inverse(Family f, const ParamVector& theta,
                                             std::span<const double> y) {
  const int d = param_dim(f);
  Eigen::MatrixXd hess(d, d);
  Eigen::VectorXd h(d);
  for (int i = 0; i < d; ++i) h[i] = 1e-4 * (1.0 + std::abs(theta[i]));
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double v;
      if (i == j) {
        ParamVector tp = theta, tm = theta;
        tp[i] += h[i];
        tm[i] -= h[i];
        v = (log_likelihood(f, tp, y) - 2.0 * log_likelihood(f, theta, y) +
             log_likelihood(f, tm, y)) / (h[i] * h[i]);
      } else {
        ParamVector tpp = theta, tpm = theta, tmp = theta, tmm = theta;
        tpp[i] += h[i]; tpp[j] += h[j];
        tpm[i] += h[i]; tpm[j] -= h[j];
        tmp[i] -= h[i]; tmp[j] += h[j];
        tmm[i] -= h[i]; tmm[j] -= h[j];
        v = (log_likelihood(f, tpp, y) - log_likelihood(f, tpm, y) -
             log_likelihood(f, tmp, y) + log_likelihood(f, tmm, y)) /
            (4.0 * h[i] * h[j]);
      }
      hess(i, j) = v;
      hess(j, i) = v;
    }
  }
  Eigen::MatrixXd info = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success)
    throw FitError("observed information is not positive definite at the MLE");
  return llt.solve(Eigen::MatrixXd::Identity(d, d));
}

}  // namespace

MleResult mle_fit(Family f, std::span<const double> samples) {
  const int d = param_dim(f);
  if (static_cast<int>(samples.size()) < d + 1) {
    std::ostringstream os;
    os << "mle_fit: need at least " << d + 1 << " samples, got " << samples.size();
    throw FitError(os.str());
  }
  if (f == Family::weibull || f == Family::exponential) {
    for (double v : samples)
      if (!(v > 0.0)) throw FitError("mle_fit: sample outside family support");
  }
  for (double v : samples)
    if (!std::isfinite(v)) throw FitError("mle_fit: non-finite sample");

  MleResult r;
  switch (f) {
    case Family::exponential: {
      const double m =
          std::accumulate(samples.begin(), samples.end(), 0.0) /
          static_cast<double>(samples.size());
      bool all_equal = std::all_of(samples.begin(), samples.end(),
                                   [&](double v) { return v == samples[0]; });
      if (all_equal) throw FitError("exponential fit: degenerate samples");
      r.theta = ParamVector(1);
      r.theta << m;
      break;
    }
    case Family::weibull: r = fit_weibull(samples); break;
    case Family::gumbel: r = fit_gumbel(samples); break;
  }
  r.sigma = observed_information_inverse(f, r.theta, samples);
  return r;
}

}  // namespace exq
