#include "exq/env_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace exq {

double Marginal::pdf(double x) const {
  switch (kind) {
    case Kind::weibull: {
      if (x < 0.0) return 0.0;
      if (x == 0.0) return a < 1.0 ? 0.0 : (a == 1.0 ? 1.0 / b : 0.0);
      const double t = x / b;
      return (a / b) * std::pow(t, a - 1.0) * std::exp(-std::pow(t, a));
    }
    case Kind::lognormal: {
      if (x <= 0.0) return 0.0;
      const double z = (std::log(x) - a) / b;
      return std::exp(-0.5 * z * z) / (x * b * std::sqrt(2.0 * M_PI));
    }
    case Kind::normal: {
      const double z = (x - a) / b;
      return std::exp(-0.5 * z * z) / (b * std::sqrt(2.0 * M_PI));
    }
  }
  return 0.0;
}

double Marginal::sample(Rng& rng) const {
  switch (kind) {
    case Kind::weibull: {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      return b * std::pow(-std::log(u), 1.0 / a);
    }
    case Kind::lognormal:
      return std::exp(a + b * rng.normal());
    case Kind::normal:
      return a + b * rng.normal();
  }
  return 0.0;
}

double ProductDensity::operator()(const EnvPoint& x) const {
  if (x.size() != dim()) throw InputError("density: dimension mismatch");
  double f = 1.0;
  for (int i = 0; i < dim(); ++i) f *= marginals_[i].pdf(x[i]);
  return f;
}

EnvPoint ProductDensity::sample(Rng& rng) const {
  EnvPoint x(dim());
  for (int i = 0; i < dim(); ++i) x[i] = marginals_[i].sample(rng);
  return x;
}

double HierarchicalDensity::operator()(const EnvPoint& x) const {
  if (x.size() != 2) throw InputError("density: dimension mismatch");
  Marginal m1{Marginal::Kind::weibull, shape_, scale_};
  const double f1 = m1.pdf(x[0]);
  if (f1 == 0.0) return 0.0;
  Marginal m2{Marginal::Kind::lognormal, cond_mu(x[0]), cond_sigma(x[0])};
  return f1 * m2.pdf(x[1]);
}

EnvPoint HierarchicalDensity::sample(Rng& rng) const {
  Marginal m1{Marginal::Kind::weibull, shape_, scale_};
  EnvPoint x(2);
  x[0] = m1.sample(rng);
  Marginal m2{Marginal::Kind::lognormal, cond_mu(x[0]), cond_sigma(x[0])};
  x[1] = m2.sample(rng);
  return x;
}

void EnvModel::validate() const {
  bounds.validate();
  if (!density) throw InputError("env model: missing density");
  if (density->dim() != bounds.dim())
    throw InputError("env model: density/bounds dimension mismatch");
  if (!(threshold > 0.0)) throw InputError("env model: threshold c must be > 0");
}

double density(const EnvModel& model, const EnvPoint& x) {
  if (x.size() != model.dim())
    throw InputError("density: point dimension mismatch");
  if (!model.bounds.contains(x)) return 0.0;
  return (*model.density)(x);
}

double propose_threshold(const EnvModel& model, double quantile,
                         int grid_per_axis) {
  const int d = model.dim();
  std::vector<int> idx(d, 0);
  std::vector<double> vals;
  EnvPoint x(d);
  const long total = static_cast<long>(std::pow(grid_per_axis, d));
  vals.reserve(total);
  for (long n = 0; n < total; ++n) {
    long rem = n;
    for (int i = 0; i < d; ++i) {
      const int gi = static_cast<int>(rem % grid_per_axis);
      rem /= grid_per_axis;
      x[i] = model.bounds.lo[i] + (gi + 0.5) *
                 (model.bounds.hi[i] - model.bounds.lo[i]) / grid_per_axis;
    }
    vals.push_back((*model.density)(x));
  }
  std::sort(vals.begin(), vals.end());
  auto k = static_cast<std::size_t>(quantile * static_cast<double>(vals.size()));
  k = std::min(k, vals.size() - 1);
  // strictly below the grid value, so flat densities keep a nonempty support
  double c = vals[k] * (1.0 - 1e-9);
  if (c <= 0.0) {
    // fall back to the smallest positive grid value scaled down
    for (double v : vals)
      if (v > 0.0) {
        c = v * 1e-3;
        break;
      }
  }
  return c;
}

ImportanceSample draw_importance_samples(const EnvModel& model,
                                         std::int64_t m_total,
                                         std::uint64_t seed) {
  model.validate();
  if (m_total < 1) throw InputError("draw_importance_samples: m_total must be >= 1");
  const int d = model.dim();
  Rng rng(seed);
  std::vector<EnvPoint> kept;
  std::vector<double> fvals;
  EnvPoint x(d);
  for (std::int64_t n = 0; n < m_total; ++n) {
    for (int i = 0; i < d; ++i) x[i] = rng.uniform(model.bounds.lo[i], model.bounds.hi[i]);
    const double f = (*model.density)(x);
    if (f > model.threshold) {
      kept.push_back(x);
      fvals.push_back(f);
    }
  }
  if (kept.empty())
    throw DegenerateSupportError(
        "no importance sample survived the threshold c; decrease c or fix the "
        "bounds V");

  const auto m = static_cast<std::int64_t>(kept.size());
  ImportanceSample is;
  is.m_total = m_total;
  is.volume = model.bounds.volume();
  is.density_value =
      static_cast<double>(m_total) / (is.volume * static_cast<double>(m));
  is.points.resize(m, d);
  is.weights.resize(m);
  // raw weight f/h; self-normalize so the mixture CDF is a valid CDF
  double sum = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    is.points.row(i) = kept[i].transpose();
    is.weights[i] = fvals[i] / is.density_value;
    sum += is.weights[i];
  }
  is.weights /= sum;
  return is;
}

void write_importance_csv(const ImportanceSample& is, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  const int d = static_cast<int>(is.points.cols());
  for (int i = 0; i < d; ++i) out << "x_" << (i + 1) << ",";
  out << "weight\n";
  out.precision(17);
  for (std::int64_t m = 0; m < is.size(); ++m) {
    for (int i = 0; i < d; ++i) out << is.points(m, i) << ",";
    out << is.weights[m] << "\n";
  }
}

}  // namespace exq
