#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "exq/errors.hpp"
#include "exq/rng.hpp"

namespace exq {

// A realization of the long-term environmental variable.
using EnvPoint = Eigen::VectorXd;

// Axis-aligned hyper-rectangle, the box V enclosing the practical support.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dim() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  bool contains(const EnvPoint& x) const {
    if (x.size() != lo.size()) return false;
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  // Map to the unit cube (used for GP input standardization and distances).
  EnvPoint standardize(const EnvPoint& x) const {
    EnvPoint z(x.size());
    for (int i = 0; i < dim(); ++i) z[i] = (x[i] - lo[i]) / (hi[i] - lo[i]);
    return z;
  }

  EnvPoint unstandardize(const EnvPoint& z) const {
    EnvPoint x(z.size());
    for (int i = 0; i < dim(); ++i) x[i] = lo[i] + z[i] * (hi[i] - lo[i]);
    return x;
  }

  void validate() const {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw InputError("bounds: lo/hi dimension mismatch or empty");
    for (int i = 0; i < dim(); ++i)
      if (!(lo[i] < hi[i]))
        throw InputError("bounds: lo must be < hi in every dimension");
  }
};

// Evaluable joint density of the long-term environment. Implementations that
// admit direct sampling (used by the brute-force oracle) say so.
class EnvDensity {
 public:
  virtual ~EnvDensity() = default;
  virtual double operator()(const EnvPoint& x) const = 0;
  virtual int dim() const = 0;
  virtual bool can_sample() const { return false; }
  virtual EnvPoint sample(Rng&) const {
    throw InputError("this density has no direct sampler");
  }
};

// Uniform density on a box.
class UniformBoxDensity final : public EnvDensity {
 public:
  explicit UniformBoxDensity(Box box) : box_(std::move(box)) {
    box_.validate();
    inv_vol_ = 1.0 / box_.volume();
  }
  double operator()(const EnvPoint& x) const override {
    return box_.contains(x) ? inv_vol_ : 0.0;
  }
  int dim() const override { return box_.dim(); }
  bool can_sample() const override { return true; }
  EnvPoint sample(Rng& rng) const override {
    EnvPoint x(box_.dim());
    for (int i = 0; i < box_.dim(); ++i) x[i] = rng.uniform(box_.lo[i], box_.hi[i]);
    return x;
  }

 private:
  Box box_;
  double inv_vol_;
};

struct Marginal {
  enum class Kind { weibull, lognormal, normal };
  Kind kind;
  double a;  // weibull shape / lognormal mu / normal mean
  double b;  // weibull scale / lognormal sigma / normal sd

  double pdf(double x) const;
  double sample(Rng& rng) const;
};

// Product of independent per-axis marginals.
class ProductDensity final : public EnvDensity {
 public:
  explicit ProductDensity(std::vector<Marginal> marginals)
      : marginals_(std::move(marginals)) {}
  double operator()(const EnvPoint& x) const override;
  int dim() const override { return static_cast<int>(marginals_.size()); }
  bool can_sample() const override { return true; }
  EnvPoint sample(Rng& rng) const override;

 private:
  std::vector<Marginal> marginals_;
};

// 2-D metocean-style hierarchical density: x1 ~ Weibull(shape, scale),
// x2 | x1 ~ Lognormal(mu(x1), sigma(x1)) with
//   mu(x1)    = mu0 + mu1 * log(1 + x1)
//   sigma(x1) = s0 + s1 / (1 + x1)
class HierarchicalDensity final : public EnvDensity {
 public:
  HierarchicalDensity(double shape, double scale, double mu0, double mu1,
                      double s0, double s1)
      : shape_(shape), scale_(scale), mu0_(mu0), mu1_(mu1), s0_(s0), s1_(s1) {}
  double operator()(const EnvPoint& x) const override;
  int dim() const override { return 2; }
  bool can_sample() const override { return true; }
  EnvPoint sample(Rng& rng) const override;

  double cond_mu(double x1) const { return mu0_ + mu1_ * std::log1p(x1); }
  double cond_sigma(double x1) const { return s0_ + s1_ / (1.0 + x1); }

 private:
  double shape_, scale_, mu0_, mu1_, s0_, s1_;
};

// Long-term environment: density, enclosing box V, practical-support
// threshold c. Immutable after construction.
struct EnvModel {
  std::shared_ptr<const EnvDensity> density;
  Box bounds;
  double threshold = 0.0;                 // c > 0
  std::vector<std::string> axis_labels;   // units metadata, optional

  int dim() const { return bounds.dim(); }
  void validate() const;
};

// f_x(x), defined as 0 outside V.
double density(const EnvModel& model, const EnvPoint& x);

// Propose c as a low quantile (default 1e-6) of f_x on a coarse grid over V.
double propose_threshold(const EnvModel& model, double quantile = 1e-6,
                         int grid_per_axis = 64);

// Self-normalized importance sample, uniform-on-F proposal.
struct ImportanceSample {
  Eigen::MatrixXd points;     // M x d_x
  Eigen::VectorXd weights;    // sums to 1
  std::int64_t m_total = 0;
  double volume = 0.0;        // |V|
  double density_value = 0.0; // h_x estimate M_tot / (|V| M)

  std::int64_t size() const { return points.rows(); }
  EnvPoint point(std::int64_t m) const { return points.row(m).transpose(); }
};

ImportanceSample draw_importance_samples(const EnvModel& model,
                                         std::int64_t m_total,
                                         std::uint64_t seed);

void write_importance_csv(const ImportanceSample& is, const std::string& path);

}  // namespace exq
