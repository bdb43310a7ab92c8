#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "exq/dataset.hpp"
#include "exq/env_model.hpp"

namespace exq {

enum class Kernel { matern52, squared_exponential };

Kernel kernel_from_string(const std::string& name);
std::string kernel_to_string(Kernel k);

struct GPConfig {
  Kernel kernel = Kernel::matern52;
  double jitter = 1e-10;
  int multistarts = 4;
  int max_opt_iter = 250;
};

// Per-component hyperparameters: anisotropic lengthscales (in standardized
// input space), signal standard deviation, constant prior mean.
struct ComponentHyperparams {
  Eigen::VectorXd lengthscales;
  double signal_sd = 1.0;
  double mean = 0.0;
};

struct PosteriorAtPoint {
  Eigen::VectorXd mu;   // d_theta
  Eigen::VectorXd var;  // diagonal covariance
  Eigen::VectorXd sd() const { return var.cwiseSqrt(); }
};

// Scalar GP for one theta component. Inputs are already standardized.
class ComponentGP {
 public:
  static ComponentGP build(Kernel kind, const ComponentHyperparams& hp,
                           Eigen::MatrixXd X, Eigen::VectorXd y,
                           Eigen::VectorXd noise_var, double jitter);

  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  Eigen::VectorXd cross(const Eigen::VectorXd& z) const;  // k(X, z)

  // posterior mean and variance at a standardized point
  void predict(const Eigen::VectorXd& z, double& mu, double& var) const;

  ComponentGP condition_on(const Eigen::VectorXd& z, double value,
                           double noise_var) const;

  const ComponentHyperparams& hyperparams() const { return hp_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& chol() const { return L_; }
  int size() const { return static_cast<int>(y_.size()); }
  double jitter() const { return jitter_; }

  // V = L^{-1} k(X, Z^T) for a block of standardized points (rows of Z)
  Eigen::MatrixXd cross_solve(const Eigen::MatrixXd& Z) const;

  // Batched prediction that also returns the cross-solve cache.
  void predict_block(const Eigen::MatrixXd& Z, Eigen::VectorXd& mu,
                     Eigen::VectorXd& var, Eigen::MatrixXd& V) const;

 private:
  Kernel kind_ = Kernel::matern52;
  ComponentHyperparams hp_;
  double jitter_ = 1e-10;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_, noise_var_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd alpha_;
};

// Cached posterior over a fixed block of points (e.g. the importance sample).
struct BatchPosterior {
  Eigen::MatrixXd Z;                // M x d_x, standardized
  Eigen::MatrixXd mu;               // M x d_theta
  Eigen::MatrixXd var;              // M x d_theta
  std::vector<Eigen::MatrixXd> V;   // per component: k x M
};

// Effect of one hypothetical observation (x*, theta, noise) on the batch:
// exact rank-one GP update. The fantasy variance is shared across all
// hypothetical theta values at x*; only the mean shifts.
struct FantasyUpdate {
  Eigen::VectorXd mu_star, var_star;  // posterior at the candidate, d_theta
  Eigen::VectorXd gain_denom;         // var_star + fantasy noise
  Eigen::MatrixXd cov;                // M x d_theta, cov(x_m, x*)
  Eigen::MatrixXd var_new;            // M x d_theta

  // Fantasy posterior mean over the batch given the observed value theta_q.
  Eigen::MatrixXd fantasy_mu(const BatchPosterior& base,
                             const Eigen::VectorXd& theta_q) const;
};

// Independent per-component GP posterior over theta(x) with heteroscedastic
// observation noise from the dataset sigma diagonals. Immutable after
// construction.
class GPosterior {
 public:
  // Hyperparameters maximize the per-component log marginal likelihood
  // (multi-start Nelder-Mead, deterministic given seed).
  static GPosterior fit(const Dataset& data, const Box& bounds,
                        std::uint64_t seed, const GPConfig& config = {});

  // Condition with given hyperparameters, no optimization.
  static GPosterior with_hyperparams(const Dataset& data, const Box& bounds,
                                     const std::vector<ComponentHyperparams>& hp,
                                     const GPConfig& config = {});

  PosteriorAtPoint posterior_at(const EnvPoint& x) const;

  // Eq.-style finite-dimensional realization: mu(x) + L(x) u with diagonal L.
  ParamVector realize(const EnvPoint& x, const Eigen::VectorXd& u) const;

  // Exact conditioning on one extra observation, hyperparameters frozen.
  GPosterior condition_on(const EnvPoint& x, const ParamVector& theta_value,
                          const Eigen::VectorXd& noise_diag) const;

  BatchPosterior evaluate(const Eigen::MatrixXd& points) const;

  FantasyUpdate fantasy(const BatchPosterior& base, const EnvPoint& x,
                        const Eigen::VectorXd& noise_diag) const;

  std::vector<ComponentHyperparams> hyperparams() const;
  const Dataset& data() const { return data_; }
  const Box& bounds() const { return bounds_; }
  const GPConfig& config() const { return config_; }
  int theta_dim() const { return static_cast<int>(comps_.size()); }

 private:
  GPosterior() = default;
  Box bounds_;
  GPConfig config_;
  Dataset data_;
  std::vector<ComponentGP> comps_;
};

}  // namespace exq
