#include "exq/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>

#include "exq/rng.hpp"

namespace exq {

Kernel kernel_from_string(const std::string& name) {
  if (name == "matern52") return Kernel::matern52;
  if (name == "squared_exponential" || name == "se")
    return Kernel::squared_exponential;
  throw InputError("unknown kernel: " + name);
}

std::string kernel_to_string(Kernel k) {
  return k == Kernel::matern52 ? "matern52" : "squared_exponential";
}

namespace {

double kernel_eval(Kernel kind, const ComponentHyperparams& hp,
                   const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double r2 = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / hp.lengthscales[i];
    r2 += d * d;
  }
  const double s2 = hp.signal_sd * hp.signal_sd;
  if (kind == Kernel::squared_exponential) return s2 * std::exp(-0.5 * r2);
  const double r = std::sqrt(r2);
  const double c = std::sqrt(5.0) * r;
  return s2 * (1.0 + c + 5.0 * r2 / 3.0) * std::exp(-c);
}

Eigen::MatrixXd kernel_matrix(Kernel kind, const ComponentHyperparams& hp,
                              const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v =
          kernel_eval(kind, hp, X.row(i).transpose(), X.row(j).transpose());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

// Cholesky with jitter escalation up to 1e-6.
Eigen::MatrixXd chol_with_jitter(Eigen::MatrixXd A, double jitter0) {
  double jitter = jitter0;
  while (true) {
    Eigen::MatrixXd B = A;
    B.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (jitter > 1e-6)
      throw ConditioningError(
          "kernel matrix stayed ill-conditioned after jitter escalation to 1e-6");
    jitter = std::max(jitter * 10.0, 1e-12);
  }
}

// Negative log marginal likelihood with the constant mean profiled out.
// Returns the profiled mean through *mean_out when non-null.
double neg_lml(Kernel kind, ComponentHyperparams hp, const Eigen::MatrixXd& X,
               const Eigen::VectorXd& y, const Eigen::VectorXd& noise_var,
               double jitter, double* mean_out) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd K = kernel_matrix(kind, hp, X);
  K.diagonal() += noise_var;
  Eigen::MatrixXd L;
  try {
    L = chol_with_jitter(std::move(K), jitter);
  } catch (const ConditioningError&) {
    return 1e100;
  }
  auto solve = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(b);
    return Eigen::VectorXd(
        L.transpose().triangularView<Eigen::Upper>().solve(w));
  };
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd Ki1 = solve(ones);
  Eigen::VectorXd Kiy = solve(y);
  const double denom = ones.dot(Ki1);
  const double m = denom > 0.0 ? ones.dot(Kiy) / denom : y.mean();
  if (mean_out) *mean_out = m;
  Eigen::VectorXd r = y - m * ones;
  Eigen::VectorXd Kir = solve(r);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(L(i, i));
  return 0.5 * r.dot(Kir) + logdet + 0.5 * n * std::log(2.0 * M_PI);
}

// Plain Nelder-Mead, deterministic.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& start, double step,
                            int max_iter) {
  const int n = static_cast<int>(start.size());
  std::vector<Eigen::VectorXd> xs(n + 1, start);
  std::vector<double> fs(n + 1);
  for (int i = 1; i <= n; ++i) xs[i][i - 1] += step;
  for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

  auto order = [&] {
    std::vector<int> idx(n + 1);
    for (int i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Eigen::VectorXd> xs2;
    std::vector<double> fs2;
    for (int i : idx) {
      xs2.push_back(xs[i]);
      fs2.push_back(fs[i]);
    }
    xs = xs2;
    fs = fs2;
  };

  for (int it = 0; it < max_iter; ++it) {
    order();
    if (std::abs(fs[n] - fs[0]) < 1e-10 * (1.0 + std::abs(fs[0]))) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += xs[i];
    centroid /= n;
    Eigen::VectorXd xr = centroid + (centroid - xs[n]);
    double fr = f(xr);
    if (fr < fs[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[n]);
      double fe = f(xe);
      if (fe < fr) { xs[n] = xe; fs[n] = fe; }
      else { xs[n] = xr; fs[n] = fr; }
    } else if (fr < fs[n - 1]) {
      xs[n] = xr;
      fs[n] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (xs[n] - centroid);
      double fc = f(xc);
      if (fc < fs[n]) { xs[n] = xc; fs[n] = fc; }
      else {
        for (int i = 1; i <= n; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  order();
  return xs[0];
}

ComponentHyperparams optimize_component(Kernel kind, const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& noise_var,
                                        const GPConfig& config,
                                        std::uint64_t seed) {
  const int d = static_cast<int>(X.cols());
  const double y_sd = std::max(std::sqrt((y.array() - y.mean()).square().mean()),
                               1e-8);
  const double lo_l = std::log(5e-3), hi_l = std::log(30.0);
  const double lo_s = std::log(y_sd * 1e-4), hi_s = std::log(y_sd * 1e3);

  auto objective = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd zc = z;
    double pen = 0.0;
    for (int i = 0; i < d; ++i) {
      const double c = std::clamp(z[i], lo_l, hi_l);
      pen += 100.0 * (z[i] - c) * (z[i] - c);
      zc[i] = c;
    }
    const double cs = std::clamp(z[d], lo_s, hi_s);
    pen += 100.0 * (z[d] - cs) * (z[d] - cs);
    zc[d] = cs;
    ComponentHyperparams hp;
    hp.lengthscales = zc.head(d).array().exp();
    hp.signal_sd = std::exp(zc[d]);
    // weak log-normal hyperpriors (MAP). Without them the marginal likelihood
    // has a zero-signal optimum on small noisy datasets that collapses the
    // posterior variance and blinds the design loop.
    double prior = 0.0;
    for (int i = 0; i < d; ++i) {
      const double t = (zc[i] - std::log(0.3)) / 1.5;
      prior += 0.5 * t * t;
    }
    const double ts = (zc[d] - std::log(y_sd)) / 1.0;
    prior += 0.5 * ts * ts;
    return neg_lml(kind, hp, X, y, noise_var, config.jitter, nullptr) + pen +
           prior;
  };

  Rng rng(mix_seed(seed));
  Eigen::VectorXd base(d + 1);
  for (int i = 0; i < d; ++i) base[i] = std::log(0.3);
  base[d] = std::log(y_sd);

  Eigen::VectorXd best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < std::max(1, config.multistarts); ++s) {
    Eigen::VectorXd start = base;
    if (s > 0)
      for (int i = 0; i <= d; ++i) start[i] += 0.8 * rng.normal();
    Eigen::VectorXd z = nelder_mead(objective, start, 0.4, config.max_opt_iter);
    const double fz = objective(z);
    if (fz < best_f) {
      best_f = fz;
      best = z;
    }
  }
  ComponentHyperparams hp;
  hp.lengthscales = Eigen::VectorXd(d);
  for (int i = 0; i < d; ++i)
    hp.lengthscales[i] = std::exp(std::clamp(best[i], lo_l, hi_l));
  hp.signal_sd = std::exp(std::clamp(best[d], lo_s, hi_s));
  neg_lml(kind, hp, X, y, noise_var, 1e-10, &hp.mean);
  return hp;
}

}  // namespace

ComponentGP ComponentGP::build(Kernel kind, const ComponentHyperparams& hp,
                               Eigen::MatrixXd X, Eigen::VectorXd y,
                               Eigen::VectorXd noise_var, double jitter) {
  ComponentGP gp;
  gp.kind_ = kind;
  gp.hp_ = hp;
  gp.jitter_ = jitter;
  gp.X_ = std::move(X);
  gp.y_ = std::move(y);
  gp.noise_var_ = std::move(noise_var);
  Eigen::MatrixXd K = kernel_matrix(kind, gp.hp_, gp.X_);
  K.diagonal() += gp.noise_var_;
  gp.L_ = chol_with_jitter(std::move(K), jitter);
  Eigen::VectorXd r = gp.y_.array() - gp.hp_.mean;
  Eigen::VectorXd w = gp.L_.triangularView<Eigen::Lower>().solve(r);
  gp.alpha_ = gp.L_.transpose().triangularView<Eigen::Upper>().solve(w);
  return gp;
}

double ComponentGP::kernel(const Eigen::VectorXd& a,
                           const Eigen::VectorXd& b) const {
  return kernel_eval(kind_, hp_, a, b);
}

Eigen::VectorXd ComponentGP::cross(const Eigen::VectorXd& z) const {
  Eigen::VectorXd k(X_.rows());
  for (int i = 0; i < X_.rows(); ++i)
    k[i] = kernel_eval(kind_, hp_, X_.row(i).transpose(), z);
  return k;
}

void ComponentGP::predict(const Eigen::VectorXd& z, double& mu,
                          double& var) const {
  Eigen::VectorXd k = cross(z);
  mu = hp_.mean + k.dot(alpha_);
  Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(k);
  var = std::max(hp_.signal_sd * hp_.signal_sd - v.squaredNorm(), 0.0);
}

ComponentGP ComponentGP::condition_on(const Eigen::VectorXd& z, double value,
                                      double noise_var) const {
  const int n = size();
  ComponentGP gp;
  gp.kind_ = kind_;
  gp.hp_ = hp_;
  gp.jitter_ = jitter_;
  gp.X_.resize(n + 1, X_.cols());
  gp.X_.topRows(n) = X_;
  gp.X_.row(n) = z.transpose();
  gp.y_.resize(n + 1);
  gp.y_.head(n) = y_;
  gp.y_[n] = value;
  gp.noise_var_.resize(n + 1);
  gp.noise_var_.head(n) = noise_var_;
  gp.noise_var_[n] = noise_var;

  // bordered Cholesky extension
  Eigen::VectorXd k = cross(z);
  Eigen::VectorXd l12 = L_.triangularView<Eigen::Lower>().solve(k);
  const double kss = kernel_eval(kind_, hp_, z, z) + noise_var + jitter_;
  const double l22sq = kss - l12.squaredNorm();
  if (!(l22sq > 0.0))
    throw ConditioningError("fantasy conditioning produced a singular factor");
  gp.L_ = Eigen::MatrixXd::Zero(n + 1, n + 1);
  gp.L_.topLeftCorner(n, n) = L_;
  gp.L_.row(n).head(n) = l12.transpose();
  gp.L_(n, n) = std::sqrt(l22sq);
  Eigen::VectorXd r = gp.y_.array() - hp_.mean;
  Eigen::VectorXd w = gp.L_.triangularView<Eigen::Lower>().solve(r);
  gp.alpha_ = gp.L_.transpose().triangularView<Eigen::Upper>().solve(w);
  return gp;
}

Eigen::MatrixXd ComponentGP::cross_solve(const Eigen::MatrixXd& Z) const {
  Eigen::MatrixXd Kc(X_.rows(), Z.rows());
  for (int m = 0; m < Z.rows(); ++m) Kc.col(m) = cross(Z.row(m).transpose());
  return L_.triangularView<Eigen::Lower>().solve(Kc);
}

void ComponentGP::predict_block(const Eigen::MatrixXd& Z, Eigen::VectorXd& mu,
                                Eigen::VectorXd& var,
                                Eigen::MatrixXd& V) const {
  const auto m = Z.rows();
  Eigen::MatrixXd Kc(X_.rows(), m);
  for (int i = 0; i < m; ++i) Kc.col(i) = cross(Z.row(i).transpose());
  V = L_.triangularView<Eigen::Lower>().solve(Kc);
  mu = (Kc.transpose() * alpha_).array() + hp_.mean;
  const double s2 = hp_.signal_sd * hp_.signal_sd;
  var.resize(m);
  for (int i = 0; i < m; ++i)
    var[i] = std::max(s2 - V.col(i).squaredNorm(), 0.0);
}

GPosterior GPosterior::fit(const Dataset& data, const Box& bounds,
                           std::uint64_t seed, const GPConfig& config) {
  data.validate();
  bounds.validate();
  const int n = static_cast<int>(data.size());
  if (n < 1) throw InputError("gp fit: empty dataset");
  const int d_theta = param_dim(data.family);
  const int d = bounds.dim();

  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    X.row(i) = bounds.standardize(data.records[i].x).transpose();

  std::vector<ComponentHyperparams> hps(d_theta);
  for (int c = 0; c < d_theta; ++c) {
    Eigen::VectorXd y(n), noise(n);
    for (int i = 0; i < n; ++i) {
      y[i] = data.records[i].theta_obs[c];
      noise[i] = data.records[i].sigma(c, c);
    }
    if (n >= 2) {
      hps[c] = optimize_component(config.kernel, X, y, noise, config,
                                  derive_seed(seed, 0xA11CE, c));
    } else {
      // too little data to optimize: conservative defaults
      ComponentHyperparams hp;
      hp.lengthscales = Eigen::VectorXd::Constant(d, 0.3);
      hp.mean = y[0];
      hp.signal_sd = std::max({0.5 * (1.0 + std::abs(y[0])),
                               2.0 * std::sqrt(noise[0]), 1e-2});
      hps[c] = hp;
    }
  }
  return with_hyperparams(data, bounds, hps, config);
}

GPosterior GPosterior::with_hyperparams(
    const Dataset& data, const Box& bounds,
    const std::vector<ComponentHyperparams>& hps, const GPConfig& config) {
  data.validate();
  const int n = static_cast<int>(data.size());
  const int d_theta = param_dim(data.family);
  if (static_cast<int>(hps.size()) != d_theta)
    throw InputError("gp: hyperparameter count does not match family");

  GPosterior gp;
  gp.bounds_ = bounds;
  gp.config_ = config;
  gp.data_ = data;
  Eigen::MatrixXd X(n, bounds.dim());
  for (int i = 0; i < n; ++i)
    X.row(i) = bounds.standardize(data.records[i].x).transpose();
  for (int c = 0; c < d_theta; ++c) {
    Eigen::VectorXd y(n), noise(n);
    for (int i = 0; i < n; ++i) {
      y[i] = data.records[i].theta_obs[c];
      noise[i] = data.records[i].sigma(c, c);
    }
    gp.comps_.push_back(
        ComponentGP::build(config.kernel, hps[c], X, y, noise, config.jitter));
  }
  return gp;
}

PosteriorAtPoint GPosterior::posterior_at(const EnvPoint& x) const {
  if (!bounds_.contains(x))
    std::cerr << "[exq] warning: posterior_at called outside the bounds V\n";
  Eigen::VectorXd z = bounds_.standardize(x);
  PosteriorAtPoint p;
  p.mu.resize(theta_dim());
  p.var.resize(theta_dim());
  for (int c = 0; c < theta_dim(); ++c) comps_[c].predict(z, p.mu[c], p.var[c]);
  return p;
}

ParamVector GPosterior::realize(const EnvPoint& x,
                                const Eigen::VectorXd& u) const {
  if (u.size() != theta_dim()) throw InputError("realize: u dimension mismatch");
  PosteriorAtPoint p = posterior_at(x);
  return p.mu + p.sd().cwiseProduct(u);
}

GPosterior GPosterior::condition_on(const EnvPoint& x,
                                    const ParamVector& theta_value,
                                    const Eigen::VectorXd& noise_diag) const {
  if (theta_value.size() != theta_dim() || noise_diag.size() != theta_dim())
    throw InputError("condition_on: dimension mismatch");
  GPosterior gp;
  gp.bounds_ = bounds_;
  gp.config_ = config_;
  gp.data_ = data_;
  Observation rec;
  rec.x = x;
  rec.theta_obs = theta_value;
  rec.sigma = noise_diag.asDiagonal();
  gp.data_.records.push_back(rec);
  Eigen::VectorXd z = bounds_.standardize(x);
  for (int c = 0; c < theta_dim(); ++c)
    gp.comps_.push_back(comps_[c].condition_on(z, theta_value[c], noise_diag[c]));
  return gp;
}

BatchPosterior GPosterior::evaluate(const Eigen::MatrixXd& points) const {
  const auto m = points.rows();
  BatchPosterior b;
  b.Z.resize(m, bounds_.dim());
  for (int i = 0; i < m; ++i)
    b.Z.row(i) = bounds_.standardize(points.row(i).transpose()).transpose();
  b.mu.resize(m, theta_dim());
  b.var.resize(m, theta_dim());
  for (int c = 0; c < theta_dim(); ++c) {
    Eigen::VectorXd mu, var;
    Eigen::MatrixXd V;
    comps_[c].predict_block(b.Z, mu, var, V);
    b.mu.col(c) = mu;
    b.var.col(c) = var;
    b.V.push_back(std::move(V));
  }
  return b;
}

FantasyUpdate GPosterior::fantasy(const BatchPosterior& base, const EnvPoint& x,
                                  const Eigen::VectorXd& noise_diag) const {
  const auto m = base.Z.rows();
  Eigen::VectorXd z = bounds_.standardize(x);
  FantasyUpdate f;
  f.mu_star.resize(theta_dim());
  f.var_star.resize(theta_dim());
  f.gain_denom.resize(theta_dim());
  f.cov.resize(m, theta_dim());
  f.var_new.resize(m, theta_dim());
  for (int c = 0; c < theta_dim(); ++c) {
    const auto& gp = comps_[c];
    double mu_s, var_s;
    gp.predict(z, mu_s, var_s);
    f.mu_star[c] = mu_s;
    f.var_star[c] = var_s;
    Eigen::VectorXd k = gp.cross(z);
    Eigen::VectorXd v = gp.chol().triangularView<Eigen::Lower>().solve(k);
    // jitter matches the diagonal the extended Cholesky factor would carry,
    // so the rank-one update agrees with full reconditioning
    const double denom = var_s + noise_diag[c] + gp.jitter();
    f.gain_denom[c] = denom;
    const double s2 = gp.hyperparams().signal_sd * gp.hyperparams().signal_sd;
    // jitter-level predictive variance means the value is already determined;
    // the exact update is vacuous and the tiny denominator only amplifies
    // rounding in the cross-covariances
    if (denom <= 1e-8 * s2) {
      f.gain_denom[c] = 0.0;
      f.cov.col(c).setZero();
      f.var_new.col(c) = base.var.col(c);
      continue;
    }
    for (int i = 0; i < m; ++i) {
      const double kxm = gp.kernel(base.Z.row(i).transpose(), z);
      const double cov = kxm - base.V[c].col(i).dot(v);
      f.cov(i, c) = cov;
      f.var_new(i, c) = std::max(base.var(i, c) - cov * cov / denom, 0.0);
    }
  }
  return f;
}

Eigen::MatrixXd FantasyUpdate::fantasy_mu(const BatchPosterior& base,
                                          const Eigen::VectorXd& theta_q) const {
  Eigen::MatrixXd mu = base.mu;
  for (int c = 0; c < mu_star.size(); ++c) {
    if (gain_denom[c] <= 1e-300) continue;
    mu.col(c) += cov.col(c) * ((theta_q[c] - mu_star[c]) / gain_denom[c]);
  }
  return mu;
}

std::vector<ComponentHyperparams> GPosterior::hyperparams() const {
  std::vector<ComponentHyperparams> hps;
  for (const auto& c : comps_) hps.push_back(c.hyperparams());
  return hps;
}

}  // namespace exq
