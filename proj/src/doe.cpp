#include "exq/doe.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "exq/rng.hpp"

namespace exq {

using nlohmann::json;

namespace {
// seed stream tags
constexpr std::uint64_t kStreamImportance = 1;
constexpr std::uint64_t kStreamDesign = 2;
constexpr std::uint64_t kStreamSimulate = 3;
constexpr std::uint64_t kStreamGpFit = 4;
constexpr std::uint64_t kStreamCandidates = 5;

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}
}  // namespace

void parallel_for(int n, const std::function<void(int)>& body) {
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EXQ_THREADS")) threads = std::atoi(env);
  threads = std::clamp(threads, 1, 64);
  if (threads == 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

Eigen::VectorXd sigma_tilde(const EnvPoint& x, const Dataset& data,
                            const Box& bounds) {
  if (data.records.empty()) throw InputError("sigma_tilde: empty dataset");
  const Eigen::VectorXd z = bounds.standardize(x);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const double d = (bounds.standardize(data.records[i].x) - z).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return data.records[best].sigma_diag();
}

AcquisitionValue acquisition(const EnvPoint& x, const GPosterior& gp,
                             const BatchPosterior& batch,
                             const ImportanceSample& is,
                             const SigmaPointSet& sp, const ExtremeSpec& spec,
                             const Dataset& data) {
  const int d_theta = gp.theta_dim();
  if (sp.dim() != d_theta)
    throw InputError("acquisition: sigma point dimension mismatch");
  const Eigen::VectorXd noise = sigma_tilde(x, data, gp.bounds());
  const FantasyUpdate f = gp.fantasy(batch, x, noise);
  const Eigen::VectorXd sd_star = f.var_star.cwiseSqrt();
  const Eigen::MatrixXd sd_new = f.var_new.cwiseSqrt();

  AcquisitionValue out;
  out.x = x;
  out.per_sigma_h.resize(sp.size());
  for (int q = 0; q < sp.size(); ++q) {
    const Eigen::VectorXd theta_q =
        f.mu_star + sd_star.cwiseProduct(sp.points.row(q).transpose());
    const Eigen::MatrixXd mu_q = f.fantasy_mu(batch, theta_q);
    const QoIEstimate h =
        estimate_qoi(data.family, mu_q, sd_new, is.weights, sp, spec);
    out.per_sigma_h[q] = h.variance;
  }
  out.s_k = sp.weights.dot(out.per_sigma_h);
  return out;
}

double acquisition_mc(const EnvPoint& x, const GPosterior& gp,
                      const BatchPosterior& batch, const ImportanceSample& is,
                      const SigmaPointSet& sp, const ExtremeSpec& spec,
                      const Dataset& data, int n_draws, std::uint64_t seed) {
  const Eigen::VectorXd noise = sigma_tilde(x, data, gp.bounds());
  const FantasyUpdate f = gp.fantasy(batch, x, noise);
  const Eigen::VectorXd sd_star = f.var_star.cwiseSqrt();
  const Eigen::MatrixXd sd_new = f.var_new.cwiseSqrt();
  Rng rng(derive_seed(seed, 0xAC0));
  double acc = 0.0;
  for (int n = 0; n < n_draws; ++n) {
    Eigen::VectorXd u(sd_star.size());
    for (int c = 0; c < u.size(); ++c) u[c] = rng.normal();
    const Eigen::VectorXd theta = f.mu_star + sd_star.cwiseProduct(u);
    const Eigen::MatrixXd mu_n = f.fantasy_mu(batch, theta);
    acc += estimate_qoi(data.family, mu_n, sd_new, is.weights, sp, spec).variance;
  }
  return acc / n_draws;
}

namespace {

// One Latin hypercube sample on the unit cube: per axis a random permutation
// of strata, point uniform within its stratum.
Eigen::MatrixXd lhs_unit(int n, int d, Rng& rng) {
  Eigen::MatrixXd pts(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.index_below(i + 1)]);
    for (int i = 0; i < n; ++i)
      pts(i, j) = (perm[i] + rng.uniform()) / n;
  }
  return pts;
}

double min_pairwise_dist(const Eigen::MatrixXd& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pts.rows(); ++i)
    for (int j = i + 1; j < pts.rows(); ++j)
      best = std::min(best, (pts.row(i) - pts.row(j)).squaredNorm());
  return best;
}

std::vector<EnvPoint> lhs_in_support(const EnvModel& env, int count,
                                     std::uint64_t seed, int restarts) {
  const int d = env.dim();
  Rng rng(seed);
  Eigen::MatrixXd best;
  double best_score = -1.0;
  for (int t = 0; t < restarts; ++t) {
    Eigen::MatrixXd pts = lhs_unit(count, d, rng);
    const double score = min_pairwise_dist(pts);
    if (score > best_score) {
      best_score = score;
      best = pts;
    }
  }
  std::vector<EnvPoint> out;
  long proposals = 0;
  const long limit = 100L * count;
  for (int i = 0; i < count; ++i) {
    EnvPoint x = env.bounds.unstandardize(best.row(i).transpose());
    ++proposals;
    while ((*env.density)(x) <= env.threshold) {
      if (++proposals > limit)
        throw DesignError(
            "could not place the design inside the practical support; "
            "check c and the bounds V");
      for (int jj = 0; jj < d; ++jj)
        x[jj] = rng.uniform(env.bounds.lo[jj], env.bounds.hi[jj]);
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace

std::vector<EnvPoint> initial_design(const EnvModel& env, int k0,
                                     std::uint64_t seed) {
  if (k0 < 2) throw InputError("initial_design: k0 must be >= 2");
  return lhs_in_support(env, k0, seed, 64);
}

std::vector<EnvPoint> lhs_candidates(const EnvModel& env, int count,
                                     std::uint64_t seed) {
  if (count < 1) throw InputError("lhs_candidates: count must be >= 1");
  return lhs_in_support(env, count, seed, 8);
}

int select_next(const std::vector<AcquisitionValue>& values) {
  if (values.empty()) throw InputError("select_next: empty candidate list");
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i].s_k < values[best].s_k) best = static_cast<int>(i);
  return best;
}

void write_trace_csv(const DoeTrace& trace, int d_x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << "k";
  for (int i = 0; i < d_x; ++i) out << ",x_" << (i + 1);
  out << ",s_k,H_k,z_mean,clamp_fraction,elapsed_ms\n";
  for (const auto& row : trace.rows) {
    out << row.k;
    for (int i = 0; i < d_x; ++i)
      out << ","
          << (static_cast<int>(row.x.size()) == d_x ? format_double(row.x[i])
                                                    : "");
    out << "," << (std::isnan(row.s_k) ? "" : format_double(row.s_k));
    out << "," << format_double(row.h_k);
    out << "," << format_double(row.z_mean);
    out << "," << format_double(row.clamp_fraction);
    out << "," << format_double(row.elapsed_ms) << "\n";
  }
}

namespace {

json hyperparams_to_json(const std::vector<ComponentHyperparams>& hps) {
  json arr = json::array();
  for (const auto& hp : hps) {
    json h;
    h["lengthscales"] = std::vector<double>(
        hp.lengthscales.data(), hp.lengthscales.data() + hp.lengthscales.size());
    h["signal_sd"] = hp.signal_sd;
    h["mean"] = hp.mean;
    arr.push_back(h);
  }
  return arr;
}

std::vector<ComponentHyperparams> hyperparams_from_json(const json& arr) {
  std::vector<ComponentHyperparams> hps;
  for (const auto& h : arr) {
    ComponentHyperparams hp;
    auto ls = h.at("lengthscales").get<std::vector<double>>();
    hp.lengthscales = Eigen::Map<Eigen::VectorXd>(ls.data(), ls.size());
    hp.signal_sd = h.at("signal_sd").get<double>();
    hp.mean = h.at("mean").get<double>();
    hps.push_back(hp);
  }
  return hps;
}

json observation_to_json(const Observation& r, Family family) {
  json j;
  j["family"] = family_to_string(family);
  j["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
  j["theta_obs"] = std::vector<double>(r.theta_obs.data(),
                                       r.theta_obs.data() + r.theta_obs.size());
  Eigen::VectorXd sd = r.sigma_diag();
  j["sigma_diag"] = std::vector<double>(sd.data(), sd.data() + sd.size());
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  return j;
}

Observation observation_from_json(const json& j) {
  Observation r;
  auto xv = j.at("x").get<std::vector<double>>();
  auto tv = j.at("theta_obs").get<std::vector<double>>();
  auto sv = j.at("sigma_diag").get<std::vector<double>>();
  r.x = Eigen::Map<Eigen::VectorXd>(xv.data(), xv.size());
  r.theta_obs = Eigen::Map<Eigen::VectorXd>(tv.data(), tv.size());
  r.sigma = Eigen::Map<Eigen::VectorXd>(sv.data(), sv.size()).asDiagonal();
  r.n_samples = j.at("n_samples").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  json j;
  j["config"] = json::parse(run_config_to_json(cp.config));
  j["k"] = cp.k;
  json recs = json::array();
  for (const auto& r : cp.data.records)
    recs.push_back(observation_to_json(r, cp.data.family));
  j["dataset"] = recs;
  j["hyperparams"] = hyperparams_to_json(cp.hyperparams);
  json rows = json::array();
  for (const auto& row : cp.trace.rows) {
    json jr;
    jr["k"] = row.k;
    jr["x"] = std::vector<double>(row.x.data(), row.x.data() + row.x.size());
    jr["s_k"] = row.s_k;
    jr["H_k"] = row.h_k;
    jr["z_mean"] = row.z_mean;
    jr["clamp_fraction"] = row.clamp_fraction;
    jr["elapsed_ms"] = row.elapsed_ms;
    rows.push_back(jr);
  }
  j["trace"] = rows;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot open for write: " + tmp);
    out << j.dump() << "\n";
  }
  std::rename(tmp.c_str(), path.c_str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint parse error: ") + e.what());
  }
  Checkpoint cp;
  cp.config = run_config_from_json(j.at("config").dump());
  cp.k = j.at("k").get<int>();
  cp.data.family = cp.config.family;
  for (const auto& r : j.at("dataset")) cp.data.records.push_back(observation_from_json(r));
  cp.hyperparams = hyperparams_from_json(j.at("hyperparams"));
  for (const auto& jr : j.at("trace")) {
    TraceRow row;
    row.k = jr.at("k").get<int>();
    auto xv = jr.at("x").get<std::vector<double>>();
    row.x = Eigen::Map<Eigen::VectorXd>(xv.data(), xv.size());
    row.s_k = jr.at("s_k").is_number() ? jr.at("s_k").get<double>()
                                       : std::numeric_limits<double>::quiet_NaN();
    row.h_k = jr.at("H_k").get<double>();
    row.z_mean = jr.at("z_mean").get<double>();
    row.clamp_fraction = jr.at("clamp_fraction").get<double>();
    row.elapsed_ms = jr.at("elapsed_ms").get<double>();
    cp.trace.rows.push_back(row);
  }
  return cp;
}

RunResult run_loop(Simulator& simulator, const RunConfig& config,
                   const std::optional<std::string>& checkpoint_path,
                   const std::optional<Checkpoint>& resume) {
  config.validate();
  const EnvModel env = config.make_env_model();
  const ExtremeSpec spec = config.make_spec();
  const int d_theta = param_dim(config.family);
  const SigmaPointSet sp = sigma_points(d_theta, config.effective_kappa(d_theta));
  const ImportanceSample is = draw_importance_samples(
      env, config.m_total, derive_seed(config.seed, kStreamImportance));

  Dataset data;
  data.family = config.family;
  DoeTrace trace;
  std::vector<ComponentHyperparams> hps;

  auto simulate_record = [&](const EnvPoint& x, int index) {
    const std::uint64_t s = derive_seed(config.seed, kStreamSimulate, index);
    std::vector<double> samples = simulator.sample(x, config.n_samples, s);
    MleResult fit = mle_fit(config.family, samples);
    Observation r;
    r.x = x;
    r.theta_obs = fit.theta;
    r.sigma = fit.sigma;
    r.n_samples = config.n_samples;
    r.seed = s;
    return r;
  };

  auto refit_due = [&](int records) {
    return records == config.k0 ||
           (records - config.k0) % config.refit_interval == 0;
  };

  GPosterior gp = [&] {
    if (resume) {
      data = resume->data;
      trace = resume->trace;
      hps = resume->hyperparams;
      return GPosterior::with_hyperparams(data, config.bounds, hps);
    }
    const auto design =
        initial_design(env, config.k0, derive_seed(config.seed, kStreamDesign));
    for (int i = 0; i < config.k0; ++i)
      data.records.push_back(simulate_record(design[i], i));
    GPosterior g = GPosterior::fit(
        data, config.bounds,
        derive_seed(config.seed, kStreamGpFit, data.records.size()));
    hps = g.hyperparams();
    return g;
  }();

  auto append_estimate_row = [&](int k, const EnvPoint& x, double s_k,
                                 const QoIEstimate& est, double elapsed_ms) {
    TraceRow row;
    row.k = k;
    row.x = x;
    row.s_k = s_k;
    row.h_k = est.variance;
    row.z_mean = est.mean;
    row.clamp_fraction = est.clamp_fraction;
    row.elapsed_ms = elapsed_ms;
    trace.rows.push_back(row);
    if (est.clamp_fraction > 0.01)
      std::cerr << "[exq] warning: clamp fraction " << est.clamp_fraction
                << " exceeds 1%\n";
  };

  QoIEstimate est;
  if (!resume) {
    const auto t0 = std::chrono::steady_clock::now();
    est = compute_H_k(gp, is, sp, spec);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    append_estimate_row(config.k0, EnvPoint(), std::numeric_limits<double>::quiet_NaN(),
                        est, ms);
    if (checkpoint_path)
      save_checkpoint({config, data, hps, trace, config.k0}, *checkpoint_path);
  } else {
    est = compute_H_k(gp, is, sp, spec);
  }

  int failures = 0;
  for (int k = static_cast<int>(data.records.size()); k < config.budget; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<EnvPoint> candidates = lhs_candidates(
        env, config.candidates, derive_seed(config.seed, kStreamCandidates, k));

    BatchPosterior batch = gp.evaluate(is.points);
    if (config.candidate_augment > 0) {
      // importance points with the largest weight x posterior-variance product
      std::vector<std::pair<double, int>> scored;
      for (int m = 0; m < is.size(); ++m)
        scored.emplace_back(-is.weights[m] * batch.var.row(m).sum(), m);
      std::sort(scored.begin(), scored.end());
      for (int a = 0; a < std::min<int>(config.candidate_augment, is.size()); ++a)
        candidates.push_back(is.point(scored[a].second));
    }

    std::vector<AcquisitionValue> values(candidates.size());
    std::exception_ptr error;
    std::mutex error_mutex;
    parallel_for(static_cast<int>(candidates.size()), [&](int i) {
      try {
        values[i] = acquisition(candidates[i], gp, batch, is, sp, spec, data);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
    if (error) std::rethrow_exception(error);

    Observation obs;
    double chosen_s = 0.0;
    EnvPoint chosen_x;
    while (true) {
      if (values.empty())
        throw SimulatorError("all candidates failed to simulate");
      const int idx = select_next(values);
      try {
        obs = simulate_record(values[idx].x, k);
        chosen_s = values[idx].s_k;
        chosen_x = values[idx].x;
        break;
      } catch (const SimulatorError& e) {
        std::cerr << "[exq] warning: simulator failed at a candidate ("
                  << e.what() << "); skipping it\n";
        values.erase(values.begin() + idx);
        if (++failures > 3)
          throw SimulatorError("simulator failed more than 3 times, aborting");
      } catch (const FitError& e) {
        std::cerr << "[exq] warning: MLE fit failed at a candidate ("
                  << e.what() << "); skipping it\n";
        values.erase(values.begin() + idx);
        if (++failures > 3)
          throw SimulatorError("experiments failed more than 3 times, aborting");
      }
    }

    data.records.push_back(obs);
    const int records = static_cast<int>(data.records.size());
    if (refit_due(records)) {
      gp = GPosterior::fit(data, config.bounds,
                           derive_seed(config.seed, kStreamGpFit, records));
      hps = gp.hyperparams();
    } else {
      gp = GPosterior::with_hyperparams(data, config.bounds, hps);
    }
    est = compute_H_k(gp, is, sp, spec);
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    append_estimate_row(records, chosen_x, chosen_s, est, ms);
    if (checkpoint_path)
      save_checkpoint({config, data, hps, trace, records}, *checkpoint_path);
  }

  return {data, trace, est, hps};
}

QoIEstimate estimate_from_dataset(
    const Dataset& data, const RunConfig& config,
    const std::optional<std::vector<ComponentHyperparams>>& hyperparams) {
  if (data.records.empty()) throw InputError("estimate: empty dataset");
  if (data.family != config.family)
    throw InputError("estimate: dataset family does not match config");
  const EnvModel env = config.make_env_model();
  const ExtremeSpec spec = config.make_spec();
  const int d_theta = param_dim(config.family);
  const SigmaPointSet sp = sigma_points(d_theta, config.effective_kappa(d_theta));
  const ImportanceSample is = draw_importance_samples(
      env, config.m_total, derive_seed(config.seed, kStreamImportance));
  GPosterior gp =
      hyperparams
          ? GPosterior::with_hyperparams(data, config.bounds, *hyperparams)
          : GPosterior::fit(data, config.bounds,
                            derive_seed(config.seed, kStreamGpFit,
                                        data.records.size()));
  return compute_H_k(gp, is, sp, spec);
}

}  // namespace exq
