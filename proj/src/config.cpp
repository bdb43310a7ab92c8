#include "exq/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "exq/fixtures.hpp"
#include "exq/ut.hpp"

namespace exq {

using nlohmann::json;

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw InputError("config field '" + field + "': " + why);
  };
  if (!(p > 0.0 && p < 1.0)) fail("p", "must be in (0,1)");
  if (!(n_years > 0.0)) fail("n_years", "must be > 0");
  if (!(t_s_hours > 0.0)) fail("t_s_hours", "must be > 0");
  if (m_total < 1) fail("m_total", "must be >= 1");
  if (k0 < 2) fail("k0", "must be >= 2");
  if (budget < k0) fail("budget", "must be >= k0");
  if (candidates < 1) fail("candidates", "must be >= 1");
  if (candidate_augment < 0) fail("candidate_augment", "must be >= 0");
  if (n_samples < param_dim(family) + 1)
    fail("n_samples", "must exceed the family parameter dimension");
  if (refit_interval < 1) fail("refit_interval", "must be >= 1");
  if (!(timeout_s > 0.0)) fail("timeout_s", "must be > 0");
  if (simulator.empty()) fail("simulator", "required");
  bounds.validate();
  if (!std::isnan(kappa) && !(param_dim(family) + kappa > 0.0))
    fail("kappa", "needs dim(theta) + kappa > 0");
  make_spec();  // range-checks N
}

double RunConfig::effective_kappa(int d_theta) const {
  return std::isnan(kappa) ? default_kappa(d_theta) : kappa;
}

EnvModel RunConfig::make_env_model() const {
  std::string env_name = env;
  if (env_name.empty()) {
    if (simulator.rfind("cmd:", 0) == 0)
      throw InputError("config field 'env': required with an external simulator");
    env_name = simulator;
  }
  EnvModel model;
  if (env_name == "uniform") {
    model.density = std::make_shared<UniformBoxDensity>(bounds);
    model.bounds = bounds;
  } else {
    model = fixture_by_name(env_name).env;
    model.bounds = bounds;  // config bounds win
  }
  if (c > 0.0) model.threshold = c;
  if (!(model.threshold > 0.0)) model.threshold = propose_threshold(model);
  model.validate();
  return model;
}

namespace {

const std::set<std::string> kKnownKeys = {
    "family", "p", "n_years", "t_s_hours", "m_total", "c", "bounds", "kappa",
    "k0", "budget", "candidates", "candidate_augment", "n_samples",
    "refit_interval", "seed", "simulator", "env", "timeout_s"};

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!kKnownKeys.count(it.key()))
      throw InputError("config: unknown key '" + it.key() + "'");

  RunConfig c;
  auto get = [&](const char* key, auto& dst, bool required) {
    if (j.contains(key)) {
      try {
        dst = j.at(key).get<std::decay_t<decltype(dst)>>();
      } catch (const json::exception&) {
        throw InputError(std::string("config field '") + key + "': wrong type");
      }
    } else if (required) {
      throw InputError(std::string("config field '") + key + "': required");
    }
  };
  std::string family_name = "weibull";
  get("family", family_name, true);
  c.family = family_from_string(family_name);
  get("p", c.p, true);
  get("n_years", c.n_years, true);
  get("t_s_hours", c.t_s_hours, true);
  get("m_total", c.m_total, false);
  get("c", c.c, false);
  get("kappa", c.kappa, false);
  get("k0", c.k0, false);
  get("budget", c.budget, false);
  get("candidates", c.candidates, false);
  get("candidate_augment", c.candidate_augment, false);
  get("n_samples", c.n_samples, false);
  get("refit_interval", c.refit_interval, false);
  get("seed", c.seed, false);
  get("simulator", c.simulator, true);
  get("env", c.env, false);
  get("timeout_s", c.timeout_s, false);

  if (!j.contains("bounds"))
    throw InputError("config field 'bounds': required");
  const auto& jb = j.at("bounds");
  if (!jb.is_array() || jb.empty())
    throw InputError("config field 'bounds': must be an array of [lo, hi] pairs");
  const int d = static_cast<int>(jb.size());
  c.bounds.lo.resize(d);
  c.bounds.hi.resize(d);
  for (int i = 0; i < d; ++i) {
    if (!jb[i].is_array() || jb[i].size() != 2)
      throw InputError("config field 'bounds': entry must be [lo, hi]");
    c.bounds.lo[i] = jb[i][0].get<double>();
    c.bounds.hi[i] = jb[i][1].get<double>();
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["family"] = family_to_string(c.family);
  j["p"] = c.p;
  j["n_years"] = c.n_years;
  j["t_s_hours"] = c.t_s_hours;
  j["m_total"] = c.m_total;
  if (c.c > 0.0) j["c"] = c.c;
  if (!std::isnan(c.kappa)) j["kappa"] = c.kappa;
  j["k0"] = c.k0;
  j["budget"] = c.budget;
  j["candidates"] = c.candidates;
  j["candidate_augment"] = c.candidate_augment;
  j["n_samples"] = c.n_samples;
  j["refit_interval"] = c.refit_interval;
  j["seed"] = c.seed;
  j["simulator"] = c.simulator;
  if (!c.env.empty()) j["env"] = c.env;
  j["timeout_s"] = c.timeout_s;
  json jb = json::array();
  for (int i = 0; i < c.bounds.dim(); ++i)
    jb.push_back({c.bounds.lo[i], c.bounds.hi[i]});
  j["bounds"] = jb;
  return j.dump(2);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  out << run_config_to_json(config) << "\n";
}

}  // namespace exq
