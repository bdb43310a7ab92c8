#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "exq/env_model.hpp"
#include "exq/extreme.hpp"
#include "exq/family.hpp"

namespace exq {

// Every free constant of a run, read from one flat JSON document.
// Unknown keys are errors.
struct RunConfig {
  Family family = Family::weibull;
  double p = 0.5;
  double n_years = 1.0;
  double t_s_hours = 8.766;
  std::int64_t m_total = 20000;
  double c = 0.0;  // <= 0 requests the grid-quantile proposal
  Box bounds;
  double kappa = std::numeric_limits<double>::quiet_NaN();  // NaN -> default
  int k0 = 10;
  int budget = 30;
  int candidates = 200;
  int candidate_augment = 0;
  int n_samples = 200;
  int refit_interval = 5;
  std::uint64_t seed = 0;
  std::string simulator;  // "fixture-A" | "fixture-B" | "cmd:<command>"
  std::string env;        // "" -> from fixture simulator; or "fixture-A"/"fixture-B"/"uniform"
  double timeout_s = 600.0;

  void validate() const;
  EnvModel make_env_model() const;  // resolves env + threshold proposal
  ExtremeSpec make_spec() const { return ExtremeSpec::make(n_years, t_s_hours, p); }
  double effective_kappa(int d_theta) const;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);

}  // namespace exq
