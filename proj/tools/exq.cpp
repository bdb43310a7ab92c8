#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "exq/doe.hpp"
#include "exq/oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json estimate_to_json(const exq::QoIEstimate& est) {
  json j;
  j["z_mean"] = est.mean;
  j["H_k"] = est.variance;
  j["z_per_sigma"] = std::vector<double>(
      est.z_per_sigma.data(), est.z_per_sigma.data() + est.z_per_sigma.size());
  j["clamp_fraction"] = est.clamp_fraction;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw exq::InputError("cannot open for write: " + path.string());
  out << text;
}

std::string default_out_dir() {
  if (const char* env = std::getenv("EXQ_OUT_DIR")) return env;
  return "out";
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            bool resume) {
  fs::create_directories(out_dir);
  const fs::path checkpoint = fs::path(out_dir) / "checkpoint.json";

  exq::RunConfig config;
  std::optional<exq::Checkpoint> resume_state;
  if (resume) {
    exq::Checkpoint cp = exq::load_checkpoint(checkpoint.string());
    config = cp.config;
    resume_state = std::move(cp);
  } else {
    config = exq::load_run_config(config_path);
  }

  auto simulator = exq::make_simulator(config.simulator, config.timeout_s);
  exq::RunResult result =
      exq::run_loop(*simulator, config, checkpoint.string(), resume_state);

  exq::save_dataset_jsonl(result.data, (fs::path(out_dir) / "dataset.jsonl").string());
  exq::write_trace_csv(result.trace, config.bounds.dim(),
                       (fs::path(out_dir) / "trace.csv").string());
  write_text(fs::path(out_dir) / "estimate.json",
             estimate_to_json(result.estimate).dump(2) + "\n");
  std::cout << estimate_to_json(result.estimate).dump() << "\n";
  return 0;
}

int cmd_estimate(const std::string& dataset_path, const std::string& config_path,
                 const std::string& checkpoint_path) {
  exq::RunConfig config = exq::load_run_config(config_path);
  exq::Dataset data = exq::load_dataset_jsonl(dataset_path);
  std::optional<std::vector<exq::ComponentHyperparams>> hp;
  if (!checkpoint_path.empty())
    hp = exq::load_checkpoint(checkpoint_path).hyperparams;
  exq::QoIEstimate est = exq::estimate_from_dataset(data, config, hp);
  std::cout << estimate_to_json(est).dump() << "\n";
  return 0;
}

int cmd_oracle(const std::string& fixture, int replications, std::uint64_t seed,
               double n_years, double t_s_hours, double p) {
  exq::SyntheticProblem problem = exq::fixture_by_name(fixture);
  if (n_years > 0.0 || t_s_hours > 0.0 || p > 0.0) {
    problem.spec = exq::ExtremeSpec::make(
        n_years > 0.0 ? n_years : problem.spec.n_years,
        t_s_hours > 0.0 ? t_s_hours : problem.spec.t_s_hours,
        p > 0.0 ? p : problem.spec.p);
  }
  exq::QuantileOracle result = exq::mc_extreme_quantile(problem, replications, seed);
  json j;
  j["value"] = result.value;
  j["ci_low"] = result.ci_low;
  j["ci_high"] = result.ci_high;
  j["replications"] = result.replications;
  j["seed"] = result.seed;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_init_design(const std::string& config_path, const std::string& out_path) {
  exq::RunConfig config = exq::load_run_config(config_path);
  const exq::EnvModel env = config.make_env_model();
  auto design = exq::initial_design(env, config.k0,
                                    exq::derive_seed(config.seed, 2));
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < env.dim(); ++i) os << (i ? "," : "") << "x_" << (i + 1);
  os << "\n";
  for (const auto& x : design) {
    for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
    os << "\n";
  }
  if (out_path.empty() || out_path == "-")
    std::cout << os.str();
  else
    write_text(out_path, os.str());
  return 0;
}

std::vector<exq::EnvPoint> read_candidate_csv(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw exq::InputError("cannot open candidates: " + path);
  std::vector<exq::EnvPoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> vals;
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric) continue;  // header
    if (static_cast<int>(vals.size()) != d)
      throw exq::InputError("candidate row has wrong dimension");
    points.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), d));
  }
  if (points.empty()) throw exq::InputError("no candidates in " + path);
  return points;
}

int cmd_acquire(const std::string& config_path, const std::string& dataset_path,
                const std::string& candidates_path,
                const std::string& checkpoint_path) {
  exq::RunConfig config = exq::load_run_config(config_path);
  exq::Dataset data = exq::load_dataset_jsonl(dataset_path);
  const exq::EnvModel env = config.make_env_model();
  const exq::ExtremeSpec spec = config.make_spec();
  const int d_theta = exq::param_dim(config.family);
  const auto sp = exq::sigma_points(d_theta, config.effective_kappa(d_theta));
  const auto is = exq::draw_importance_samples(
      env, config.m_total, exq::derive_seed(config.seed, 1));
  exq::GPosterior gp =
      checkpoint_path.empty()
          ? exq::GPosterior::fit(data, config.bounds,
                                 exq::derive_seed(config.seed, 4,
                                                  data.records.size()))
          : exq::GPosterior::with_hyperparams(
                data, config.bounds,
                exq::load_checkpoint(checkpoint_path).hyperparams);
  auto candidates = read_candidate_csv(candidates_path, config.bounds.dim());
  exq::BatchPosterior batch = gp.evaluate(is.points);

  std::vector<exq::AcquisitionValue> values(candidates.size());
  exq::parallel_for(static_cast<int>(candidates.size()), [&](int i) {
    values[i] = exq::acquisition(candidates[i], gp, batch, is, sp, spec, data);
  });
  std::cout.precision(17);
  for (int i = 0; i < config.bounds.dim(); ++i) std::cout << "x_" << (i + 1) << ",";
  std::cout << "s_k\n";
  for (const auto& v : values) {
    for (int i = 0; i < v.x.size(); ++i) std::cout << v.x[i] << ",";
    std::cout << v.s_k << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-term extreme response quantile estimation with a GP "
               "surrogate and sequential design of experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir(), dataset_path,
              checkpoint_path, candidates_path, fixture = "fixture-A",
              design_out;
  bool resume = false;
  int replications = 1000;
  std::uint64_t seed = 0;
  double n_years = 0.0, t_s_hours = 0.0, p = 0.0;

  auto* run = app.add_subcommand("run", "Run the full DOE loop");
  run->add_option("--config", config_path, "Run config JSON");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--resume", resume, "Continue from <out>/checkpoint.json");

  auto* estimate =
      app.add_subcommand("estimate", "One-shot estimate from a dataset");
  estimate->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  estimate->add_option("--config", config_path, "Run config JSON")->required();
  estimate->add_option("--checkpoint", checkpoint_path,
                       "Reuse GP hyperparameters from this checkpoint");

  auto* oracle = app.add_subcommand("oracle", "Brute-force Monte Carlo quantile");
  oracle->add_option("--fixture", fixture, "fixture-A or fixture-B");
  oracle->add_option("--replications", replications, "Replications (>= 100)");
  oracle->add_option("--seed", seed, "Seed");
  oracle->add_option("--n-years", n_years, "Override N_y");
  oracle->add_option("--t-s-hours", t_s_hours, "Override T_s");
  oracle->add_option("--p", p, "Override p");

  auto* init = app.add_subcommand("init-design", "Emit the initial design");
  init->add_option("--config", config_path, "Run config JSON")->required();
  init->add_option("--out", design_out, "CSV path (default stdout)");

  auto* acquire = app.add_subcommand("acquire", "Score a candidate file");
  acquire->add_option("--config", config_path, "Run config JSON")->required();
  acquire->add_option("--dataset", dataset_path, "Dataset JSONL")->required();
  acquire->add_option("--candidates", candidates_path, "Candidate CSV")->required();
  acquire->add_option("--checkpoint", checkpoint_path,
                      "Reuse GP hyperparameters from this checkpoint");

  auto* stub = app.add_subcommand(
      "sim-stub", "Serve a builtin fixture over the line protocol");
  stub->add_option("--fixture", fixture, "fixture-A or fixture-B");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!resume && config_path.empty())
        throw exq::InputError("run: --config is required unless --resume is set");
      return cmd_run(config_path, out_dir, resume);
    }
    if (estimate->parsed())
      return cmd_estimate(dataset_path, config_path, checkpoint_path);
    if (oracle->parsed())
      return cmd_oracle(fixture, replications, seed, n_years, t_s_hours, p);
    if (init->parsed()) return cmd_init_design(config_path, design_out);
    if (acquire->parsed())
      return cmd_acquire(config_path, dataset_path, candidates_path,
                         checkpoint_path);
    if (stub->parsed())
      return exq::serve_fixture_protocol(exq::fixture_by_name(fixture));
  } catch (const exq::SimulatorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const exq::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
