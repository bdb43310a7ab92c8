#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "exq/simulator.hpp"

using namespace exq;
namespace fs = std::filesystem;

namespace {

std::string exq_bin() {
  const char* bin = std::getenv("EXQ_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "EXQ_BIN must point at the exq binary");
  return bin;
}

int run_cmd(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_config_b(const fs::path& path, int budget, int refit_interval,
                    unsigned seed) {
  std::ofstream out(path);
  out << R"({"family":"exponential","p":0.5,"n_years":1.0,"t_s_hours":8.766,)"
      << R"("m_total":2000,"c":1e-6,"bounds":[[0,12]],"k0":4,"budget":)"
      << budget << R"(,"candidates":16,"n_samples":100,"refit_interval":)"
      << refit_interval << R"(,"seed":)" << seed
      << R"(,"simulator":"fixture-B","env":"fixture-B"})" << "\n";
}

// trace with the timing column stripped, for byte comparison
std::string trace_without_timing(const fs::path& p) {
  std::ifstream in(p);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    out += line.substr(0, cut);
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("run produces the full artifact set") {
  fs::path dir = fresh_dir("exq_cli_run");
  fs::path cfg = dir / "config.json";
  write_config_b(cfg, 7, 2, 11);
  const int rc = run_cmd(exq_bin() + " run --config " + cfg.string() +
                         " --out " + (dir / "out").string() + " > /dev/null");
  CHECK(rc == 0);
  for (const char* name :
       {"dataset.jsonl", "trace.csv", "estimate.json", "checkpoint.json"})
    CHECK_MESSAGE(fs::exists(dir / "out" / name), name);
  const std::string est = read_file(dir / "out" / "estimate.json");
  CHECK(est.find("z_mean") != std::string::npos);
  CHECK(est.find("H_k") != std::string::npos);
  CHECK(est.find("z_per_sigma") != std::string::npos);
  CHECK(est.find("clamp_fraction") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  fs::path dir = fresh_dir("exq_cli_repro");
  fs::path cfg = dir / "config.json";
  write_config_b(cfg, 7, 2, 19);
  for (const char* out : {"a", "b"}) {
    REQUIRE(run_cmd(exq_bin() + " run --config " + cfg.string() + " --out " +
                    (dir / out).string() + " > /dev/null") == 0);
  }
  CHECK(read_file(dir / "a" / "dataset.jsonl") ==
        read_file(dir / "b" / "dataset.jsonl"));
  CHECK(read_file(dir / "a" / "estimate.json") ==
        read_file(dir / "b" / "estimate.json"));
  CHECK(trace_without_timing(dir / "a" / "trace.csv") ==
        trace_without_timing(dir / "b" / "trace.csv"));
  CHECK_FALSE(trace_without_timing(dir / "a" / "trace.csv").empty());
  fs::remove_all(dir);
}

TEST_CASE("resume continues to identical results") {
  fs::path dir = fresh_dir("exq_cli_resume");
  fs::path cfg_full = dir / "full.json";
  fs::path cfg_part = dir / "part.json";
  write_config_b(cfg_full, 8, 2, 23);
  write_config_b(cfg_part, 6, 2, 23);
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg_full.string() +
                  " --out " + (dir / "full").string() + " > /dev/null") == 0);
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg_part.string() +
                  " --out " + (dir / "part").string() + " > /dev/null") == 0);
  // raise the budget inside the checkpoint, then resume
  fs::path cp = dir / "part" / "checkpoint.json";
  std::string text = read_file(cp);
  const std::string needle = "\"budget\":6";
  auto posn = text.find(needle);
  REQUIRE(posn != std::string::npos);
  text.replace(posn, needle.size(), "\"budget\":8");
  std::ofstream(cp) << text;
  REQUIRE(run_cmd(exq_bin() + " run --resume --out " +
                  (dir / "part").string() + " > /dev/null") == 0);
  CHECK(read_file(dir / "full" / "dataset.jsonl") ==
        read_file(dir / "part" / "dataset.jsonl"));
  CHECK(read_file(dir / "full" / "estimate.json") ==
        read_file(dir / "part" / "estimate.json"));
  CHECK(trace_without_timing(dir / "full" / "trace.csv") ==
        trace_without_timing(dir / "part" / "trace.csv"));
  fs::remove_all(dir);
}

TEST_CASE("estimate matches the final trace row of a finished run") {
  fs::path dir = fresh_dir("exq_cli_estimate");
  fs::path cfg = dir / "config.json";
  write_config_b(cfg, 7, 1, 29);
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg.string() + " --out " +
                  (dir / "out").string() + " > /dev/null") == 0);
  REQUIRE(run_cmd(exq_bin() + " estimate --dataset " +
                  (dir / "out" / "dataset.jsonl").string() + " --config " +
                  cfg.string() + " > " + (dir / "est.json").string()) == 0);
  const std::string est = read_file(dir / "est.json");
  // pull z_mean out of both JSON blobs
  auto grab = [](const std::string& text, const std::string& key) {
    auto pos = text.find('"' + key + '"');
    REQUIRE(pos != std::string::npos);
    pos = text.find(':', pos) + 1;
    return std::stod(text.substr(pos));
  };
  const std::string run_est = read_file(dir / "out" / "estimate.json");
  CHECK(grab(est, "z_mean") ==
        doctest::Approx(grab(run_est, "z_mean")).epsilon(1e-9));
  CHECK(grab(est, "H_k") == doctest::Approx(grab(run_est, "H_k")).epsilon(1e-9));
  fs::remove_all(dir);
}

TEST_CASE("single-record dataset still yields an estimate") {
  fs::path dir = fresh_dir("exq_cli_single");
  fs::path cfg = dir / "config.json";
  write_config_b(cfg, 7, 2, 31);
  std::ofstream(dir / "one.jsonl")
      << R"({"x":[5.0],"theta_obs":[1.1],"sigma_diag":[0.01],)"
      << R"("n_samples":100,"seed":1,"family":"exponential"})" << "\n";
  REQUIRE(run_cmd(exq_bin() + " estimate --dataset " +
                  (dir / "one.jsonl").string() + " --config " + cfg.string() +
                  " > " + (dir / "est.json").string()) == 0);
  const std::string est = read_file(dir / "est.json");
  auto pos = est.find("\"H_k\":");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(est.substr(pos + 6)) > 0.0);
  fs::remove_all(dir);
}

TEST_CASE("invalid config exits 2 and names the field") {
  fs::path dir = fresh_dir("exq_cli_badcfg");
  fs::path cfg = dir / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({"family":"exponential","p":1.5,"n_years":1.0,"t_s_hours":8.766,)"
        << R"("m_total":2000,"c":1e-6,"bounds":[[0,12]],"k0":4,"budget":8,)"
        << R"("candidates":16,"n_samples":100,"refit_interval":2,"seed":1,)"
        << R"("simulator":"fixture-B","env":"fixture-B"})";
  }
  const int rc = run_cmd(exq_bin() + " run --config " + cfg.string() +
                         " --out " + (dir / "out").string() + " 2> " +
                         (dir / "err.txt").string());
  CHECK(rc == 2);
  CHECK(read_file(dir / "err.txt").find("p") != std::string::npos);

  SUBCASE("empty dataset also exits 2") {
    write_config_b(cfg, 7, 2, 1);
    std::ofstream(dir / "empty.jsonl").close();
    CHECK(run_cmd(exq_bin() + " estimate --dataset " +
                  (dir / "empty.jsonl").string() + " --config " + cfg.string() +
                  " > /dev/null 2>&1") == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("init-design and acquire round trip through files") {
  fs::path dir = fresh_dir("exq_cli_acquire");
  fs::path cfg = dir / "config.json";
  write_config_b(cfg, 7, 2, 37);
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg.string() + " --out " +
                  (dir / "out").string() + " > /dev/null") == 0);
  REQUIRE(run_cmd(exq_bin() + " init-design --config " + cfg.string() +
                  " --out " + (dir / "design.csv").string()) == 0);
  std::ifstream in(dir / "design.csv");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);  // header + k0 rows
  REQUIRE(run_cmd(exq_bin() + " acquire --config " + cfg.string() +
                  " --dataset " + (dir / "out" / "dataset.jsonl").string() +
                  " --candidates " + (dir / "design.csv").string() + " > " +
                  (dir / "scores.csv").string()) == 0);
  std::ifstream sc(dir / "scores.csv");
  lines = 0;
  while (std::getline(sc, line)) ++lines;
  CHECK(lines == 5);
  fs::remove_all(dir);
}

TEST_CASE("external simulator: contract stubs") {
  SUBCASE("fixed response of the right length is accepted") {
    ExternalSimulator sim("cat > /dev/null; echo '{\"samples\":[0.5,1.5,2.5]}'");
    auto v = sim.sample(Eigen::VectorXd::Constant(1, 2.0), 3, 7);
    REQUIRE(v.size() == 3);
    CHECK(v[0] == 0.5);
    CHECK(v[2] == 2.5);
  }
  SUBCASE("short sample vector is a simulator error") {
    ExternalSimulator sim("cat > /dev/null; echo '{\"samples\":[0.5,1.5]}'");
    CHECK_THROWS_AS(sim.sample(Eigen::VectorXd::Constant(1, 2.0), 3, 7),
                    SimulatorError);
  }
  SUBCASE("non-numeric payload is a simulator error") {
    ExternalSimulator sim("cat > /dev/null; echo '{\"samples\":[\"x\",1,2]}'");
    CHECK_THROWS_AS(sim.sample(Eigen::VectorXd::Constant(1, 2.0), 3, 7),
                    SimulatorError);
  }
  SUBCASE("nonzero exit is a simulator error") {
    ExternalSimulator sim("cat > /dev/null; exit 9");
    CHECK_THROWS_AS(sim.sample(Eigen::VectorXd::Constant(1, 2.0), 3, 7),
                    SimulatorError);
  }
  SUBCASE("timeout kills the child") {
    ExternalSimulator sim("sleep 30", 0.5);
    CHECK_THROWS_AS(sim.sample(Eigen::VectorXd::Constant(1, 2.0), 3, 7),
                    SimulatorError);
  }
}

TEST_CASE("subprocess stub equals in-process sampling") {
  ExternalSimulator wrapped("exec " + exq_bin() + " sim-stub --fixture fixture-B");
  FixtureSimulator direct(fixture_b());
  EnvPoint x = Eigen::VectorXd::Constant(1, 4.5);
  auto a = wrapped.sample(x, 50, 12345);
  auto b = direct.sample(x, 50, 12345);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("run with a subprocess simulator matches the builtin") {
  fs::path dir = fresh_dir("exq_cli_subproc");
  fs::path cfg_in = dir / "in.json";
  fs::path cfg_sub = dir / "sub.json";
  write_config_b(cfg_in, 6, 2, 41);
  {
    std::ofstream out(cfg_sub);
    out << R"({"family":"exponential","p":0.5,"n_years":1.0,"t_s_hours":8.766,)"
        << R"("m_total":2000,"c":1e-6,"bounds":[[0,12]],"k0":4,"budget":6,)"
        << R"("candidates":16,"n_samples":100,"refit_interval":2,"seed":41,)"
        << R"("simulator":"cmd:exec )" << exq_bin()
        << R"( sim-stub --fixture fixture-B","env":"fixture-B"})";
  }
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg_in.string() + " --out " +
                  (dir / "in").string() + " > /dev/null") == 0);
  REQUIRE(run_cmd(exq_bin() + " run --config " + cfg_sub.string() + " --out " +
                  (dir / "sub").string() + " > /dev/null") == 0);
  // identical simulators and seeds: identical data, identical estimates
  auto strip_simulator_line = [](const std::string& text) {
    return text;  // datasets do not record the simulator spec
  };
  CHECK(strip_simulator_line(read_file(dir / "in" / "dataset.jsonl")) ==
        strip_simulator_line(read_file(dir / "sub" / "dataset.jsonl")));
  CHECK(read_file(dir / "in" / "estimate.json") ==
        read_file(dir / "sub" / "estimate.json"));
  fs::remove_all(dir);
}

TEST_CASE("a simulator that keeps failing exits 3") {
  fs::path dir = fresh_dir("exq_cli_broken");
  fs::path cfg = dir / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({"family":"exponential","p":0.5,"n_years":1.0,"t_s_hours":8.766,)"
        << R"("m_total":2000,"c":1e-6,"bounds":[[0,12]],"k0":4,"budget":6,)"
        << R"("candidates":16,"n_samples":100,"refit_interval":2,"seed":43,)"
        << R"("simulator":"cmd:cat > /dev/null; exit 9","env":"fixture-B"})";
  }
  CHECK(run_cmd(exq_bin() + " run --config " + cfg.string() + " --out " +
                (dir / "out").string() + " > /dev/null 2>&1") == 3);
  fs::remove_all(dir);
}
