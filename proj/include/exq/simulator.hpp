#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "exq/fixtures.hpp"

namespace exq {

// Source of short-term response samples at a given environment point.
class Simulator {
 public:
  virtual ~Simulator() = default;
  virtual std::vector<double> sample(const EnvPoint& x, int n_samples,
                                     std::uint64_t seed) = 0;
};

// Samples the fixture's parametric response at true_theta(x).
class FixtureSimulator final : public Simulator {
 public:
  explicit FixtureSimulator(SyntheticProblem problem)
      : problem_(std::move(problem)) {}
  std::vector<double> sample(const EnvPoint& x, int n_samples,
                             std::uint64_t seed) override;

 private:
  SyntheticProblem problem_;
};

// Spawns the configured command once per request. Protocol: one JSON request
// line {"x":[...],"n_samples":n,"seed":s} on stdin, one JSON response line
// {"samples":[...]} with exactly n finite reals on stdout.
class ExternalSimulator final : public Simulator {
 public:
  explicit ExternalSimulator(std::string command, double timeout_s = 600.0)
      : command_(std::move(command)), timeout_s_(timeout_s) {}
  std::vector<double> sample(const EnvPoint& x, int n_samples,
                             std::uint64_t seed) override;

 private:
  std::string command_;
  double timeout_s_;
};

// "fixture-A", "fixture-B", or "cmd:<shell command>".
std::unique_ptr<Simulator> make_simulator(const std::string& spec,
                                          double timeout_s = 600.0);

// Serve the fixture over the line protocol on stdin/stdout (the sim-stub
// subcommand); returns the process exit code.
int serve_fixture_protocol(const SyntheticProblem& problem);

}  // namespace exq
