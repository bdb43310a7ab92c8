#include "exq/simulator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstring>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace exq {

using nlohmann::json;

std::vector<double> FixtureSimulator::sample(const EnvPoint& x, int n_samples,
                                             std::uint64_t seed) {
  if (n_samples < 1) throw InputError("simulate: n_samples must be >= 1");
  Rng rng(seed);
  ParamVector theta = problem_.true_theta(x);
  std::vector<double> out(n_samples);
  for (int i = 0; i < n_samples; ++i)
    out[i] = exq::sample(problem_.family, theta, rng);
  return out;
}

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (pipe(fd) != 0) throw SimulatorError("pipe() failed");
  }
  ~Pipe() {
    if (fd[0] >= 0) close(fd[0]);
    if (fd[1] >= 0) close(fd[1]);
  }
};

}  // namespace

std::vector<double> ExternalSimulator::sample(const EnvPoint& x, int n_samples,
                                              std::uint64_t seed) {
  json req;
  req["x"] = std::vector<double>(x.data(), x.data() + x.size());
  req["n_samples"] = n_samples;
  req["seed"] = seed;
  const std::string request = req.dump() + "\n";

  Pipe to_child, from_child;
  pid_t pid = fork();
  if (pid < 0) throw SimulatorError("fork() failed");
  if (pid == 0) {
    dup2(to_child.fd[0], STDIN_FILENO);
    dup2(from_child.fd[1], STDOUT_FILENO);
    close(to_child.fd[0]);
    close(to_child.fd[1]);
    close(from_child.fd[0]);
    close(from_child.fd[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), (char*)nullptr);
    _exit(127);
  }
  close(to_child.fd[0]);
  to_child.fd[0] = -1;
  close(from_child.fd[1]);
  from_child.fd[1] = -1;

  const char* p = request.data();
  std::size_t left = request.size();
  while (left > 0) {
    ssize_t n = write(to_child.fd[1], p, left);
    if (n <= 0) break;  // child may have exited; surface it below
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  close(to_child.fd[1]);
  to_child.fd[1] = -1;

  std::string response;
  char buf[4096];
  const int timeout_ms = static_cast<int>(timeout_s_ * 1000.0);
  bool timed_out = false;
  while (true) {
    pollfd pfd{from_child.fd[0], POLLIN, 0};
    int pr = poll(&pfd, 1, timeout_ms);
    if (pr == 0) {
      timed_out = true;
      break;
    }
    ssize_t n = read(from_child.fd[0], buf, sizeof(buf));
    if (n <= 0) break;
    response.append(buf, static_cast<std::size_t>(n));
    if (response.find('\n') != std::string::npos) break;
  }
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out)
    throw SimulatorError("simulator timed out after " +
                         std::to_string(timeout_s_) + " s");
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw SimulatorError("simulator exited with nonzero status");

  const auto eol = response.find('\n');
  std::string line = eol == std::string::npos ? response : response.substr(0, eol);
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    throw SimulatorError(std::string("malformed simulator response: ") + e.what());
  }
  if (!resp.contains("samples") || !resp["samples"].is_array())
    throw SimulatorError("simulator response missing samples array");
  std::vector<double> samples;
  try {
    samples = resp["samples"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw SimulatorError(std::string("malformed simulator response: ") + e.what());
  }
  if (static_cast<int>(samples.size()) != n_samples)
    throw SimulatorError("simulator returned " + std::to_string(samples.size()) +
                         " samples, expected " + std::to_string(n_samples));
  for (double v : samples)
    if (!std::isfinite(v)) throw SimulatorError("simulator returned non-finite sample");
  return samples;
}

std::unique_ptr<Simulator> make_simulator(const std::string& spec,
                                          double timeout_s) {
  if (spec.rfind("cmd:", 0) == 0)
    return std::make_unique<ExternalSimulator>(spec.substr(4), timeout_s);
  return std::make_unique<FixtureSimulator>(fixture_by_name(spec));
}

int serve_fixture_protocol(const SyntheticProblem& problem) {
  FixtureSimulator sim(problem);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    json req;
    try {
      req = json::parse(line);
      auto xv = req.at("x").get<std::vector<double>>();
      EnvPoint x = Eigen::Map<Eigen::VectorXd>(xv.data(), xv.size());
      const int n = req.at("n_samples").get<int>();
      const auto seed = req.at("seed").get<std::uint64_t>();
      json resp;
      resp["samples"] = sim.sample(x, n, seed);
      std::cout << resp.dump() << "\n" << std::flush;
    } catch (const std::exception& e) {
      std::cerr << "sim-stub: " << e.what() << "\n";
      return 1;
    }
  }
  return 0;
}

}  // namespace exq
