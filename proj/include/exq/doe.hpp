#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "exq/config.hpp"
#include "exq/dataset.hpp"
#include "exq/extreme.hpp"
#include "exq/simulator.hpp"

namespace exq {

// Noise heuristic: the sigma diagonal of the dataset record nearest to x in
// standardized Euclidean norm; ties break to the lowest record index.
Eigen::VectorXd sigma_tilde(const EnvPoint& x, const Dataset& data,
                            const Box& bounds);

struct AcquisitionValue {
  EnvPoint x;
  double s_k = 0.0;
  Eigen::VectorXd per_sigma_h;  // H_{k+1,q}
};

// Expected posterior variance of the quantile after a hypothetical
// experiment at x: sigma points of theta at x, one fantasy conditioning per
// sigma point, UT average of the resulting H values.
AcquisitionValue acquisition(const EnvPoint& x, const GPosterior& gp,
                             const BatchPosterior& batch,
                             const ImportanceSample& is,
                             const SigmaPointSet& sp, const ExtremeSpec& spec,
                             const Dataset& data);

// Monte Carlo cross-check of the UT expectation: theta drawn from the GP
// posterior at x instead of sigma points. Validation only.
double acquisition_mc(const EnvPoint& x, const GPosterior& gp,
                      const BatchPosterior& batch, const ImportanceSample& is,
                      const SigmaPointSet& sp, const ExtremeSpec& spec,
                      const Dataset& data, int n_draws, std::uint64_t seed);

// Maximin-improved Latin hypercube over V, filtered to the practical
// support f_x > c. Deterministic given seed.
std::vector<EnvPoint> initial_design(const EnvModel& env, int k0,
                                     std::uint64_t seed);

// Fresh LHS candidate set inside the practical support.
std::vector<EnvPoint> lhs_candidates(const EnvModel& env, int count,
                                     std::uint64_t seed);

// Index of the acquisition argmin; ties break to the lowest index.
int select_next(const std::vector<AcquisitionValue>& values);

struct TraceRow {
  int k = 0;
  EnvPoint x;  // empty on the initial-design row
  double s_k = std::numeric_limits<double>::quiet_NaN();
  double h_k = 0.0;
  double z_mean = 0.0;
  double clamp_fraction = 0.0;
  double elapsed_ms = 0.0;
};

struct DoeTrace {
  std::vector<TraceRow> rows;
};

void write_trace_csv(const DoeTrace& trace, int d_x, const std::string& path);

struct RunResult {
  Dataset data;
  DoeTrace trace;
  QoIEstimate estimate;
  std::vector<ComponentHyperparams> hyperparams;
};

// Checkpoint for resumable runs: everything needed to continue at k.
struct Checkpoint {
  RunConfig config;
  Dataset data;
  std::vector<ComponentHyperparams> hyperparams;
  DoeTrace trace;
  int k = 0;
};

void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// The sequential experiment loop. When checkpoint_path is set, state is
// written there after every iteration; when resume is set, the loop
// continues from that state instead of starting fresh.
RunResult run_loop(Simulator& simulator, const RunConfig& config,
                   const std::optional<std::string>& checkpoint_path = {},
                   const std::optional<Checkpoint>& resume = {});

// Parallel map over candidate indices, EXQ_THREADS or hardware concurrency.
void parallel_for(int n, const std::function<void(int)>& body);

// One-shot estimate from an existing dataset under the run conventions:
// same importance-sample stream, same GP fit seed for this record count.
// When hyperparameters are supplied (e.g. from a checkpoint) they are used
// as-is instead of refitting.
QoIEstimate estimate_from_dataset(
    const Dataset& data, const RunConfig& config,
    const std::optional<std::vector<ComponentHyperparams>>& hyperparams = {});

}  // namespace exq
