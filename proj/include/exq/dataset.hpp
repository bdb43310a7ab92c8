#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "exq/env_model.hpp"
#include "exq/family.hpp"

namespace exq {

// One logged experiment: input, fitted parameters, and their covariance.
struct Observation {
  EnvPoint x;
  ParamVector theta_obs;
  Eigen::MatrixXd sigma;  // full, symmetric PSD; the GP consumes its diagonal
  int n_samples = 0;
  std::uint64_t seed = 0;

  Eigen::VectorXd sigma_diag() const { return sigma.diagonal(); }
};

struct Dataset {
  Family family = Family::weibull;
  std::vector<Observation> records;

  std::size_t size() const { return records.size(); }
  void validate() const;
};

// Line-delimited JSON, one observation per line.
void save_dataset_jsonl(const Dataset& data, const std::string& path);
Dataset load_dataset_jsonl(const std::string& path);

}  // namespace exq
