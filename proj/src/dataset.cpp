#include "exq/dataset.hpp"

#include <fstream>

#include <json.hpp>

namespace exq {

using nlohmann::json;

void Dataset::validate() const {
  const int d_theta = param_dim(family);
  int d_x = -1;
  for (const auto& r : records) {
    if (d_x < 0) d_x = static_cast<int>(r.x.size());
    if (r.x.size() != d_x)
      throw InputError("dataset: inconsistent input dimension");
    if (r.theta_obs.size() != d_theta)
      throw InputError("dataset: theta dimension does not match family");
    if (r.sigma.rows() != d_theta || r.sigma.cols() != d_theta)
      throw InputError("dataset: sigma dimension does not match family");
  }
}

void save_dataset_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for write: " + path);
  for (const auto& r : data.records) {
    json j;
    j["family"] = family_to_string(data.family);
    j["x"] = std::vector<double>(r.x.data(), r.x.data() + r.x.size());
    j["theta_obs"] = std::vector<double>(r.theta_obs.data(),
                                         r.theta_obs.data() + r.theta_obs.size());
    Eigen::VectorXd sd = r.sigma_diag();
    j["sigma_diag"] = std::vector<double>(sd.data(), sd.data() + sd.size());
    j["n_samples"] = r.n_samples;
    j["seed"] = r.seed;
    out << j.dump() << "\n";
  }
}

Dataset load_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset: " + path);
  Dataset data;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Family fam = family_from_string(j.at("family").get<std::string>());
    if (first) {
      data.family = fam;
      first = false;
    } else if (fam != data.family) {
      throw InputError("dataset: mixed families");
    }
    Observation r;
    auto xv = j.at("x").get<std::vector<double>>();
    auto tv = j.at("theta_obs").get<std::vector<double>>();
    auto sv = j.at("sigma_diag").get<std::vector<double>>();
    r.x = Eigen::Map<Eigen::VectorXd>(xv.data(), xv.size());
    r.theta_obs = Eigen::Map<Eigen::VectorXd>(tv.data(), tv.size());
    r.sigma = Eigen::Map<Eigen::VectorXd>(sv.data(), sv.size()).asDiagonal();
    r.n_samples = j.at("n_samples").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    data.records.push_back(std::move(r));
  }
  data.validate();
  return data;
}

}  // namespace exq
