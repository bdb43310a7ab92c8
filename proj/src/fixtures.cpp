#include "exq/fixtures.hpp"

namespace exq {

EnvModel fixture_a_env() {
  EnvModel env;
  env.density = std::make_shared<HierarchicalDensity>(1.5, 3.0, 0.5, 0.2, 0.15, 0.05);
  env.bounds.lo = Eigen::Vector2d(0.0, 0.0);
  env.bounds.hi = Eigen::Vector2d(15.0, 8.0);
  env.threshold = 1e-5;
  env.axis_labels = {"hs_m", "tp_s"};
  return env;
}

SyntheticProblem fixture_a() {
  SyntheticProblem p;
  p.name = "fixture-A";
  p.env = fixture_a_env();
  p.family = Family::weibull;
  Box bounds = p.env.bounds;
  p.true_theta = [bounds](const EnvPoint& x) {
    EnvPoint z = bounds.standardize(x);
    ParamVector t(2);
    t << 1.5 + 0.3 * z[0], 2.0 + 0.5 * z[0] * z[0] + 0.3 * z[1];
    return t;
  };
  // T_s = 8.766 h makes one year exactly 1000 periods
  p.spec = ExtremeSpec::make(1.0, 8.766, 0.5);
  return p;
}

EnvModel fixture_b_env() {
  EnvModel env;
  env.density = std::make_shared<ProductDensity>(
      std::vector<Marginal>{{Marginal::Kind::weibull, 2.0, 3.0}});
  env.bounds.lo = Eigen::VectorXd::Constant(1, 0.0);
  env.bounds.hi = Eigen::VectorXd::Constant(1, 12.0);
  env.threshold = 1e-6;
  env.axis_labels = {"x"};
  return env;
}

SyntheticProblem fixture_b() {
  SyntheticProblem p;
  p.name = "fixture-B";
  p.env = fixture_b_env();
  p.family = Family::exponential;
  p.true_theta = [](const EnvPoint& x) {
    ParamVector t(1);
    const double z = x[0] / 12.0;
    t << 0.5 + 2.0 * z * z;
    return t;
  };
  p.spec = ExtremeSpec::make(1.0, 8.766, 0.5);
  return p;
}

SyntheticProblem fixture_by_name(const std::string& name) {
  if (name == "fixture-A" || name == "fixture-a") return fixture_a();
  if (name == "fixture-B" || name == "fixture-b") return fixture_b();
  throw InputError("unknown fixture: " + name);
}

}  // namespace exq
