#include <doctest.h>

#include <cmath>
#include <memory>

#include "exq/oracle.hpp"

using namespace exq;

namespace {

// effectively a single environment point: a vanishingly small uniform box
SyntheticProblem degenerate_exponential(double beta, double p,
                                        double n_years, double t_s) {
  Box b;
  b.lo = Eigen::VectorXd::Constant(1, 1.0);
  b.hi = Eigen::VectorXd::Constant(1, 1.0 + 1e-9);
  SyntheticProblem prob;
  prob.name = "degenerate";
  prob.env.density = std::make_shared<UniformBoxDensity>(b);
  prob.env.bounds = b;
  prob.env.threshold = 1e-3;
  prob.family = Family::exponential;
  prob.true_theta = [beta](const EnvPoint&) {
    return Eigen::VectorXd::Constant(1, beta);
  };
  prob.spec = ExtremeSpec::make(n_years, t_s, p);
  return prob;
}

}  // namespace

TEST_CASE("degenerate environment reproduces the closed form") {
  SyntheticProblem prob = degenerate_exponential(1.0, 0.5, 1.0, 8.766);
  REQUIRE(prob.spec.n_periods == 1000);
  const double closed = -std::log(1.0 - std::pow(0.5, 1.0 / 1000.0));
  QuantileOracle o = mc_extreme_quantile(prob, 20000, 1);
  CHECK(o.ci_low < closed);
  CHECK(o.ci_high > closed);
  CHECK(o.value == doctest::Approx(closed).epsilon(0.01));
  CHECK(o.ci_low < o.value);
  CHECK(o.value < o.ci_high);
}

TEST_CASE("N=1 reduces to the marginal response quantile") {
  SyntheticProblem prob = degenerate_exponential(2.0, 0.9, 1.0, 8766.0);
  REQUIRE(prob.spec.n_periods == 1);
  QuantileOracle o = mc_extreme_quantile(prob, 40000, 2);
  const double marginal = quantile(Family::exponential,
                                   Eigen::VectorXd::Constant(1, 2.0), 0.9);
  CHECK(o.ci_low < marginal);
  CHECK(o.ci_high > marginal);
}

TEST_CASE("order-statistic CI covers the truth at the nominal rate") {
  // scaled-down coverage check: 40 independent runs, 95% CI each
  const double closed = -std::log(1.0 - std::pow(0.5, 1.0 / 100.0));
  SyntheticProblem prob = degenerate_exponential(1.0, 0.5, 1.0, 87.66);
  REQUIRE(prob.spec.n_periods == 100);
  int covered = 0;
  for (int run = 0; run < 40; ++run) {
    QuantileOracle o = mc_extreme_quantile(prob, 500, 1000 + run);
    if (o.ci_low <= closed && closed <= o.ci_high) ++covered;
  }
  CHECK(covered >= 32);  // binomial(40, 0.95) rarely dips this low
}

TEST_CASE("oracle is deterministic in the seed") {
  SyntheticProblem prob = fixture_b();
  QuantileOracle a = mc_extreme_quantile(prob, 500, 77);
  QuantileOracle b = mc_extreme_quantile(prob, 500, 77);
  CHECK(a.value == b.value);
  CHECK(a.ci_low == b.ci_low);
  QuantileOracle c = mc_extreme_quantile(prob, 500, 78);
  CHECK(a.value != c.value);
}

TEST_CASE("fixture A reference value, pinned") {
  // computed once from this oracle at R=20000, seed 123 and frozen as a
  // regression reference; an independent seed (124) gave 7.5471 with an
  // overlapping CI
  QuantileOracle o = mc_extreme_quantile(fixture_a(), 20000, 123);
  CHECK(o.value == doctest::Approx(7.55833823487421).epsilon(1e-12));
  CHECK(o.ci_low == doctest::Approx(7.544062462669109).epsilon(1e-12));
  CHECK(o.ci_high == doctest::Approx(7.570914580408558).epsilon(1e-12));
}

TEST_CASE("marginal cdf: degenerate environment matches the family cdf") {
  SyntheticProblem prob = degenerate_exponential(1.5, 0.5, 1.0, 8.766);
  for (double y : {0.5, 1.5, 4.0}) {
    CdfEstimate e = mc_marginal_cdf(prob, y, 200000, 5);
    const double exact =
        cdf(Family::exponential, Eigen::VectorXd::Constant(1, 1.5), y);
    CHECK(std::abs(e.value - exact) <= 3.0 * e.std_error + 1e-12);
  }
}

TEST_CASE("marginal cdf: below support and monotone") {
  SyntheticProblem prob = fixture_b();
  CdfEstimate z = mc_marginal_cdf(prob, -1.0, 10000, 3);
  CHECK(z.value == 0.0);
  double prev = -1.0;
  for (double y : {0.5, 1.5, 3.0, 6.0}) {
    CdfEstimate e = mc_marginal_cdf(prob, y, 50000, 4);
    CHECK(e.value >= prev);
    CHECK(e.std_error > 0.0);
    prev = e.value;
  }
}

TEST_CASE("environment sampler respects the density (fixture B)") {
  EnvModel env = fixture_b_env();
  Rng rng(9);
  const int n = 100000;
  int below = 0;
  for (int i = 0; i < n; ++i)
    if (sample_environment(env, rng)[0] <= 3.0) ++below;
  // x ~ Weibull(2, 3) truncated to [0, 12]: P(x <= 3) = 1 - e^{-1}
  CHECK(static_cast<double>(below) / n ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.01));
}

TEST_CASE("replication floor enforced") {
  CHECK_THROWS_AS(mc_extreme_quantile(fixture_b(), 50, 1), InputError);
}
