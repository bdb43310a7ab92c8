#include <doctest.h>

#include <cmath>
#include <vector>

#include "exq/family.hpp"

using namespace exq;

namespace {
ParamVector theta1(double a) {
  ParamVector t(1);
  t << a;
  return t;
}
ParamVector theta2(double a, double b) {
  ParamVector t(2);
  t << a, b;
  return t;
}
}  // namespace

TEST_CASE("cdf closed forms") {
  CHECK(cdf(Family::weibull, theta2(1, 1), 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(cdf(Family::weibull, theta2(2, 3), 0.0) == 0.0);
  CHECK(cdf(Family::weibull, theta2(2, 3), -1.0) == 0.0);
  CHECK(cdf(Family::gumbel, theta2(0, 1), 0.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(cdf(Family::exponential, theta1(2.0), 2.0 * std::log(2.0)) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("survival avoids tail underflow and cancellation") {
  CHECK(survival(Family::weibull, theta2(1, 1), 40.0) ==
        doctest::Approx(std::exp(-40.0)).epsilon(1e-13));
  // e^{-600} ~ 2.6e-261: representable, must not round to 0
  CHECK(survival(Family::weibull, theta2(1, 1), 600.0) > 0.0);
  CHECK(survival(Family::gumbel, theta2(0, 1), 50.0) ==
        doctest::Approx(std::exp(-50.0)).epsilon(1e-10));
}

TEST_CASE("quantile closed forms and round trips") {
  CHECK(quantile(Family::weibull, theta2(1, 1), 0.5) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  for (Family f : {Family::exponential, Family::weibull, Family::gumbel}) {
    ParamVector t = f == Family::exponential ? theta1(1.7) : theta2(1.3, 2.1);
    for (double p : {1e-9, 1e-3, 0.5, 0.99, 1.0 - 1e-9}) {
      const double y = quantile(f, t, p);
      CHECK(survival(f, t, y) == doctest::Approx(1.0 - p).epsilon(1e-9));
      const double eps = 1.0 - p;
      CHECK(survival(f, t, inverse_survival(f, t, eps)) ==
            doctest::Approx(eps).epsilon(1e-9));
    }
  }
}

TEST_CASE("cdf plus survival is one away from the far tail") {
  ParamVector t = theta2(1.8, 2.5);
  for (double y : {0.1, 1.0, 2.5, 5.0}) {
    CHECK(cdf(Family::weibull, t, y) + survival(Family::weibull, t, y) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cdf is monotone") {
  for (Family f : {Family::exponential, Family::weibull, Family::gumbel}) {
    ParamVector t = f == Family::exponential ? theta1(0.8) : theta2(1.5, 2.0);
    double prev = -1.0;
    for (double y = -2.0; y <= 12.0; y += 0.25) {
      const double v = cdf(f, t, y);
      CHECK(v >= prev);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("domain clamping") {
  int n = 0;
  ParamVector bad = theta2(-0.5, 3.0);
  ParamVector fixed = clamp_to_domain(Family::weibull, bad, 1e-6, &n);
  CHECK(n == 1);
  CHECK(fixed[0] == 1e-6);
  CHECK(fixed[1] == 3.0);
  CHECK(in_domain(Family::weibull, fixed));
  CHECK_FALSE(in_domain(Family::weibull, bad));

  // gumbel location is unconstrained
  n = 0;
  ParamVector g = clamp_to_domain(Family::gumbel, theta2(-7.0, -1.0), 1e-6, &n);
  CHECK(n == 1);
  CHECK(g[0] == -7.0);
  CHECK(g[1] == 1e-6);
}

TEST_CASE("exponential MLE closed form") {
  std::vector<double> y = {0.4, 1.1, 2.0, 0.7, 3.3};
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  MleResult r = mle_fit(Family::exponential, y);
  CHECK(r.theta[0] == doctest::Approx(m).epsilon(1e-12));
  // observed information n/beta^2 -> sigma = beta^2/n = m^2/n, up to FD error
  CHECK(r.sigma(0, 0) ==
        doctest::Approx(m * m / static_cast<double>(y.size())).epsilon(1e-5));
}

TEST_CASE("weibull MLE consistency on large sample") {
  Rng rng(424242);
  std::vector<double> y(100000);
  ParamVector truth = theta2(2.0, 3.0);
  for (double& v : y) v = sample(Family::weibull, truth, rng);
  MleResult r = mle_fit(Family::weibull, y);
  CHECK(r.theta[0] == doctest::Approx(2.0).epsilon(0.02));
  CHECK(r.theta[1] == doctest::Approx(3.0).epsilon(0.02));

  SUBCASE("sigma matches the repeated-fit spread") {
    Eigen::Matrix2d emp = Eigen::Matrix2d::Zero();
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    const int reps = 200;
    std::vector<Eigen::Vector2d> fits(reps);
    for (int rep = 0; rep < reps; ++rep) {
      Rng rr(derive_seed(7, 0xF17, rep));
      for (double& v : y) v = sample(Family::weibull, truth, rr);
      MleResult f = mle_fit(Family::weibull, y);
      fits[rep] = Eigen::Vector2d(f.theta[0], f.theta[1]);
      mean += fits[rep];
    }
    mean /= reps;
    for (const auto& f : fits) emp += (f - mean) * (f - mean).transpose();
    emp /= reps - 1;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(r.sigma(i, j) == doctest::Approx(emp(i, j)).epsilon(0.25));
  }

  SUBCASE("scale equivariance") {
    std::vector<double> ys = y;
    for (double& v : ys) v *= 10.0;
    MleResult rs = mle_fit(Family::weibull, ys);
    CHECK(rs.theta[0] == doctest::Approx(r.theta[0]).epsilon(1e-6));
    CHECK(rs.theta[1] == doctest::Approx(10.0 * r.theta[1]).epsilon(1e-6));
  }
}

TEST_CASE("gumbel MLE consistency") {
  Rng rng(8675309);
  std::vector<double> y(50000);
  ParamVector truth = theta2(4.0, 1.5);
  for (double& v : y) v = sample(Family::gumbel, truth, rng);
  MleResult r = mle_fit(Family::gumbel, y);
  CHECK(r.theta[0] == doctest::Approx(4.0).epsilon(0.02));
  CHECK(r.theta[1] == doctest::Approx(1.5).epsilon(0.02));
  CHECK(r.sigma(0, 0) > 0.0);
  CHECK(r.sigma(1, 1) > 0.0);
}

TEST_CASE("MLE is a stationary point of the log likelihood") {
  Rng rng(5150);
  std::vector<double> y(5000);
  ParamVector truth = theta2(1.8, 2.2);
  for (double& v : y) v = sample(Family::weibull, truth, rng);
  MleResult r = mle_fit(Family::weibull, y);
  const double n = static_cast<double>(y.size());
  for (int i = 0; i < 2; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(r.theta[i]));
    ParamVector up = r.theta, dn = r.theta;
    up[i] += h;
    dn[i] -= h;
    const double grad = (log_likelihood(Family::weibull, up, y) -
                         log_likelihood(Family::weibull, dn, y)) /
                        (2.0 * h);
    CHECK(std::abs(grad) < 1e-3 * n);
  }
}

TEST_CASE("MLE rejects degenerate input") {
  std::vector<double> empty;
  CHECK_THROWS_AS(mle_fit(Family::weibull, empty), Error);
  std::vector<double> constant(50, 2.0);
  CHECK_THROWS_AS(mle_fit(Family::weibull, constant), Error);
}

TEST_CASE("sampling matches the cdf") {
  Rng rng(31337);
  ParamVector t = theta2(1.5, 2.0);
  const int n = 200000;
  int below = 0;
  const double y0 = quantile(Family::weibull, t, 0.3);
  for (int i = 0; i < n; ++i)
    if (sample(Family::weibull, t, rng) <= y0) ++below;
  const double phat = static_cast<double>(below) / n;
  CHECK(phat == doctest::Approx(0.3).epsilon(0.02));
}
