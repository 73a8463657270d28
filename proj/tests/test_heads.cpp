#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ami/nn/heads.hpp"
#include "ami/rng.hpp"

using namespace ami;
using namespace ami::nn;

TEST_CASE("softmax normalizes and survives large logits") {
  Vec p = softmax({0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5));
  p = softmax({1000.0, 1000.0 + std::log(3.0)});
  CHECK(p[1] / p[0] == doctest::Approx(3.0));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

TEST_CASE("discrete log-prob and entropy match calculator values") {
  auto d = ActionDistribution::discrete({0.2, 0.8});
  CHECK(head_log_prob(d, 1) == doctest::Approx(-0.2231435513).epsilon(1e-9));
  CHECK(head_log_prob(d, 0) == doctest::Approx(-1.6094379124).epsilon(1e-9));
  CHECK(head_entropy(d) == doctest::Approx(0.5004024235381879).epsilon(1e-12));

  auto u = ActionDistribution::discrete({0.2, 0.2, 0.2, 0.2, 0.2});
  CHECK(head_entropy(u) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK_THROWS_AS(head_log_prob(d, 2), ProtocolError);
}

TEST_CASE("zero-probability actions flag instead of aborting") {
  reset_zero_prob_flags();
  auto d = ActionDistribution::discrete({1.0, 0.0});
  CHECK(head_log_prob(d, 1) == -std::numeric_limits<double>::infinity());
  CHECK(zero_prob_flag_count() == 1);
  reset_zero_prob_flags();
  CHECK(zero_prob_flag_count() == 0);
}

TEST_CASE("gaussian log-density matches calculator values") {
  auto g = ActionDistribution::gaussian({0.0}, {0.0});
  CHECK(head_log_prob(g, Vec{0.0}) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  CHECK(head_log_prob(g, Vec{1.0}) ==
        doctest::Approx(-1.4189385332046727).epsilon(1e-12));

  // sigma = 0.5 about mean 0.3, evaluated at 0.3: -0.5 ln(2 pi) - ln 0.5
  auto h = ActionDistribution::gaussian({0.3}, {std::log(0.5)});
  CHECK(head_log_prob(h, Vec{0.3}) ==
        doctest::Approx(-0.9189385332046727 + 0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("gaussian entropy matches the closed form") {
  auto g = ActionDistribution::gaussian({0.0, 0.0}, {0.0, std::log(2.0)});
  const double per_unit = 0.5 + 0.5 * std::log(2.0 * M_PI);
  CHECK(head_entropy(g) ==
        doctest::Approx(2.0 * per_unit + std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("discrete sampling frequencies sit inside 3 sigma") {
  auto d = ActionDistribution::discrete({0.2, 0.8});
  auto rng = make_engine(99, "freq");
  const int n = 20000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += (sample_discrete(d, rng) == 1);
  const double sigma = std::sqrt(n * 0.8 * 0.2);
  CHECK(std::fabs(ones - n * 0.8) < 3.0 * sigma);
}

TEST_CASE("gaussian sampling matches first and second moments") {
  auto g = ActionDistribution::gaussian({1.5}, {std::log(0.5)});
  auto rng = make_engine(100, "moments");
  const int n = 20000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_gaussian(g, rng)[0];
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == doctest::Approx(1.5).epsilon(0.02));
  CHECK(var == doctest::Approx(0.25).epsilon(0.06));
}

TEST_CASE("uniform01 stays inside its half-open interval") {
  auto rng = make_engine(101, "uniform");
  double lo = 1.0, hi = 0.0, acc = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    acc += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(acc / n == doctest::Approx(0.5).epsilon(0.02));
}
