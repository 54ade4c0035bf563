#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vdscan/error.hpp"
#include "vdscan/stats.hpp"

using namespace vdscan;

TEST_CASE("balanced accuracy reference example") {
  const ConfusionMatrix m{.tp = 90, .fp = 40, .tn = 60, .fn = 10};
  CHECK(balanced_accuracy(m) == 0.75);
  CHECK(accuracy(m) == 0.75);
}

TEST_CASE("confusion counts") {
  const std::vector<int> pred{1, 1, 0, 0, 1, 0};
  const std::vector<int> truth{1, 0, 0, 1, 1, 0};
  const ConfusionMatrix m = confusion(pred, truth);
  CHECK(m == ConfusionMatrix{.tp = 2, .fp = 1, .tn = 2, .fn = 1});
  CHECK(m.total() == 6);
  const std::vector<int> shorter{1};
  CHECK_THROWS_AS(confusion(pred, shorter), Error);
  const std::vector<int> none;
  CHECK_THROWS_AS(confusion(none, none), Error);
}

TEST_CASE("balanced accuracy needs both classes") {
  try {
    balanced_accuracy(ConfusionMatrix{.tp = 3, .fp = 0, .tn = 0, .fn = 1});
    FAIL("expected UndefinedClassRecall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedClassRecall);
  }
}

TEST_CASE("balanced accuracy is 0.5 for constant predictions") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> truth(20 + rng() % 50);
    for (auto& t : truth) t = static_cast<int>(rng() & 1);
    truth[0] = 0;
    truth[1] = 1;
    const std::vector<int> ones(truth.size(), 1);
    const std::vector<int> zeros(truth.size(), 0);
    CHECK(balanced_accuracy(confusion(ones, truth)) == 0.5);
    CHECK(balanced_accuracy(confusion(zeros, truth)) == 0.5);
  }
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{4, 1, 3, 2};
  const Quartiles q = quartiles(v);
  CHECK(q.q25 == 1.75);
  CHECK(q.median == 2.5);
  CHECK(q.q75 == 3.25);
  const std::vector<double> one{7};
  CHECK(quartiles(one) == Quartiles{7, 7, 7});
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  const std::vector<double> empty;
  CHECK_THROWS_AS(quartiles(empty), Error);
  const std::vector<double> bad{1, NAN};
  CHECK_THROWS_AS(quartiles(bad), Error);
}

TEST_CASE("quartiles are order invariant and monotone") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 40);
    for (auto& x : v) x = uniform01(rng) * 100.0 - 50.0;
    const Quartiles a = quartiles(v);
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(quartiles(v) == a);
    CHECK(a.q25 <= a.median);
    CHECK(a.median <= a.q75);
    CHECK(a.q25 >= *std::min_element(v.begin(), v.end()));
    CHECK(a.q75 <= *std::max_element(v.begin(), v.end()));
  }
}

TEST_CASE("prevalence ratio") {
  CHECK(prevalence_ratio(0.3, 0.1).value() == doctest::Approx(3.0));
  CHECK_FALSE(prevalence_ratio(0.3, 0.0).has_value());
  CHECK(prevalence_ratio(0.0, 0.2).value() == 0.0);
}

TEST_CASE("normal quantiles") {
  CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile_two_sided(0.99) == doctest::Approx(2.5758293035489).epsilon(1e-12));
}

TEST_CASE("Wilson interval reference values") {
  const Interval i = wilson_interval(5, 10, 0.95);
  CHECK(i.lower == doctest::Approx(0.2365931).epsilon(1e-6));
  CHECK(i.upper == doctest::Approx(0.7634069).epsilon(1e-6));
  const Interval zero = wilson_interval(0, 20, 0.95);
  CHECK(zero.lower < 1e-12);
  CHECK(zero.upper == doctest::Approx(0.1611252).epsilon(1e-6));
  CHECK_THROWS_AS(wilson_interval(0, 0, 0.95), Error);
}

TEST_CASE("Katz ratio interval reference values") {
  const Interval i = prevalence_ratio_interval(20, 100, 10, 100, 0.95);
  CHECK(i.lower == doctest::Approx(0.9865632).epsilon(1e-6));
  CHECK(i.upper == doctest::Approx(4.0544792).epsilon(1e-6));
  CHECK(i.contains(2.0));
  // A zero count gets the half correction instead of an infinite bound.
  const Interval z = prevalence_ratio_interval(0, 50, 5, 50, 0.99);
  CHECK(std::isfinite(z.lower));
  CHECK(std::isfinite(z.upper));
  CHECK_THROWS_AS(prevalence_ratio_interval(1, 0, 1, 1, 0.99), Error);
}

TEST_CASE("Wilson coverage by simulation") {
  Rng rng(99);
  const double p = 0.3;
  const std::size_t n = 80;
  int covered = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::size_t x = 0;
    for (std::size_t i = 0; i < n; ++i) x += uniform01(rng) < p;
    covered += wilson_interval(x, n, 0.95).contains(p);
  }
  CHECK(static_cast<double>(covered) / trials > 0.93);
}

TEST_CASE("Silverman bandwidth") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  // sd = 1.5811, IQR / 1.34 = 1.4925
  CHECK(silverman_bandwidth(v) == doctest::Approx(0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2)).epsilon(1e-12));
  const std::vector<double> flat{3, 3, 3};
  CHECK(silverman_bandwidth(flat) == 1.0);
}

TEST_CASE("KDE integrates to one and matches the kernel") {
  const std::vector<double> samples{40, 45, 47, 60, 71};
  const double h = silverman_bandwidth(samples);
  std::vector<double> grid;
  const double lo = 40 - 3 * h, hi = 71 + 3 * h;
  for (int i = 0; i < 2048; ++i) grid.push_back(lo - 5 * h + (hi - lo + 10 * h) * i / 2047.0);
  const auto d = gaussian_kde(samples, grid, h);
  CHECK(trapezoid(grid, d) == doctest::Approx(1.0).epsilon(1e-3));

  const std::vector<double> one{0.0};
  const std::vector<double> at{0.0, 1.0};
  const auto k = gaussian_kde(one, at, 2.0);
  CHECK(k[0] == doctest::Approx(1.0 / (2.0 * std::sqrt(2 * std::numbers::pi))));
  CHECK(k[1] == doctest::Approx(std::exp(-0.125) / (2.0 * std::sqrt(2 * std::numbers::pi))));
  CHECK_THROWS_AS(gaussian_kde(one, at, 0.0), Error);
}

TEST_CASE("trapezoid is exact for linear functions") {
  const std::vector<double> x{0, 0.5, 2, 3};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  CHECK(trapezoid(x, y) == doctest::Approx(12.0));
}
