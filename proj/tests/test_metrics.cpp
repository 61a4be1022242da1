#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ssrl/common.hpp"
#include "ssrl/metrics.hpp"
#include "testutil.hpp"

using namespace ssrl;

namespace {

// independent brute-force concordance evaluation (population moments)
double ccc_oracle(const std::vector<double>& y, const std::vector<double>& yh) {
  double n = static_cast<double>(y.size());
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double mh = std::accumulate(yh.begin(), yh.end(), 0.0) / n;
  double vy = 0, vh = 0, cov = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    vy += (y[i] - my) * (y[i] - my);
    vh += (yh[i] - mh) * (yh[i] - mh);
    cov += (y[i] - my) * (yh[i] - mh);
  }
  vy /= n; vh /= n; cov /= n;
  double denom = vy + vh + (my - mh) * (my - mh);
  if (denom < 1e-12) return 0.0;
  return 2.0 * cov / denom;
}

// two-sided p of the t statistic via Simpson quadrature of the t density
double t_pvalue_oracle(double t_stat, int dof) {
  double v = dof;
  double log_norm = std::lgamma((v + 1) / 2.0) - std::lgamma(v / 2.0) -
                    0.5 * std::log(v * 3.14159265358979323846);
  auto pdf = [&](double x) {
    return std::exp(log_norm - (v + 1) / 2.0 * std::log1p(x * x / v));
  };
  double a = std::abs(t_stat), b = a + 400.0;  // tail mass beyond is negligible
  int n = 2000000;
  double h = (b - a) / n, s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return 2.0 * s * h / 3.0;
}

}  // namespace

TEST_CASE("ccc: documented oracle cases") {
  std::vector<double> y1 = {1, 2, 3};
  CHECK(metrics::ccc(y1, y1).ccc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::ccc({1, 2, 3}, {3, 2, 1}).ccc == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(metrics::ccc({0, 1}, {1, 2}).ccc == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ccc: 1000 random pairs match brute-force evaluation within 1e-9") {
  Rng rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + rng.uniform_int(63);
    std::vector<double> y(n), yh(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(-3, 3);
      yh[i] = rng.uniform(-3, 3);
    }
    auto r = metrics::ccc(y, yh);
    CHECK(std::abs(r.ccc - ccc_oracle(y, yh)) < 1e-9);
    CHECK(std::abs(r.ccc) <= 1.0 + 1e-12);
    CHECK(r.ccc == doctest::Approx(metrics::ccc(yh, y).ccc).epsilon(1e-12));
  }
}

TEST_CASE("ccc: joint positive affine invariance") {
  Rng rng(102);
  std::vector<double> y(50), yh(50);
  for (std::size_t i = 0; i < 50; ++i) {
    y[i] = rng.uniform(-1, 1);
    yh[i] = rng.uniform(-1, 1);
  }
  double base = metrics::ccc(y, yh).ccc;
  for (double a : {0.5, 2.0, 7.3}) {
    std::vector<double> ya(50), yha(50);
    for (std::size_t i = 0; i < 50; ++i) {
      ya[i] = a * y[i] + 1.7;
      yha[i] = a * yh[i] + 1.7;
    }
    CHECK(std::abs(metrics::ccc(ya, yha).ccc - base) < 1e-9);
  }
}

TEST_CASE("ccc: degenerate and contract errors") {
  CHECK(metrics::ccc({2, 2, 2}, {2, 2, 2}).ccc == 0.0);  // denominator guard
  CHECK_THROWS_AS((void)metrics::ccc({1, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS((void)metrics::ccc({1}, {1}), TooShort);
}

TEST_CASE("ccc: long independent sequences stay near zero") {
  Rng rng(103);
  std::vector<double> y(10000), yh(10000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rng.gaussian(0, 1);
    yh[i] = rng.gaussian(0, 1);
  }
  CHECK(std::abs(metrics::ccc(y, yh).ccc) < 0.05);
}

TEST_CASE("ccc_loss endpoints and midpoint") {
  std::vector<double> y = {1, 2, 3};
  CHECK(metrics::ccc_loss(y, y) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(metrics::ccc_loss({1, 2, 3}, {3, 2, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics::ccc_loss({2, 2}, {2, 2}) == doctest::Approx(0.5));  // ccc = 0
}

TEST_CASE("ccc_loss_var: value matches scalar path and gradient checks") {
  Rng rng(104);
  std::vector<double> y(12);
  for (auto& v : y) v = rng.uniform(-1, 1);
  nn::VarPtr yhat = testutil::random_var(12, 1, rng);
  std::vector<double> yh(yhat->value.data);
  CHECK(metrics::ccc_loss_var(y, yhat)->value.item() ==
        doctest::Approx(metrics::ccc_loss(y, yh)).epsilon(1e-10));
  auto loss = [&] { return metrics::ccc_loss_var(y, yhat); };
  CHECK(testutil::grad_check({yhat}, loss, 1e-6) < 1e-4);
}

TEST_CASE("macro_f1: confusion-matrix oracles") {
  CHECK(metrics::macro_f1({0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2}, 3) ==
        doctest::Approx(1.0));
  CHECK(metrics::macro_f1({1, 1, 0, 0}, {1, 0, 1, 0}, 2) == doctest::Approx(0.5));
  // all predictions class 0 on balanced binary truth: F1 = (2/3 + 0)/2
  CHECK(metrics::macro_f1({0, 0, 0, 0}, {0, 0, 1, 1}, 2) ==
        doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS((void)metrics::macro_f1({0, 3}, {0, 1}, 2), LabelError);
}

TEST_CASE("macro_f1: invariant under class relabeling") {
  Rng rng(105);
  std::vector<int> pred(60), truth(60);
  for (int i = 0; i < 60; ++i) {
    pred[i] = static_cast<int>(rng.uniform_int(4));
    truth[i] = static_cast<int>(rng.uniform_int(4));
  }
  double base = metrics::macro_f1(pred, truth, 4);
  int perm[4] = {2, 0, 3, 1};
  std::vector<int> p2(60), t2(60);
  for (int i = 0; i < 60; ++i) {
    p2[i] = perm[pred[i]];
    t2[i] = perm[truth[i]];
  }
  CHECK(metrics::macro_f1(p2, t2, 4) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("accuracy") {
  CHECK(metrics::accuracy({1, 2, 3}, {1, 2, 0}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("paired t-test: contract cases") {
  std::vector<double> b = {1, 2, 3, 4};
  std::vector<double> shifted = {2, 3, 4, 5};
  CHECK_THROWS_AS((void)metrics::paired_t_test(shifted, b), DegenerateTest);

  // symmetric differences around zero -> t = 0, p = 1
  auto r = metrics::paired_t_test({1, 2, 3, 4}, {2, 1, 4, 3});
  CHECK(r.t_stat == doctest::Approx(0.0));
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("paired t-test: p matches t-CDF quadrature oracle within 1e-6") {
  Rng rng(106);
  std::vector<double> a(10), b(10);
  for (int i = 0; i < 10; ++i) {
    a[i] = rng.gaussian(0.3, 1.0);
    b[i] = rng.gaussian(0.0, 1.0);
  }
  auto r = metrics::paired_t_test(a, b);
  CHECK(std::abs(r.p_value - t_pvalue_oracle(r.t_stat, 9)) < 1e-6);
}

TEST_CASE("summarize run reports") {
  auto rep = metrics::summarize("f1", {0.5, 0.5, 0.5});
  CHECK(rep.mean == doctest::Approx(0.5));
  CHECK(rep.stddev == doctest::Approx(0.0));
  auto one = metrics::summarize("f1", {0.7});
  CHECK(one.stddev == 0.0);
  auto two = metrics::summarize("x", {1.0, 3.0});
  CHECK(two.mean == doctest::Approx(2.0));
  CHECK(two.stddev == doctest::Approx(1.0));  // population std
}
