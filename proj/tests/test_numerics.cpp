#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mcw/numerics.hpp"

using namespace mcw;

namespace {

// Composite Simpson over [lo, hi]^K with m (even) panels per dimension.
double simpson(const ScalarFn& h, int K, double lo, double hi, int m) {
  const double step = (hi - lo) / m;
  std::vector<int> idx(K, 0);
  long double acc = 0;
  while (true) {
    Vec x(K);
    double w = 1;
    for (int d = 0; d < K; ++d) {
      x(d) = lo + idx[d] * step;
      w *= (idx[d] == 0 || idx[d] == m) ? 1 : (idx[d] % 2 ? 4 : 2);
    }
    acc += w * h(x);
    int d = 0;
    while (d < K && ++idx[d] > m) idx[d++] = 0;
    if (d == K) break;
  }
  return static_cast<double>(acc) * std::pow(step / 3, K);
}

}  // namespace

TEST_CASE("BoxGrid") {
  const BoxGrid g({0.0, -1.0}, {1.0, 1.0}, {4, 8});
  CHECK(g.eps(0) == 0.25);
  CHECK(g.eps(1) == 0.25);
  CHECK(g.cell_volume() == 0.0625);
  CHECK_THROWS_AS(BoxGrid({1.0}, {0.0}, {3}), ValidationError);
  CHECK_THROWS_AS(BoxGrid({0.0}, {1.0}, {0}), ValidationError);
}

TEST_CASE("riemann_sum examples") {
  {
    const BoxGrid g({0.0, 0.0}, {2.0, 1.0}, {5, 7});
    const auto r = riemann_sum([](const Vec&) { return 3.0; }, g, TagPoint::Midpoint);
    CHECK(r.sum == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(r.error_bound >= 0.0);
  }
  {
    const BoxGrid g({0.0}, {1.0}, {100});
    GradientBound b;
    b.analytic = 1.0;
    const auto r = riemann_sum([](const Vec& x) { return x(0); }, g, TagPoint::LowerCorner, b);
    CHECK(r.sum == doctest::Approx(0.495).epsilon(1e-13));
    CHECK(r.error_bound >= 0.005);
    CHECK(r.source == GradientSource::Analytic);
    const auto s = riemann_sum([](const Vec& x) { return x(0); }, g, TagPoint::LowerCorner);
    CHECK(s.source == GradientSource::FiniteDifference);
    CHECK(s.grad_sup == doctest::Approx(1.0).epsilon(1e-6));
  }
  {
    const BoxGrid g({0.0, 0.0}, {1.0, 1.0}, {50, 50});
    GradientBound b;
    b.gradient = [](const Vec& x) {
      Vec gr(2);
      gr << x(1), x(0);
      return gr;
    };
    const auto r = riemann_sum([](const Vec& x) { return x(0) * x(1); }, g, TagPoint::LowerCorner, b);
    CHECK(r.source == GradientSource::SampledGradient);
    CHECK(std::abs(r.sum - 0.25) <= r.error_bound);
  }
}

TEST_CASE("riemann bound dominates the true error on polynomials") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pw(0, 3);
  std::uniform_real_distribution<double> uc(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 1 + trial % 3;
    std::vector<int> p(K);
    std::vector<double> a(K), b(K);
    std::vector<long> n(K);
    double integral = 1;
    for (int d = 0; d < K; ++d) {
      p[d] = pw(rng);
      a[d] = uc(rng);
      b[d] = a[d] + 0.5 + std::abs(uc(rng));
      n[d] = 3 + trial;
      integral *= (std::pow(b[d], p[d] + 1) - std::pow(a[d], p[d] + 1)) / (p[d] + 1);
    }
    const ScalarFn g = [p](const Vec& x) {
      double v = 1;
      for (int d = 0; d < x.size(); ++d) v *= std::pow(x(d), p[d]);
      return v;
    };
    const BoxGrid grid(a, b, n);
    for (TagPoint tag : {TagPoint::LowerCorner, TagPoint::Midpoint}) {
      const auto r = riemann_sum(g, grid, tag);
      CHECK(std::abs(r.sum - integral) <= r.error_bound + 1e-12);
    }
  }
}

TEST_CASE("laplace_integral Gaussian closed forms") {
  const BoxGrid b1({-5.0}, {5.0}, {1});
  const ScalarFn f1 = [](const Vec& x) { return -0.5 * x(0) * x(0); };
  const ScalarFn one = [](const Vec&) { return 1.0; };
  const Mat H1 = -Mat::Identity(1, 1);
  const double v = laplace_integral(f1, Vec::Zero(1), H1, one, 100, b1);
  CHECK(v == doctest::Approx(std::sqrt(2 * M_PI / 100)).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.2506628).epsilon(1e-7));
  const double scaled = laplace_integral(f1, Vec::Zero(1), H1, [](const Vec&) { return 3.5; }, 100, b1);
  CHECK(scaled == doctest::Approx(3.5 * v).epsilon(1e-14));
  CHECK(log_laplace_integral(f1, Vec::Zero(1), H1, one, 100, b1) == doctest::Approx(std::log(v)).epsilon(1e-14));

  const BoxGrid b2({-1.0, -1.0}, {1.0, 1.0}, {1, 1});
  const ScalarFn f2 = [](const Vec& x) { return -(x(0) * x(0) + 2 * x(1) * x(1)) / 2; };
  Mat H2(2, 2);
  H2 << -1, 0, 0, -2;
  const double v2 = laplace_integral(f2, Vec::Zero(2), H2, one, 50, b2);
  CHECK(v2 == doctest::Approx(2 * M_PI / (50 * std::sqrt(2.0))).epsilon(1e-12));
  const double quad = simpson([&](const Vec& x) { return std::exp(50 * f2(x)); }, 2, -1, 1, 400);
  CHECK(std::abs(v2 - quad) <= 0.01 * quad);

  CHECK_THROWS_AS(laplace_integral(f1, Vec::Zero(1), -H1, one, 10, b1), ValidationError);
  CHECK_THROWS_AS(laplace_integral(f1, Vec::Constant(1, 5.0), H1, one, 10, b1), ValidationError);
}

TEST_CASE("laplace_integral error decays on non-Gaussian integrands") {
  const BoxGrid box({-1.0, -1.0}, {1.0, 1.0}, {1, 1});
  const ScalarFn f = [](const Vec& x) {
    return -0.5 * x(0) * x(0) - 0.25 * std::pow(x(0), 4) - x(1) * x(1) + 0.3 * x(0) * x(1) * x(1);
  };
  const ScalarFn g = [](const Vec& x) { return 1 + x(0) + x(1) * x(1); };
  Mat H(2, 2);
  H << -1, 0, 0, -2;
  double prev = 1e9;
  for (double N : {20.0, 80.0, 320.0}) {
    const double approx = laplace_integral(f, Vec::Zero(2), H, g, N, box);
    const double quad = simpson([&](const Vec& x) { return g(x) * std::exp(N * f(x)); }, 2, -1, 1, 600);
    const double rel = std::abs(approx - quad) / quad;
    CHECK(rel < prev);
    prev = rel;
  }
}
