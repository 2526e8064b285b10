#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <vector>

#include "mcw/common.hpp"

using namespace mcw;

TEST_CASE("log_sum_exp matches naive sum on moderate values") {
  const std::vector<double> v = {-1.0, 0.5, 2.0, -3.0};
  double naive = 0.0;
  for (double x : v) naive += std::exp(x);
  CHECK(log_sum_exp(v) == doctest::Approx(std::log(naive)).epsilon(1e-15));
}

TEST_CASE("log_sum_exp survives large magnitudes") {
  const std::vector<double> v = {1000.0, 1000.0};
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> w = {-1000.0, kNegInf};
  CHECK(log_sum_exp(w) == doctest::Approx(-1000.0));
  CHECK(log_sum_exp(std::vector<double>{}) == kNegInf);
}

TEST_CASE("LogSumExp merge equals single stream") {
  LogSumExp a, b, all;
  for (int i = 0; i < 50; ++i) {
    const double x = std::sin(i) * 30.0;
    (i % 2 ? a : b).add(x);
    all.add(x);
  }
  a.merge(b);
  CHECK(a.value() == doctest::Approx(all.value()).epsilon(1e-14));
}

TEST_CASE("compensated sum recovers small terms") {
  CompensatedSum s;
  s.add(1e16);
  for (int i = 0; i < 1000; ++i) s.add(1.0);
  s.add(-1e16);
  CHECK(s.value() == 1000.0);
}

TEST_CASE("parse_box handles open ends") {
  const Box b = parse_box("-1:0),(0:1", 2);
  CHECK(b[0].contains(-1.0));
  CHECK_FALSE(b[0].contains(0.0));
  CHECK_FALSE(b[1].contains(0.0));
  CHECK(b[1].contains(1.0));
  CHECK_THROWS_AS(parse_box("0:1", 2), ValidationError);
  CHECK_THROWS_AS(parse_box("1:0", 1), ValidationError);
}

TEST_CASE("parallel_for visits every task once") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS(parallel_for(10, 3, [](std::size_t i) {
    if (i == 5) throw NumericalError("boom");
  }));
}

TEST_CASE("format_double round trips") {
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
