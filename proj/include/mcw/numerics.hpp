#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcw/common.hpp"

namespace mcw {

using ScalarFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

struct BoxGrid {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<long> n;

  BoxGrid(std::vector<double> lo, std::vector<double> hi, std::vector<long> cells);

  int K() const { return static_cast<int>(a.size()); }
  double eps(int i) const;
  double cell_volume() const;
};

enum class TagPoint { LowerCorner, Midpoint };

enum class GradientSource { Analytic, SampledGradient, FiniteDifference };

const char* gradient_source_name(GradientSource s);

/// How the sup of |grad g| entering the error bound is obtained.
struct GradientBound {
  std::optional<double> analytic;
  GradientFn gradient;
};

struct RiemannResult {
  double sum = 0.0;
  double error_bound = 0.0;
  double grad_sup = 0.0;
  GradientSource source = GradientSource::FiniteDifference;
};

/// Riemann sum with the bound K n^(K-1) max(b-a) sup|grad g| prod(eps),
/// n = max n_i. The bound does not depend on the tag point.
RiemannResult riemann_sum(const ScalarFn& g, const BoxGrid& grid, TagPoint tag,
                          const GradientBound& bound = {}, int threads = 1);

/// Leading-order g(mu) exp(N f(mu)) sqrt((2 pi)^K / (N^K det(-H))).
double laplace_integral(const ScalarFn& f, const Vec& mu, const Mat& hess, const ScalarFn& g, double N,
                        const BoxGrid& box);

/// log of the same quantity; requires g(mu) > 0.
double log_laplace_integral(const ScalarFn& f, const Vec& mu, const Mat& hess, const ScalarFn& g,
                            double N, const BoxGrid& box);

}  // namespace mcw
