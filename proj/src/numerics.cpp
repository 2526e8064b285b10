#include "mcw/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mcw {

BoxGrid::BoxGrid(std::vector<double> lo, std::vector<double> hi, std::vector<long> cells)
    : a(std::move(lo)), b(std::move(hi)), n(std::move(cells)) {
  if (a.empty() || a.size() != b.size() || a.size() != n.size()) {
    throw ValidationError("BoxGrid: bounds and cell counts must have equal nonzero length");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] < b[i])) throw ValidationError("BoxGrid: need a_i < b_i");
    if (n[i] < 1) throw ValidationError("BoxGrid: need n_i >= 1");
  }
}

double BoxGrid::eps(int i) const {
  const auto k = static_cast<std::size_t>(i);
  return (b[k] - a[k]) / static_cast<double>(n[k]);
}

double BoxGrid::cell_volume() const {
  double v = 1.0;
  for (int i = 0; i < K(); ++i) v *= eps(i);
  return v;
}

const char* gradient_source_name(GradientSource s) {
  switch (s) {
    case GradientSource::Analytic: return "analytic";
    case GradientSource::SampledGradient: return "sampled-gradient";
    case GradientSource::FiniteDifference: return "finite-difference";
  }
  return "finite-difference";
}

namespace {

// Visits a lattice of `per_dim[i]` evenly spaced points in each dimension,
// endpoints included.
template <class Visit>
void visit_lattice(const BoxGrid& box, const std::vector<long>& per_dim, Visit&& visit) {
  const int K = box.K();
  std::vector<long> idx(static_cast<std::size_t>(K), 0);
  Vec x(K);
  for (;;) {
    for (int i = 0; i < K; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double frac = per_dim[k] == 1 ? 0.5 : static_cast<double>(idx[k]) / static_cast<double>(per_dim[k] - 1);
      x(i) = box.a[k] + frac * (box.b[k] - box.a[k]);
    }
    visit(x);
    int d = K - 1;
    while (d >= 0 && ++idx[static_cast<std::size_t>(d)] == per_dim[static_cast<std::size_t>(d)]) {
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) return;
  }
}

Vec fd_gradient(const ScalarFn& g, const Vec& x, const BoxGrid& box) {
  Vec grad(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double h = 1e-6 * std::max(1.0, box.b[k] - box.a[k]);
    Vec lo = x, hi = x;
    lo(i) = std::max(box.a[k], x(i) - h);
    hi(i) = std::min(box.b[k], x(i) + h);
    grad(i) = (g(hi) - g(lo)) / (hi(i) - lo(i));
  }
  return grad;
}

}  // namespace

RiemannResult riemann_sum(const ScalarFn& g, const BoxGrid& grid, TagPoint tag,
                          const GradientBound& bound, int threads) {
  const int K = grid.K();
  double total_cells = 1.0;
  for (long c : grid.n) total_cells *= static_cast<double>(c);
  if (total_cells > 1e9) throw ValidationError("riemann_sum: grid too large");
  const double offset = tag == TagPoint::Midpoint ? 0.5 : 0.0;

  // Chunk over the first dimension; partial sums merged in order.
  const std::size_t chunks = static_cast<std::size_t>(grid.n[0]);
  std::vector<CompensatedSum> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<long> idx(static_cast<std::size_t>(K), 0);
    idx[0] = static_cast<long>(c);
    Vec x(K);
    for (;;) {
      for (int i = 0; i < K; ++i) {
        x(i) = grid.a[static_cast<std::size_t>(i)] +
               (static_cast<double>(idx[static_cast<std::size_t>(i)]) + offset) * grid.eps(i);
      }
      partial[c].add(g(x));
      int d = K - 1;
      while (d >= 1 && ++idx[static_cast<std::size_t>(d)] == grid.n[static_cast<std::size_t>(d)]) {
        idx[static_cast<std::size_t>(d)] = 0;
        --d;
      }
      if (d < 1) break;
    }
  });
  CompensatedSum total;
  for (const auto& p : partial) total.merge(p);

  RiemannResult res;
  res.sum = total.value() * grid.cell_volume();

  if (bound.analytic) {
    res.grad_sup = *bound.analytic;
    res.source = GradientSource::Analytic;
  } else {
    std::vector<long> per_dim(static_cast<std::size_t>(K));
    const long cap = static_cast<long>(std::max(2.0, std::floor(std::pow(2e5, 1.0 / K))));
    for (int i = 0; i < K; ++i) {
      per_dim[static_cast<std::size_t>(i)] =
          std::min(cap, 2 * std::min<long>(grid.n[static_cast<std::size_t>(i)], 64) + 1);
    }
    double sup = 0.0;
    const bool have_grad = static_cast<bool>(bound.gradient);
    visit_lattice(grid, per_dim, [&](const Vec& x) {
      const Vec gr = have_grad ? bound.gradient(x) : fd_gradient(g, x, grid);
      sup = std::max(sup, gr.norm());
    });
    res.grad_sup = sup;
    res.source = have_grad ? GradientSource::SampledGradient : GradientSource::FiniteDifference;
  }
  const long n = *std::max_element(grid.n.begin(), grid.n.end());
  double width = 0.0;
  for (int i = 0; i < K; ++i) width = std::max(width, grid.b[static_cast<std::size_t>(i)] - grid.a[static_cast<std::size_t>(i)]);
  res.error_bound = K * std::pow(static_cast<double>(n), K - 1) * width * res.grad_sup * grid.cell_volume();
  return res;
}

namespace {

double half_log_gaussian_factor(const Vec& mu, const Mat& hess, double N, const BoxGrid& box) {
  const int K = box.K();
  if (mu.size() != K || hess.rows() != K || hess.cols() != K) {
    throw ValidationError("laplace_integral: dimension mismatch");
  }
  if (!(N > 0.0)) throw ValidationError("laplace_integral: N must be positive");
  for (int i = 0; i < K; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(mu(i) > box.a[k] && mu(i) < box.b[k])) {
      throw ValidationError("laplace_integral: maximizer must be interior to the box");
    }
  }
  Eigen::LLT<Mat> llt(-hess);
  if (llt.info() != Eigen::Success) throw ValidationError("laplace_integral: Hessian is not negative definite");
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return 0.5 * (K * std::log(2.0 * std::numbers::pi) - K * std::log(N) - logdet);
}

}  // namespace

double laplace_integral(const ScalarFn& f, const Vec& mu, const Mat& hess, const ScalarFn& g, double N,
                        const BoxGrid& box) {
  const double lg = half_log_gaussian_factor(mu, hess, N, box);
  return g(mu) * std::exp(N * f(mu) + lg);
}

double log_laplace_integral(const ScalarFn& f, const Vec& mu, const Mat& hess, const ScalarFn& g,
                            double N, const BoxGrid& box) {
  const double lg = half_log_gaussian_factor(mu, hess, N, box);
  const double gm = g(mu);
  if (!(gm > 0.0)) throw ValidationError("log_laplace_integral: g(mu) must be positive");
  return std::log(gm) + N * f(mu) + lg;
}

}  // namespace mcw
