// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "brute.hpp"
#include "mcw/clt.hpp"
#include "mcw/exact.hpp"
#include "mcw/landscape.hpp"
#include "mcw/numerics.hpp"
#include "mcw/sampler.hpp"
#include "mcw/variational.hpp"
#include "oracles.hpp"
#include "stats.hpp"

using namespace mcw;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ModelSpec k1(double J, double h, double beta = 0.0, double theta = 0.5) {
  return make_spec(Mat::Constant(1, 1, J), Vec::Constant(1, h), Vec::Ones(1), IsingPrior{},
                   Vec::Constant(1, beta), theta);
}

ModelSpec k2(double theta = 0.5) {
  Mat J(2, 2);
  J << 0.5, -0.7, -0.7, 0.2;
  Vec h(2);
  h << 0.1, -0.1;
  return make_spec(J, h, Vec::Constant(2, 0.5), IsingPrior{}, Vec::Zero(2), theta);
}

double max_entry(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Outcome brute_force_equivalence() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> uj(-2.0, 2.0), uh(-1.0, 1.0);
  std::uniform_int_distribution<int> uk(1, 3), un(2, 14);
  double worst = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int K = uk(rng);
    Mat J(K, K);
    Vec h(K), a(K);
    for (int i = 0; i < K; ++i) {
      h(i) = uh(rng);
      a(i) = 0.5 + std::abs(uh(rng));
      for (int j = 0; j <= i; ++j) J(i, j) = J(j, i) = uj(rng);
    }
    a /= a.sum();
    const auto s = make_spec(J, h, a);
    const long N = std::max<long>(K, un(rng));
    const auto fs = finite_sizes(s, N);
    const Vec t = Vec::Zero(K);
    worst = std::max(worst, std::abs(sector_law(s, fs, t).log_Z - oracle::brute_force(s, fs, t).log_Z));
  }
  o.require(worst <= 1e-10, "log Z mismatch");
  o.detail = "max |dlogZ| = " + fmt("%.3g", worst);
  return o;
}

Outcome pressure_convergence() {
  Outcome o;
  for (const auto& [name, s] : {std::pair{"K=1", k1(0.5, 0.2)}, std::pair{"K=2", k2()}}) {
    double prev = INFINITY;
    for (long N : {100L, 200L, 400L}) {
      const auto fs = finite_sizes(s, N);
      const double gap = std::abs(exact_log_pressure(s, fs) - global_maximizers(FreeEnergy::finite(s, fs)).f_max);
      double bound = 0;
      for (long n : fs.sizes) bound += std::log(n + 1.0);
      bound /= static_cast<double>(N);
      o.require(gap <= bound, std::string(name) + " N=" + std::to_string(N) + " gap above bound");
      o.require(gap < prev, std::string(name) + " N=" + std::to_string(N) + " gap not decreasing");
      if (N == 400) o.detail += std::string(o.detail.empty() ? "" : "; ") + name + " gap(400) = " + fmt("%.3g", gap);
      prev = gap;
    }
  }
  return o;
}

Outcome duality() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.3, 1.6);
  // Signs of the coupling eigenvalues; Delta inherits the inertia of J.
  const std::vector<std::vector<int>> signs = {{1},      {1, 1},     {1, 1, 1},  {-1},      {-1, -1},
                                               {-1, -1, -1}, {1, -1}, {-1, 1, 1}, {1, -1, -1}, {1, 1, -1}};
  double worst = 0;
  for (const auto& sg : signs) {
    const int K = static_cast<int>(sg.size());
    Mat G(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) G(i, j) = g(rng);
    const Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ();
    Vec ev(K), h(K), a(K);
    for (int i = 0; i < K; ++i) {
      ev(i) = sg[i] * u(rng) * 2;
      h(i) = 0.3 * g(rng);
      a(i) = u(rng);
    }
    a /= a.sum();
    const Mat J = Q * ev.asDiagonal() * Q.transpose();
    const auto s = make_spec(J, h, a);
    const auto r = infsup_solve(s);
    const double err = std::abs(r.value + std::log(2.0) - global_maximizers(s).f_max);
    worst = std::max(worst, err);
  }
  o.require(worst <= 1e-7, "duality gap too large");
  o.detail = "max |value + log 2 - max f| = " + fmt("%.3g", worst);
  return o;
}

Outcome laplace_expansion() {
  Outcome o;
  const auto s = k1(0.5, 0.2);
  double prev = INFINITY;
  for (long N : {100L, 200L, 400L, 800L}) {
    const double err =
        std::abs(laplace_log_Z(s, N, Vec::Zero(1)).log_Z_estimate - sector_law(s, N, Vec::Zero(1)).log_Z);
    o.require(err < prev, "error not decreasing at N=" + std::to_string(N));
    if (N == 400) {
      o.require(err <= 0.01, "error at N=400 above 0.01");
      o.detail = "|laplace - exact| at N=400 = " + fmt("%.3g", err);
    }
    prev = err;
  }
  return o;
}

Outcome centered_clt() {
  Outcome o;
  for (const auto& [name, s] : {std::pair{"K=1", k1(0.5, 0.2, 0.0, 1.0)}, std::pair{"K=2", k2(1.0)}}) {
    const auto p = clt_params(s, unique_maximizer(FreeEnergy::limiting(s)));
    const auto m = moments(sector_law(s, 800, Vec::Zero(s.K)), p.mu);
    const double cov_err = max_entry(m.scaled_cov - p.sigma) / max_entry(p.sigma);
    const double mean_err = m.scaled_mean.cwiseAbs().maxCoeff();
    o.require(cov_err <= 0.05, std::string(name) + " covariance");
    o.require(mean_err <= 0.02, std::string(name) + " mean");
    o.detail += std::string(o.detail.empty() ? "" : "; ") + name + " cov err " + fmt("%.3g", cov_err) +
                ", mean err " + fmt("%.3g", mean_err);
  }
  return o;
}

Outcome noncentered_clt() {
  Outcome o;
  const auto s = k1(0.5, 0.2, 0.5, 0.5);
  const auto p = clt_params(s, unique_maximizer(FreeEnergy::limiting(s)));
  const auto fs = finite_sizes(s, 800);
  const auto m = moments(sector_law(s, fs, Vec::Zero(1)), p.mu);
  const double rel = std::abs(m.scaled_mean(0) - p.nu(0)) / std::abs(p.nu(0));
  o.require(rel <= 0.15, "mean vs nu");
  const auto shift = mu_shift_check(s, {10000});
  o.require(shift.rows[0].rel_err <= 0.02, "maximizer shift");
  o.detail = "mean rel err " + fmt("%.3g", rel) + " (nu = " + fmt("%.4f", p.nu(0)) + "); shift rel err at N=1e4 " +
             fmt("%.3g", shift.rows[0].rel_err);
  return o;
}

Outcome conditional_clt() {
  Outcome o;
  const auto s = k1(1.5, 0.0);
  const double mstar = oracle::cw_magnetization(1.5);
  const Box lo = parse_box("-1:0)", 1), hi = parse_box("(0:1", 1);
  const auto params = conditional_clt_params(s, global_maximizers(s), {lo, hi});
  const auto law = sector_law(s, 800, Vec::Zero(1));
  std::vector<LawMoments> ms;
  for (std::size_t i = 0; i < 2; ++i) {
    ms.push_back(moments(conditional_law(law, i == 0 ? lo : hi), params[i].mu));
    const double target = i == 0 ? -mstar : mstar;
    const double mean_err = std::abs(ms[i].mean(0) - target);
    const double cov_err = std::abs(ms[i].scaled_cov(0, 0) - params[i].sigma(0, 0)) / params[i].sigma(0, 0);
    o.require(mean_err <= 0.02, "box " + std::to_string(i) + " mean");
    o.require(cov_err <= 0.07, "box " + std::to_string(i) + " covariance");
    if (i == 1) o.detail = "mean err " + fmt("%.3g", mean_err) + ", cov err " + fmt("%.3g", cov_err);
  }
  const double mirror = std::max(std::abs(ms[0].mean(0) + ms[1].mean(0)),
                                 std::abs(ms[0].scaled_cov(0, 0) - ms[1].scaled_cov(0, 0)));
  o.require(mirror <= 1e-10, "boxes not mirrored");
  o.detail += ", mirror mismatch " + fmt("%.3g", mirror);
  return o;
}

Outcome concentration() {
  Outcome o;
  const auto s = k1(0.5, 0.2);
  double prev = INFINITY;
  for (long N : {200L, 400L, 800L}) {
    const double mass = concentration_probe(s, N, Vec::Zero(1), 0.2);
    o.require(mass < prev, "mass not decreasing at N=" + std::to_string(N));
    if (N == 800) {
      o.require(mass <= 0.05, "mass at N=800 above 0.05");
      o.detail = "mass outside at N=800 = " + fmt("%.3g", mass);
    }
    prev = mass;
  }
  return o;
}

Outcome quadrature_routines() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> pw(0, 4);
  std::uniform_real_distribution<double> uc(-1.5, 1.5);
  std::uniform_int_distribution<long> un(2, 30);
  int dominated = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 1 + trial % 3;
    std::vector<int> p(K);
    std::vector<double> a(K), b(K);
    std::vector<long> n(K);
    double integral = 1;
    for (int d = 0; d < K; ++d) {
      p[d] = pw(rng);
      a[d] = uc(rng);
      b[d] = a[d] + 0.2 + std::abs(uc(rng));
      n[d] = un(rng);
      integral *= (std::pow(b[d], p[d] + 1) - std::pow(a[d], p[d] + 1)) / (p[d] + 1);
    }
    const ScalarFn g = [p](const Vec& x) {
      double v = 1;
      for (int d = 0; d < x.size(); ++d) v *= std::pow(x(d), p[d]);
      return v;
    };
    const auto r = riemann_sum(g, BoxGrid(a, b, n), trial % 2 ? TagPoint::Midpoint : TagPoint::LowerCorner);
    dominated += std::abs(r.sum - integral) <= r.error_bound;
  }
  o.require(dominated == 20, "Riemann bound violated");

  const ScalarFn one = [](const Vec&) { return 1.0; };
  const BoxGrid b1({-6.0}, {6.0}, {1});
  const double g1 = laplace_integral([](const Vec& x) { return -0.5 * x(0) * x(0); }, Vec::Zero(1),
                                     -Mat::Identity(1, 1), one, 100, b1);
  Mat H2(2, 2);
  H2 << -1, 0, 0, -2;
  const BoxGrid b2({-1.0, -1.0}, {1.0, 1.0}, {1, 1});
  const double g2 = laplace_integral([](const Vec& x) { return -(x(0) * x(0) + 2 * x(1) * x(1)) / 2; },
                                     Vec::Zero(2), H2, one, 50, b2);
  const double gauss_err = std::max(std::abs(g1 / std::sqrt(2 * M_PI / 100) - 1),
                                    std::abs(g2 / (2 * M_PI / (50 * std::sqrt(2.0))) - 1));
  o.require(gauss_err <= 1e-12, "Gaussian closed form");

  // Non-Gaussian integrand against a fine midpoint rule on [-1,1]^2.
  const ScalarFn f = [](const Vec& x) {
    return -0.5 * x(0) * x(0) - 0.25 * std::pow(x(0), 4) - x(1) * x(1) + 0.3 * x(0) * x(1) * x(1);
  };
  const ScalarFn w = [](const Vec& x) { return 1 + x(0) + x(1) * x(1); };
  double prev = INFINITY;
  std::string trend;
  for (double N : {20.0, 80.0, 320.0}) {
    const double approx = laplace_integral(f, Vec::Zero(2), H2, w, N, b2);
    const auto quad = riemann_sum([&](const Vec& x) { return w(x) * std::exp(N * f(x)); },
                                  BoxGrid({-1.0, -1.0}, {1.0, 1.0}, {1200, 1200}), TagPoint::Midpoint,
                                  GradientBound{1.0, {}});
    const double rel = std::abs(approx - quad.sum) / quad.sum;
    o.require(rel < prev, "Laplace error not decreasing at N=" + fmt("%g", N));
    trend += (trend.empty() ? "" : ", ") + fmt("%.2g", rel);
    prev = rel;
  }
  o.detail = std::to_string(dominated) + "/20 bounds hold; Gaussian err " + fmt("%.2g", gauss_err) +
             "; Laplace rel err " + trend;
  return o;
}

Outcome sampler_validation() {
  Outcome o;
  Mat J(2, 2);
  J << 0.8, -1.1, -1.1, 0.4;
  Vec h(2);
  h << 0.3, -0.2;
  const auto s3 = make_spec(J, h, Vec::Constant(2, 0.5));
  const auto fs3 = sizes_from_counts({2, 1});
  const auto bf = oracle::brute_force(s3, fs3, Vec::Zero(2));
  GlauberChain chain(s3, fs3, 2024);
  chain.initialize(InitKind::Random);
  for (int i = 0; i < 1000; ++i) chain.sweep();
  std::vector<double> counts(8, 0.0);
  const long sweeps = 1000000;
  for (long i = 0; i < sweeps; ++i) {
    chain.sweep();
    int code = 0;
    for (int b = 0; b < 3; ++b) code |= (chain.spins()[b] > 0 ? 1 : 0) << b;
    counts[code] += 1;
  }
  double tv = 0;
  for (int c = 0; c < 8; ++c) tv += std::abs(counts[c] / sweeps - std::exp(bf.log_w[c] - bf.log_Z));
  tv /= 2;
  o.require(tv < 0.01, "TV distance");

  const auto s = k1(0.5, 0.2);
  const auto fs = finite_sizes(s, 400);
  const double exact_var = moments(sector_law(s, fs, Vec::Zero(1)), Vec::Zero(1)).scaled_cov(0, 0);
  ChainConfig cfg;
  cfg.seed = 99;
  cfg.burn_in_sweeps = 500;
  cfg.sample_sweeps = 50000;
  const auto run = glauber_run(s, fs, cfg);
  std::vector<double> xs(static_cast<std::size_t>(run.samples.rows()));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 20.0 * run.samples(static_cast<Eigen::Index>(i), 0);
  const auto [v, se] = oracle::batch_estimate(xs, 50, oracle::var_of);
  o.require(std::abs(v - exact_var) <= 3 * se, "variance outside 3 SE");
  o.detail = "TV " + fmt("%.3g", tv) + "; Var " + fmt("%.4f", v) + " vs exact " + fmt("%.4f", exact_var) +
             " (SE " + fmt("%.3g", se) + ")";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"brute-force equivalence", 10, brute_force_equivalence},
      {"pressure convergence", 60, pressure_convergence},
      {"duality cross-check", 30, duality},
      {"Laplace expansion", 30, laplace_expansion},
      {"centered CLT", 60, centered_clt},
      {"non-centered CLT", 60, noncentered_clt},
      {"conditional CLT", 60, conditional_clt},
      {"concentration", 30, concentration},
      {"Riemann and Laplace routines", 20, quadrature_routines},
      {"sampler validation", 120, sampler_validation},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_s) o.require(false, "runtime over " + fmt("%g", c.limit_s) + " s");
    failures += !o.pass;
    std::printf("%s %2zu %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
