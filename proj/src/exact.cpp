#include "mcw/exact.hpp"

#include <algorithm>
#include <cmath>

namespace mcw {

double log_binomial_count(long N_l, double x) {
  if (N_l < 0) throw ValidationError("log_binomial_count: negative size");
  const double occ = static_cast<double>(N_l) * (1.0 + x) / 2.0;
  const double k = std::round(occ);
  if (std::abs(occ - k) > 1e-9 * std::max(1.0, static_cast<double>(N_l)) || k < 0.0 ||
      k > static_cast<double>(N_l)) {
    throw ValidationError("log_binomial_count: occupancy " + format_double(occ) +
                          " is not an integer in [0," + std::to_string(N_l) + "]");
  }
  const double n = static_cast<double>(N_l);
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

SectorGrid::SectorGrid(FiniteSizes fs) : sizes(std::move(fs)) {
  const int K = static_cast<int>(sizes.sizes.size());
  values.resize(static_cast<std::size_t>(K));
  strides.assign(static_cast<std::size_t>(K), 1);
  double cells = 1.0;
  for (int l = 0; l < K; ++l) {
    const long Nl = sizes.sizes[static_cast<std::size_t>(l)];
    auto& v = values[static_cast<std::size_t>(l)];
    v.resize(static_cast<std::size_t>(Nl + 1));
    for (long n = 0; n <= Nl; ++n) {
      v[static_cast<std::size_t>(n)] = static_cast<double>(2 * n - Nl) / static_cast<double>(Nl);
    }
    cells *= static_cast<double>(Nl + 1);
  }
  for (int l = K - 2; l >= 0; --l) {
    strides[static_cast<std::size_t>(l)] =
        strides[static_cast<std::size_t>(l + 1)] * values[static_cast<std::size_t>(l + 1)].size();
  }
  total_cells = cells > 1e18 ? 0 : static_cast<std::size_t>(cells);
}

Vec SectorGrid::point(std::size_t cell) const {
  Vec x(K());
  for (int l = 0; l < K(); ++l) {
    const std::size_t n = (cell / strides[static_cast<std::size_t>(l)]) % values[static_cast<std::size_t>(l)].size();
    x(l) = values[static_cast<std::size_t>(l)][n];
  }
  return x;
}

double SectorLaw::probability(std::size_t cell) const {
  return std::exp(log_weights[cell] - log_Z);
}

namespace {

// Contiguous cell ranges, one per value of the outermost species.
struct Chunking {
  std::size_t chunks;
  std::size_t size;
};

Chunking chunking(const SectorGrid& g) {
  return {g.values.front().size(), g.strides.front()};
}

}  // namespace

SectorLaw sector_law(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t,
                     const ExactOptions& opts) {
  if (!is_ising(spec.prior)) throw ValidationError("exact enumeration supports the Ising prior only");
  if (static_cast<int>(sizes.sizes.size()) != spec.K) throw ValidationError("sizes must have length K");
  const Vec tilt = t.size() == 0 ? Vec::Zero(spec.K) : t;
  if (tilt.size() != spec.K) throw ValidationError("tilt must have length K");
  double cells = 1.0;
  for (long n : sizes.sizes) cells *= static_cast<double>(n + 1);
  if (cells > opts.budget) {
    throw ValidationError("sector grid has " + format_double(cells) + " cells, above the budget of " +
                          format_double(opts.budget) + "; use the Monte Carlo sampler instead");
  }

  SectorLaw law;
  law.grid = SectorGrid(sizes);
  law.t = tilt;
  const SectorGrid& g = law.grid;
  const int K = spec.K;
  const double N = static_cast<double>(sizes.N);
  const Mat dN = scaled_delta(spec.J, sizes.alpha_N);
  const Vec hN = sizes.alpha_N.cwiseProduct(spec.h);
  const Vec lin = std::sqrt(N) * tilt.cwiseProduct(sizes.alpha_N.cwiseSqrt());

  std::vector<std::vector<double>> logA(static_cast<std::size_t>(K));
  for (int l = 0; l < K; ++l) {
    const long Nl = sizes.sizes[static_cast<std::size_t>(l)];
    for (double x : g.values[static_cast<std::size_t>(l)]) logA[static_cast<std::size_t>(l)].push_back(log_binomial_count(Nl, x));
  }

  law.log_weights.resize(g.total_cells);
  const Chunking ch = chunking(g);
  std::vector<LogSumExp> partial(ch.chunks);
  parallel_for(ch.chunks, opts.threads, [&](std::size_t c) {
    std::vector<std::size_t> n(static_cast<std::size_t>(K), 0);
    n[0] = c;
    Vec x(K);
    for (int l = 0; l < K; ++l) x(l) = g.values[static_cast<std::size_t>(l)][n[static_cast<std::size_t>(l)]];
    LogSumExp acc;
    const std::size_t begin = c * ch.size;
    for (std::size_t i = begin; i < begin + ch.size; ++i) {
      double la = 0.0;
      for (int l = 0; l < K; ++l) la += logA[static_cast<std::size_t>(l)][n[static_cast<std::size_t>(l)]];
      const double energy = N * (0.5 * x.dot(dN * x) + hN.dot(x)) + lin.dot(x);
      const double lw = la + energy;
      law.log_weights[i] = lw;
      acc.add(lw);
      for (int l = K - 1; l >= 1; --l) {
        auto& nl = n[static_cast<std::size_t>(l)];
        if (++nl < g.values[static_cast<std::size_t>(l)].size()) {
          x(l) = g.values[static_cast<std::size_t>(l)][nl];
          break;
        }
        nl = 0;
        x(l) = g.values[static_cast<std::size_t>(l)][0];
      }
    }
    partial[c] = acc;
  });
  LogSumExp total;
  for (const auto& p : partial) total.merge(p);
  law.log_Z = total.value();
  return law;
}

SectorLaw sector_law(const ModelSpec& spec, long N, const Vec& t, const ExactOptions& opts) {
  return sector_law(spec, finite_sizes(spec, N), t, opts);
}

double exact_log_pressure(const ModelSpec& spec, const FiniteSizes& sizes, const ExactOptions& opts) {
  return sector_law(spec, sizes, Vec::Zero(spec.K), opts).log_Z / static_cast<double>(sizes.N);
}

double exact_log_pressure(const ModelSpec& spec, long N, const ExactOptions& opts) {
  return exact_log_pressure(spec, finite_sizes(spec, N), opts);
}

namespace {

struct MomentAcc {
  std::vector<CompensatedSum> first;
  std::vector<CompensatedSum> second;
  explicit MomentAcc(int K)
      : first(static_cast<std::size_t>(K)), second(static_cast<std::size_t>(K * K)) {}
};

}  // namespace

LawMoments moments(const SectorLaw& law, const Vec& center, int threads) {
  const SectorGrid& g = law.grid;
  const int K = g.K();
  if (center.size() != K) throw ValidationError("center must have length K");
  if (law.log_Z == kNegInf) throw ValidationError("law has zero mass");
  const Chunking ch = chunking(g);
  std::vector<MomentAcc> parts(ch.chunks, MomentAcc(K));
  parallel_for(ch.chunks, threads, [&](std::size_t c) {
    MomentAcc& acc = parts[c];
    const std::size_t begin = c * ch.size;
    for (std::size_t i = begin; i < begin + ch.size; ++i) {
      if (law.log_weights[i] == kNegInf) continue;
      const double p = std::exp(law.log_weights[i] - law.log_Z);
      if (p == 0.0) continue;
      const Vec y = g.point(i) - center;
      for (int a = 0; a < K; ++a) {
        acc.first[static_cast<std::size_t>(a)].add(p * y(a));
        for (int b = 0; b <= a; ++b) acc.second[static_cast<std::size_t>(a * K + b)].add(p * y(a) * y(b));
      }
    }
  });
  MomentAcc total(K);
  for (const auto& p : parts) {
    for (std::size_t k = 0; k < total.first.size(); ++k) total.first[k].merge(p.first[k]);
    for (std::size_t k = 0; k < total.second.size(); ++k) total.second[k].merge(p.second[k]);
  }
  Vec ey(K);
  Mat eyy(K, K);
  for (int a = 0; a < K; ++a) {
    ey(a) = total.first[static_cast<std::size_t>(a)].value();
    for (int b = 0; b <= a; ++b) {
      eyy(a, b) = eyy(b, a) = total.second[static_cast<std::size_t>(a * K + b)].value();
    }
  }
  LawMoments m;
  m.center = center;
  m.mean = center + ey;
  m.cov = eyy - ey * ey.transpose();
  const Vec s = std::sqrt(static_cast<double>(g.sizes.N)) * g.sizes.alpha_N.cwiseSqrt();
  m.scaled_mean = s.cwiseProduct(ey);
  m.scaled_cov = s.asDiagonal() * m.cov * s.asDiagonal();
  return m;
}

double law_log_mgf(const SectorLaw& law, const Vec& center, const Vec& t) {
  const SectorGrid& g = law.grid;
  const Vec s = std::sqrt(static_cast<double>(g.sizes.N)) * t.cwiseProduct(g.sizes.alpha_N.cwiseSqrt());
  LogSumExp acc;
  for (std::size_t i = 0; i < g.total_cells; ++i) {
    if (law.log_weights[i] == kNegInf) continue;
    acc.add(law.log_weights[i] + s.dot(g.point(i) - center));
  }
  return acc.value() - law.log_Z;
}

double law_mgf(const SectorLaw& law, const Vec& center, const Vec& t) {
  return std::exp(law_log_mgf(law, center, t));
}

SectorLaw conditional_law(const SectorLaw& law, const Box& box) {
  const SectorGrid& g = law.grid;
  if (static_cast<int>(box.size()) != g.K()) throw ValidationError("box must have K intervals");
  SectorLaw out;
  out.grid = g;
  out.t = law.t;
  out.log_weights.assign(g.total_cells, kNegInf);
  LogSumExp acc;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < g.total_cells; ++i) {
    if (!box_contains(box, g.point(i))) continue;
    ++inside;
    out.log_weights[i] = law.log_weights[i];
    acc.add(law.log_weights[i]);
  }
  if (inside == 0) throw ValidationError("box contains no grid cell");
  out.log_Z = acc.value();
  if (out.log_Z == kNegInf) throw ValidationError("box has zero probability mass");
  return out;
}

double box_mass(const SectorLaw& law, const Box& box) {
  const SectorGrid& g = law.grid;
  LogSumExp acc;
  for (std::size_t i = 0; i < g.total_cells; ++i) {
    if (box_contains(box, g.point(i))) acc.add(law.log_weights[i]);
  }
  return std::exp(acc.value() - law.log_Z);
}

LaplaceEstimate laplace_log_Z(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t) {
  if (!is_ising(spec.prior)) throw ValidationError("laplace_log_Z supports the Ising prior only");
  const Vec tilt = t.size() == 0 ? Vec::Zero(spec.K) : t;
  const FreeEnergy fe = FreeEnergy::tilted(spec, sizes, tilt);
  const MaximizerSet ms = global_maximizers(fe);
  if (ms.points.size() != 1) {
    throw NumericalError("Laplace expansion needs a unique maximizer; found " +
                         std::to_string(ms.points.size()));
  }
  if (ms.degenerate) throw NumericalError("Laplace expansion needs a nondegenerate maximizer");
  const StationaryPoint& mu = ms.points.front();
  LaplaceEstimate est;
  est.mu_Nt = mu.x;
  est.hess = mu.hessian;
  const double N = static_cast<double>(sizes.N);
  const double logdet = (-mu.hessian).llt().matrixL().toDenseMatrix().diagonal().array().log().sum() * 2.0;
  double s = N * mu.f_value - 0.5 * logdet;
  for (int l = 0; l < spec.K; ++l) {
    s += -0.5 * std::log1p(-mu.x(l) * mu.x(l)) + 0.5 * std::log(sizes.alpha_N(l));
  }
  est.log_Z_estimate = s;
  est.error_order_note = "relative error O(N^(-1/2+(K+2)delta)) for any small delta > 0";
  return est;
}

LaplaceEstimate laplace_log_Z(const ModelSpec& spec, long N, const Vec& t) {
  return laplace_log_Z(spec, finite_sizes(spec, N), t);
}

double concentration_probe(const ModelSpec& spec, long N, const Vec& t, double delta,
                           const ExactOptions& opts) {
  const FiniteSizes sizes = finite_sizes(spec, N);
  const Vec tilt = t.size() == 0 ? Vec::Zero(spec.K) : t;
  const StationaryPoint mu = unique_maximizer(FreeEnergy::tilted(spec, sizes, tilt));
  const SectorLaw law = sector_law(spec, sizes, tilt, opts);
  Vec width(spec.K);
  for (int l = 0; l < spec.K; ++l) {
    width(l) = std::pow(static_cast<double>(sizes.sizes[static_cast<std::size_t>(l)]), -0.5 + delta);
  }
  LogSumExp outside;
  for (std::size_t i = 0; i < law.grid.total_cells; ++i) {
    const Vec d = (law.grid.point(i) - mu.x).cwiseAbs();
    if (((d - width).array() >= 0.0).any()) outside.add(law.log_weights[i]);
  }
  return std::exp(outside.value() - law.log_Z);
}

double stirling_constant() {
  static const double cached = [] {
    double worst = kNegInf;
    for (long n = 1; n <= 1000; ++n) {
      const double dn = static_cast<double>(n);
      for (long k = 0; k <= n; ++k) {
        const double x = static_cast<double>(2 * k - n) / dn;
        const double logA = log_binomial_count(n, x);
        worst = std::max(worst, -dn * binary_entropy(x) - logA - 0.5 * std::log(dn));
      }
    }
    return std::exp(worst);
  }();
  return cached;
}

}  // namespace mcw
