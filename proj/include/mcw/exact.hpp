#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mcw/landscape.hpp"
#include "mcw/model.hpp"

namespace mcw {

/// log C(N_l, N_l (1 + x) / 2). Throws ValidationError if the occupancy is
/// not an integer in [0, N_l].
double log_binomial_count(long N_l, double x);

/// Magnetization grid: species l takes values -1 + 2n/N_l, n = 0..N_l.
/// Cells are indexed row-major with species 0 outermost.
struct SectorGrid {
  FiniteSizes sizes;
  std::vector<std::vector<double>> values;
  std::vector<std::size_t> strides;
  std::size_t total_cells = 0;

  explicit SectorGrid(FiniteSizes fs);
  SectorGrid() = default;

  int K() const { return static_cast<int>(values.size()); }
  Vec point(std::size_t cell) const;
};

struct SectorLaw {
  SectorGrid grid;
  std::vector<double> log_weights;
  double log_Z = kNegInf;
  Vec t;

  double probability(std::size_t cell) const;
};

struct ExactOptions {
  double budget = 2e7;
  int threads = 1;
};

/// Exact law of the magnetization vector under the counting-measure Gibbs
/// weight, optionally tilted by sqrt(N) (t, sqrt(alpha_N) m).
SectorLaw sector_law(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t,
                     const ExactOptions& opts = {});
SectorLaw sector_law(const ModelSpec& spec, long N, const Vec& t, const ExactOptions& opts = {});

/// log Z / N with t = 0.
double exact_log_pressure(const ModelSpec& spec, long N, const ExactOptions& opts = {});
double exact_log_pressure(const ModelSpec& spec, const FiniteSizes& sizes, const ExactOptions& opts = {});

struct LawMoments {
  Vec center;
  Vec mean;
  Mat cov;
  /// Mean and covariance of sqrt(N) sqrt(alpha_N) (m - center).
  Vec scaled_mean;
  Mat scaled_cov;
};

LawMoments moments(const SectorLaw& law, const Vec& center, int threads = 1);

/// log E[exp(sqrt(N) (t, sqrt(alpha_N) (m - center)))] by reweighting.
double law_log_mgf(const SectorLaw& law, const Vec& center, const Vec& t);
double law_mgf(const SectorLaw& law, const Vec& center, const Vec& t);

/// The law restricted to cells inside the box and renormalized. The returned
/// log_Z is the restricted partition function.
SectorLaw conditional_law(const SectorLaw& law, const Box& box);

/// Probability mass of the box under the law.
double box_mass(const SectorLaw& law, const Box& box);

struct LaplaceEstimate {
  double log_Z_estimate = 0.0;
  Vec mu_Nt;
  Mat hess;
  std::string error_order_note;
};

/// Leading-order saddle-point estimate of log Z_{N,t}:
/// N f(mu) - 1/2 log det(-H) - 1/2 sum log(1 - mu_l^2) + 1/2 sum log alpha_N,l.
LaplaceEstimate laplace_log_Z(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t);
LaplaceEstimate laplace_log_Z(const ModelSpec& spec, long N, const Vec& t);

/// Gibbs mass outside the box |m_l - mu_l| < N_l^(-1/2 + delta) centered at
/// the maximizer of f_{N,t}.
double concentration_probe(const ModelSpec& spec, long N, const Vec& t, double delta,
                           const ExactOptions& opts = {});

/// Smallest C with log A >= -N I(x) - log(C sqrt(N)) for every cell and N <= 1000.
double stirling_constant();

}  // namespace mcw
