#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcw/common.hpp"

namespace mcw {

struct IsingPrior {};

struct AtomsPrior {
  std::vector<double> values;
  std::vector<double> weights;
};

struct QuadraturePrior {
  std::vector<double> nodes;
  std::vector<double> weights;
};

using PriorSpec = std::variant<IsingPrior, AtomsPrior, QuadraturePrior>;

bool is_ising(const PriorSpec& prior);

/// Support points and weights of the prior as a flat atom list.
void prior_atoms(const PriorSpec& prior, std::vector<double>& values, std::vector<double>& weights);

struct ModelSpec {
  int K = 1;
  Mat J;
  Vec h;
  PriorSpec prior = IsingPrior{};
  Vec alpha;
  Vec beta;
  double theta = 0.5;
};

/// Checks every invariant and returns a normalized copy: J symmetrized,
/// prior weights renormalized. Throws ValidationError on violation.
ModelSpec validate(ModelSpec spec);

/// Convenience for tests and tools; beta defaults to zero.
ModelSpec make_spec(const Mat& J, const Vec& h, const Vec& alpha, PriorSpec prior = IsingPrior{},
                    const Vec& beta = Vec(), double theta = 0.5);

ModelSpec load_spec_json(const std::string& text);
ModelSpec load_spec_file(const std::string& path);
std::string spec_to_json(const ModelSpec& spec);

/// diag(a) J diag(a).
Mat scaled_delta(const Mat& J, const Vec& a);
Mat build_delta(const ModelSpec& spec);
Vec build_h_tilde(const ModelSpec& spec);

struct SpectralSplit {
  Mat delta;
  Vec eigenvalues;
  int a = 0;
  Mat O;
  Mat delta_plus;
  Mat delta_minus;
};

inline constexpr double kDefaultZeroTol = 1e-10;

SpectralSplit spectral_split(const Mat& delta, double zero_tol = kDefaultZeroTol);

/// Species sizes at scale N. N is the scale of the Hamiltonian (the 1/N in
/// the mean-field coupling). Sizes apportion round(N * sum(r)) spins, where
/// r_p = alpha_p + N^-theta beta_p, so they sum to N whenever sum(beta) = 0.
/// alpha_N = sizes / N.
struct FiniteSizes {
  long N = 0;
  std::vector<long> sizes;
  Vec alpha_N;

  long total() const;
};

FiniteSizes finite_sizes(const ModelSpec& spec, long N);

/// Builds FiniteSizes directly from integer sizes with scale N = sum(sizes).
FiniteSizes sizes_from_counts(const std::vector<long>& counts);

/// Target ratios alpha + N^-theta beta without integer rounding.
Vec target_ratios(const ModelSpec& spec, double N);

/// -H_N / N = 1/2 (m, Delta_N m) + (h~_N, m) with Delta_N built from alpha_N.
double hamiltonian_density(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& m);

}  // namespace mcw
