#pragma once

#include <optional>
#include <vector>

#include "mcw/model.hpp"

namespace mcw {

/// I(x) with 0 log 0 = 0. Throws DomainError for |x| > 1.
double binary_entropy(double x);

/// Clamped arctanh used by gradients.
double safe_atanh(double x);

/// f(x) = 1/2 (x, aJa x) + (a h + linear, x) - sum_p a_p I(x_p).
/// The weights a are the limiting form factors, the realized ones at some N,
/// or target ratios; `linear` carries the tilt of the tilted measure.
struct FreeEnergy {
  Mat J;
  Vec h;
  Vec alpha;
  Vec linear;

  int K() const { return static_cast<int>(h.size()); }

  static FreeEnergy limiting(const ModelSpec& spec);
  static FreeEnergy with_alpha(const ModelSpec& spec, const Vec& alpha);
  static FreeEnergy finite(const ModelSpec& spec, const FiniteSizes& sizes);
  /// f_{N,t}: the finite-N functional plus N^-1/2 (t, sqrt(alpha_N) x).
  static FreeEnergy tilted(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t);
};

double f_eval(const FreeEnergy& fe, const Vec& x);
Vec grad_f(const FreeEnergy& fe, const Vec& x);
Mat hessian_f(const FreeEnergy& fe, const Vec& x);

double f_eval(const ModelSpec& spec, const Vec& x);
Vec grad_f(const ModelSpec& spec, const Vec& x);
Mat hessian_f(const ModelSpec& spec, const Vec& x);

/// x -> tanh(J a x + h + linear / a).
Vec fixed_point_map(const FreeEnergy& fe, const Vec& x);

enum class PointKind { Maximum, Saddle, Minimum };

const char* kind_name(PointKind k);

struct StationaryPoint {
  Vec x;
  double f_value = 0.0;
  double grad_norm = 0.0;
  Mat hessian;
  Vec hess_eigs;
  PointKind kind = PointKind::Saddle;
  int basin_seed_count = 1;
};

inline constexpr double kStationaryGradTol = 1e-10;
inline constexpr double kEigTol = 1e-9;
inline constexpr double kDedupTol = 1e-7;

/// Evaluates f, gradient and Hessian at x and classifies the point.
StationaryPoint describe_point(const FreeEnergy& fe, const Vec& x);

struct FixedPointOptions {
  double tol = 1e-13;
  long max_iter = 100000;
};

/// Damped iteration of the tanh map followed by Newton polishing. Returns
/// nullopt when the iteration does not converge or the polished point fails
/// gradient validation.
std::optional<StationaryPoint> fixed_point_iterate(const FreeEnergy& fe, const Vec& x0,
                                                   double damping,
                                                   const FixedPointOptions& opts = {});
std::optional<StationaryPoint> fixed_point_iterate(const ModelSpec& spec, const Vec& x0,
                                                   double damping);

/// Newton on u - (J a tanh(u) + h + linear/a) = 0 with x = tanh(u).
/// Finds stationary points of every inertia.
std::optional<StationaryPoint> newton_stationary(const FreeEnergy& fe, const Vec& x0);

struct StationarySearch {
  int grid_density = 7;
  long max_seeds = 100000;
  int threads = 1;
};

/// All stationary points reachable from the seed set, deduplicated and sorted
/// lexicographically in x.
std::vector<StationaryPoint> find_all_stationary(const FreeEnergy& fe,
                                                 const StationarySearch& search = {});
std::vector<StationaryPoint> find_all_stationary(const ModelSpec& spec, int grid_density = 7);

struct MaximizerSet {
  std::vector<StationaryPoint> points;
  double f_max = 0.0;
  bool degenerate = false;
};

/// Stationary points whose value is within tie_tol of the largest one.
MaximizerSet global_maximizers(const FreeEnergy& fe, double tie_tol = 1e-9,
                               const StationarySearch& search = {});
MaximizerSet global_maximizers(const ModelSpec& spec, double tie_tol = 1e-9);

/// The single nondegenerate global maximizer; throws NumericalError otherwise.
StationaryPoint unique_maximizer(const FreeEnergy& fe, const StationarySearch& search = {});

}  // namespace mcw
