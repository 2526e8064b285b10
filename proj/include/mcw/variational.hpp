#pragma once

#include <string>
#include <vector>

#include "mcw/model.hpp"

namespace mcw {

/// log of the integral of exp(sigma c) against the prior.
double log_mgf(const PriorSpec& prior, double c);
/// Derivative of log_mgf in c: the tilted mean of sigma.
double mean_fn(const PriorSpec& prior, double c);
/// Second derivative of log_mgf in c: the tilted variance of sigma.
double mean_fn_deriv(const PriorSpec& prior, double c);

/// Effective fields c = J alpha x + h.
Vec effective_field(const ModelSpec& spec, const Vec& x);

double p_var(const ModelSpec& spec, const Vec& x);
Vec grad_p_var(const ModelSpec& spec, const Vec& x);
Mat hess_p_var(const ModelSpec& spec, const Vec& x);

/// Solutions of m = Psi(J alpha m + h), found by multi-start Newton.
std::vector<Vec> mean_field_points(const ModelSpec& spec, int threads = 1);

enum class SaddleCoordinates { Rotated, Original };

struct SaddleOptions {
  double grad_tol = 1e-9;
  double grid_spacing = 0.25;
  double grid_half_width = 1.5;
  long max_seeds = 4096;
  double zero_tol = kDefaultZeroTol;
  /// Original is accepted only when Delta has no negative eigenvalue.
  SaddleCoordinates coordinates = SaddleCoordinates::Rotated;
  int threads = 1;
};

struct SaddleCandidate {
  Vec x;
  Vec z;
  double value = 0.0;
  double grad_norm = 0.0;
  bool inertia_ok = false;
  bool certified = false;
};

struct SaddleResult {
  double value = 0.0;
  Vec z_star;
  Vec x_star;
  double grad_norm = 0.0;
  bool converged = false;
  double multistart_spread = 0.0;
  int a = 0;
  std::string method;
  std::vector<SaddleCandidate> candidates;
};

/// Thrown when no stationary point with the required inertia exists.
class SaddleNotFound : public NumericalError {
 public:
  SaddleNotFound(const std::string& msg, std::vector<SaddleCandidate> points)
      : NumericalError(msg), candidates(std::move(points)) {}
  std::vector<SaddleCandidate> candidates;
};

/// inf over the nonpositive eigendirections, sup over the positive ones, of
/// p_var(O z).
SaddleResult infsup_solve(const ModelSpec& spec, const SaddleOptions& opts = {});

}  // namespace mcw
