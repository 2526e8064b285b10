#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcw/exact.hpp"
#include "mcw/landscape.hpp"
#include "mcw/model.hpp"
#include "mcw/sampler.hpp"

namespace mcw {

struct CltParams {
  Vec mu;
  Vec nu;
  Mat sigma;
  double theta = 0.5;
  std::optional<Box> conditioned_box;
};

/// Limit law of sqrt(N) sqrt(alpha_N) (m - mu) at a nondegenerate maximum:
/// sigma = sqrt(a) (-H)^-1 sqrt(a), nu = -sqrt(a) H^-1 a J diag(mu) beta when
/// theta = 1/2 and zero otherwise.
CltParams clt_params(const ModelSpec& spec, const StationaryPoint& point);

/// Shift direction -H^-1 a J diag(mu) beta of the finite-N maximizer.
Vec mu_shift_direction(const ModelSpec& spec, const StationaryPoint& point);

/// Per-box parameters. Each box must hold exactly one maximizer in its
/// interior, f must stay below its value on the sampled box boundary, and any
/// other stationary point in the box must have a strictly lower value.
std::vector<CltParams> conditional_clt_params(const ModelSpec& spec, const MaximizerSet& maximizers,
                                              const std::vector<Box>& boxes);

enum class CltSource { Exact, Sampler };

struct VerifyOptions {
  double mean_tol = 0.05;
  double cov_tol = 0.10;
  double mgf_tol = 0.10;
  int threads = 1;
  ExactOptions exact;
  ChainConfig chain;
  int chains = 4;
};

struct VerifyRow {
  long N = 0;
  Vec scaled_mean;
  Mat scaled_cov;
  Vec mean_err;
  double cov_rel_err = 0.0;
  double mgf_err = 0.0;
  bool pass = false;
};

struct VerifyReport {
  CltParams prediction;
  std::vector<VerifyRow> rows;
  bool mean_err_decreasing = false;
  bool cov_err_decreasing = false;
  bool mgf_err_decreasing = false;
};

/// Fixed MGF probe set: +-0.5 e_l, +-1.0 e_l, 0.5 (e_l + e_m) for l < m.
std::vector<Vec> mgf_probe_set(int K);

VerifyReport verify_clt(const ModelSpec& spec, const std::vector<long>& N_list, CltSource source,
                        const std::optional<Box>& box = std::nullopt, const VerifyOptions& opts = {});

struct MuShiftRow {
  long N = 0;
  Vec mu_N;
  Vec scaled_shift;
  Vec predicted;
  double rel_err = 0.0;
  double residual = 0.0;
};

struct MuShiftReport {
  Vec mu;
  std::vector<MuShiftRow> rows;
  /// Least-squares slope of log residual against log N; NaN when undefined.
  double residual_slope = 0.0;
};

/// Maximizer of f built on the target ratios alpha + N^-theta beta compared
/// with the first-order prediction.
MuShiftReport mu_shift_check(const ModelSpec& spec, const std::vector<long>& N_list);

}  // namespace mcw
