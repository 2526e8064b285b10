#include "mcw/clt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mcw {

namespace {

void require_nondegenerate(const StationaryPoint& point) {
  if (point.hess_eigs.maxCoeff() > kEigTol) {
    throw ValidationError("point is not a maximum (largest Hessian eigenvalue " +
                          format_double(point.hess_eigs.maxCoeff()) + ")");
  }
  if (!(point.hess_eigs.maxCoeff() < -kEigTol)) {
    throw NumericalError("Hessian at the maximizer is not negative definite (largest eigenvalue " +
                         format_double(point.hess_eigs.maxCoeff()) + ")");
  }
}

}  // namespace

Vec mu_shift_direction(const ModelSpec& spec, const StationaryPoint& point) {
  require_nondegenerate(point);
  const Vec rhs = spec.alpha.cwiseProduct(spec.J * point.x.cwiseProduct(spec.beta));
  return -point.hessian.ldlt().solve(rhs);
}

CltParams clt_params(const ModelSpec& spec, const StationaryPoint& point) {
  if (spec.theta < 0.5) throw ValidationError("theta < 1/2 is outside the scope of the limit theorems");
  require_nondegenerate(point);
  const Vec sa = spec.alpha.cwiseSqrt();
  const Mat inv_neg = (-point.hessian).llt().solve(Mat::Identity(spec.K, spec.K));
  CltParams cp;
  cp.mu = point.x;
  cp.theta = spec.theta;
  Mat sigma = sa.asDiagonal() * inv_neg * sa.asDiagonal();
  cp.sigma = 0.5 * (sigma + sigma.transpose());
  cp.nu = spec.theta == 0.5 ? Vec(sa.cwiseProduct(mu_shift_direction(spec, point))) : Vec(Vec::Zero(spec.K));
  return cp;
}

namespace {

bool strictly_inside(const Box& box, const Vec& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Interval& iv = box[static_cast<std::size_t>(i)];
    if (!(x(i) > iv.lo && x(i) < iv.hi)) return false;
  }
  return true;
}

std::string box_label(std::size_t i) { return "box " + std::to_string(i); }

// Largest f over points sampled on the faces of the box, clipped to [-1,1].
double boundary_sup(const FreeEnergy& fe, const Box& box) {
  const int K = fe.K();
  long per = 1;
  if (K > 1) per = static_cast<long>(std::ceil(std::pow(1000.0, 1.0 / (K - 1))));
  double sup = kNegInf;
  for (int face = 0; face < K; ++face) {
    const Interval& fi = box[static_cast<std::size_t>(face)];
    for (double fixed : {fi.lo, fi.hi}) {
      const double fx = std::clamp(fixed, -1.0, 1.0);
      std::vector<long> idx(static_cast<std::size_t>(K), 0);
      for (;;) {
        Vec x(K);
        for (int i = 0; i < K; ++i) {
          if (i == face) {
            x(i) = fx;
            continue;
          }
          const Interval& iv = box[static_cast<std::size_t>(i)];
          const double lo = std::max(iv.lo, -1.0), hi = std::min(iv.hi, 1.0);
          const double frac = per == 1 ? 0.5 : static_cast<double>(idx[static_cast<std::size_t>(i)]) / static_cast<double>(per - 1);
          x(i) = lo + frac * (hi - lo);
        }
        sup = std::max(sup, f_eval(fe, x));
        int d = K - 1;
        for (; d >= 0; --d) {
          if (d == face) continue;
          if (++idx[static_cast<std::size_t>(d)] < per) break;
          idx[static_cast<std::size_t>(d)] = 0;
        }
        if (d < 0) break;
      }
    }
  }
  return sup;
}

}  // namespace

std::vector<CltParams> conditional_clt_params(const ModelSpec& spec, const MaximizerSet& maximizers,
                                              const std::vector<Box>& boxes) {
  const FreeEnergy fe = FreeEnergy::limiting(spec);
  const auto stationary = find_all_stationary(fe);
  std::vector<CltParams> out;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const Box& box = boxes[b];
    if (static_cast<int>(box.size()) != spec.K) throw ValidationError(box_label(b) + " must have K intervals");
    const StationaryPoint* inside = nullptr;
    int count = 0;
    for (const auto& p : maximizers.points) {
      if (strictly_inside(box, p.x)) {
        inside = &p;
        ++count;
      }
    }
    if (count != 1) {
      throw ValidationError(box_label(b) + " contains " + std::to_string(count) +
                            " maximizers in its interior; exactly one is required");
    }
    const double f_mu = inside->f_value;
    for (const auto& sp : stationary) {
      if ((sp.x - inside->x).cwiseAbs().maxCoeff() <= kDedupTol) continue;
      if (box_contains(box, sp.x) && sp.f_value >= f_mu - 1e-9) {
        throw ValidationError(box_label(b) + " contains another stationary point with f >= f(mu)");
      }
    }
    if (boundary_sup(fe, box) >= f_mu - 1e-9) {
      throw ValidationError(box_label(b) + ": f on the box boundary reaches the maximizer value");
    }
    CltParams cp = clt_params(spec, *inside);
    cp.conditioned_box = box;
    out.push_back(std::move(cp));
  }
  return out;
}

std::vector<Vec> mgf_probe_set(int K) {
  std::vector<Vec> T;
  for (int l = 0; l < K; ++l) {
    for (double s : {0.5, -0.5, 1.0, -1.0}) {
      Vec t = Vec::Zero(K);
      t(l) = s;
      T.push_back(t);
    }
  }
  for (int l = 0; l < K; ++l) {
    for (int m = l + 1; m < K; ++m) {
      Vec t = Vec::Zero(K);
      t(l) = 0.5;
      t(m) = 0.5;
      T.push_back(t);
    }
  }
  return T;
}

namespace {

bool decreasing(const std::vector<double>& v) {
  if (v.size() < 2) return false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

CltParams prediction_for(const ModelSpec& spec, const std::optional<Box>& box) {
  const MaximizerSet ms = global_maximizers(spec);
  if (box) return conditional_clt_params(spec, ms, {*box}).front();
  if (ms.points.size() != 1) {
    throw ValidationError("the model has " + std::to_string(ms.points.size()) +
                          " global maximizers; supply a conditioning box");
  }
  if (ms.degenerate) throw NumericalError("the global maximizer is degenerate");
  return clt_params(spec, ms.points.front());
}

}  // namespace

VerifyReport verify_clt(const ModelSpec& spec, const std::vector<long>& N_list, CltSource source,
                        const std::optional<Box>& box, const VerifyOptions& opts) {
  if (N_list.empty()) throw ValidationError("N list is empty");
  VerifyReport rep;
  rep.prediction = prediction_for(spec, box);
  const CltParams& cp = rep.prediction;
  const auto T = mgf_probe_set(spec.K);
  const double sigma_scale = cp.sigma.cwiseAbs().maxCoeff();

  rep.rows.resize(N_list.size());
  for (std::size_t r = 0; r < N_list.size(); ++r) {
    VerifyRow& row = rep.rows[r];
    row.N = N_list[r];
    const FiniteSizes sizes = finite_sizes(spec, row.N);
    const Vec s = std::sqrt(static_cast<double>(sizes.N)) * sizes.alpha_N.cwiseSqrt();
    std::vector<double> log_mgf(T.size());
    if (source == CltSource::Exact) {
      ExactOptions eo = opts.exact;
      eo.threads = opts.threads;
      SectorLaw law = sector_law(spec, sizes, Vec::Zero(spec.K), eo);
      if (box) law = conditional_law(law, *box);
      const LawMoments mom = moments(law, cp.mu, opts.threads);
      row.scaled_mean = mom.scaled_mean;
      row.scaled_cov = mom.scaled_cov;
      for (std::size_t k = 0; k < T.size(); ++k) log_mgf[k] = law_log_mgf(law, cp.mu, T[k]);
    } else {
      ChainConfig cc = opts.chain;
      cc.init = InitKind::AtPoint;
      cc.init_point = cp.mu;
      cc.keep_box = box;
      cc.seed = derive_seed(opts.chain.seed, static_cast<std::uint64_t>(row.N));
      const MultiChainResult mc = multichain(spec, sizes, cc, opts.chains, opts.threads);
      if (mc.pooled.rows() < 2) throw NumericalError("too few retained samples");
      Mat y = mc.pooled;
      y.rowwise() -= cp.mu.transpose();
      y = y * s.asDiagonal();
      row.scaled_mean = y.colwise().mean().transpose();
      const Mat centered = y.rowwise() - row.scaled_mean.transpose();
      row.scaled_cov = centered.transpose() * centered / static_cast<double>(y.rows() - 1);
      for (std::size_t k = 0; k < T.size(); ++k) {
        LogSumExp acc;
        for (Eigen::Index i = 0; i < y.rows(); ++i) acc.add(y.row(i).dot(T[k]));
        log_mgf[k] = acc.value() - std::log(static_cast<double>(y.rows()));
      }
    }
    row.mean_err = (row.scaled_mean - cp.nu).cwiseAbs();
    row.cov_rel_err = (row.scaled_cov - cp.sigma).cwiseAbs().maxCoeff() / sigma_scale;
    row.mgf_err = 0.0;
    for (std::size_t k = 0; k < T.size(); ++k) {
      const double predicted = 0.5 * T[k].dot(cp.sigma * T[k]) + cp.nu.dot(T[k]);
      row.mgf_err = std::max(row.mgf_err, std::abs(log_mgf[k] - predicted));
    }
    row.pass = row.mean_err.maxCoeff() <= opts.mean_tol && row.cov_rel_err <= opts.cov_tol &&
               row.mgf_err <= opts.mgf_tol;
  }
  std::vector<double> me, ce, ge;
  for (const auto& row : rep.rows) {
    me.push_back(row.mean_err.maxCoeff());
    ce.push_back(row.cov_rel_err);
    ge.push_back(row.mgf_err);
  }
  rep.mean_err_decreasing = decreasing(me);
  rep.cov_err_decreasing = decreasing(ce);
  rep.mgf_err_decreasing = decreasing(ge);
  return rep;
}

MuShiftReport mu_shift_check(const ModelSpec& spec, const std::vector<long>& N_list) {
  MuShiftReport rep;
  const StationaryPoint mu = unique_maximizer(FreeEnergy::limiting(spec));
  rep.mu = mu.x;
  const Vec pred = mu_shift_direction(spec, mu);
  std::vector<double> lx, ly;
  for (long N : N_list) {
    const double dN = static_cast<double>(N);
    const Vec r = target_ratios(spec, dN);
    if ((r.array() <= 0.0).any()) throw ValidationError("perturbation too large for N");
    StationaryPoint muN;
    try {
      muN = unique_maximizer(FreeEnergy::with_alpha(spec, r));
    } catch (const NumericalError& e) {
      throw NumericalError("maximizer structure changes at N=" + std::to_string(N) + ": " + e.what());
    }
    MuShiftRow row;
    row.N = N;
    row.mu_N = muN.x;
    const double scale = std::pow(dN, spec.theta);
    row.scaled_shift = scale * (muN.x - mu.x);
    row.predicted = pred;
    const double pn = pred.norm();
    row.rel_err = pn > 0.0 ? (row.scaled_shift - pred).norm() / pn : (row.scaled_shift - pred).norm();
    row.residual = (muN.x - mu.x - pred / scale).norm();
    if (row.residual > 0.0) {
      lx.push_back(std::log(dN));
      ly.push_back(std::log(row.residual));
    }
    rep.rows.push_back(row);
  }
  rep.residual_slope = std::numeric_limits<double>::quiet_NaN();
  if (lx.size() >= 2) {
    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    rep.residual_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

}  // namespace mcw
