#include "mcw/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

namespace mcw {

double binary_entropy(double x) {
  if (!(std::abs(x) <= 1.0)) throw DomainError("binary_entropy: |x| > 1 (x=" + format_double(x) + ")");
  auto xlogx = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
  return xlogx(0.5 * (1.0 - x)) + xlogx(0.5 * (1.0 + x));
}

double safe_atanh(double x) {
  constexpr double lim = 1.0 - 1e-15;
  const double c = std::clamp(x, -lim, lim);
  return 0.5 * std::log((1.0 + c) / (1.0 - c));
}

FreeEnergy FreeEnergy::with_alpha(const ModelSpec& spec, const Vec& alpha) {
  return FreeEnergy{spec.J, spec.h, alpha, Vec::Zero(spec.K)};
}

FreeEnergy FreeEnergy::limiting(const ModelSpec& spec) { return with_alpha(spec, spec.alpha); }

FreeEnergy FreeEnergy::finite(const ModelSpec& spec, const FiniteSizes& sizes) {
  return with_alpha(spec, sizes.alpha_N);
}

FreeEnergy FreeEnergy::tilted(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& t) {
  FreeEnergy fe = finite(spec, sizes);
  if (t.size() != spec.K) throw ValidationError("tilt must have length K");
  fe.linear = t.cwiseProduct(sizes.alpha_N.cwiseSqrt()) / std::sqrt(static_cast<double>(sizes.N));
  return fe;
}

namespace {

void require_interior(const Vec& x, const char* what) {
  if (!(x.cwiseAbs().maxCoeff() < 1.0)) {
    throw DomainError(std::string(what) + ": x must lie in the open cube (-1,1)^K");
  }
}

}  // namespace

double f_eval(const FreeEnergy& fe, const Vec& x) {
  const Vec ax = fe.alpha.cwiseProduct(x);
  double ent = 0.0;
  for (int p = 0; p < fe.K(); ++p) ent += fe.alpha(p) * binary_entropy(x(p));
  return 0.5 * ax.dot(fe.J * ax) + (fe.alpha.cwiseProduct(fe.h) + fe.linear).dot(x) - ent;
}

Vec grad_f(const FreeEnergy& fe, const Vec& x) {
  require_interior(x, "grad_f");
  Vec g = fe.alpha.cwiseProduct(fe.J * fe.alpha.cwiseProduct(x)) + fe.alpha.cwiseProduct(fe.h) + fe.linear;
  for (int p = 0; p < fe.K(); ++p) g(p) -= fe.alpha(p) * safe_atanh(x(p));
  return g;
}

Mat hessian_f(const FreeEnergy& fe, const Vec& x) {
  require_interior(x, "hessian_f");
  Mat H = scaled_delta(fe.J, fe.alpha);
  for (int p = 0; p < fe.K(); ++p) H(p, p) -= fe.alpha(p) / (1.0 - x(p) * x(p));
  return H;
}

double f_eval(const ModelSpec& spec, const Vec& x) { return f_eval(FreeEnergy::limiting(spec), x); }
Vec grad_f(const ModelSpec& spec, const Vec& x) { return grad_f(FreeEnergy::limiting(spec), x); }
Mat hessian_f(const ModelSpec& spec, const Vec& x) { return hessian_f(FreeEnergy::limiting(spec), x); }

Vec fixed_point_map(const FreeEnergy& fe, const Vec& x) {
  const Vec c = fe.J * fe.alpha.cwiseProduct(x) + fe.h + fe.linear.cwiseQuotient(fe.alpha);
  return c.array().tanh().matrix();
}

const char* kind_name(PointKind k) {
  switch (k) {
    case PointKind::Maximum: return "maximum";
    case PointKind::Minimum: return "minimum";
    case PointKind::Saddle: return "saddle";
  }
  return "saddle";
}

StationaryPoint describe_point(const FreeEnergy& fe, const Vec& x) {
  StationaryPoint sp;
  sp.x = x;
  sp.f_value = f_eval(fe, x);
  sp.grad_norm = grad_f(fe, x).norm();
  sp.hessian = hessian_f(fe, x);
  sp.hess_eigs = symmetric_eigenvalues(sp.hessian);
  if (sp.hess_eigs.maxCoeff() < -kEigTol) {
    sp.kind = PointKind::Maximum;
  } else if (sp.hess_eigs.minCoeff() > kEigTol) {
    sp.kind = PointKind::Minimum;
  } else {
    sp.kind = PointKind::Saddle;
  }
  return sp;
}

namespace {

Vec atanh_vec(const Vec& x) {
  Vec u(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) u(i) = safe_atanh(x(i));
  return u;
}

// Newton in u = atanh(x); returns the final x.
std::optional<Vec> newton_u(const FreeEnergy& fe, Vec u, int max_iter = 200) {
  const int K = fe.K();
  const Vec shift = fe.h + fe.linear.cwiseQuotient(fe.alpha);
  auto residual = [&](const Vec& uu) {
    const Vec x = uu.array().tanh().matrix();
    return Vec(uu - fe.J * fe.alpha.cwiseProduct(x) - shift);
  };
  Vec F = residual(u);
  for (int it = 0; it < max_iter; ++it) {
    if (!F.allFinite()) return std::nullopt;
    if (F.cwiseAbs().maxCoeff() == 0.0) break;
    const Vec x = u.array().tanh().matrix();
    const Vec sech2 = (1.0 - x.array().square()).matrix();
    const Mat Jac = Mat::Identity(K, K) - fe.J * fe.alpha.asDiagonal() * sech2.asDiagonal();
    Eigen::ColPivHouseholderQR<Mat> qr(Jac);
    if (qr.rank() < K) break;
    const Vec step = qr.solve(-F);
    if (!step.allFinite()) return std::nullopt;
    double lambda = 1.0;
    const double f0 = F.squaredNorm();
    Vec u_new = u + step;
    Vec F_new = residual(u_new);
    while (!(F_new.squaredNorm() < f0) && lambda > 1e-6) {
      lambda *= 0.5;
      u_new = u + lambda * step;
      F_new = residual(u_new);
    }
    if (!(F_new.squaredNorm() <= f0)) break;
    const double moved = (u_new - u).cwiseAbs().maxCoeff();
    u = u_new;
    F = F_new;
    if (moved <= 1e-15 * (1.0 + u.cwiseAbs().maxCoeff())) break;
  }
  return Vec(u.array().tanh().matrix());
}

std::optional<StationaryPoint> validated(const FreeEnergy& fe, const Vec& x) {
  if (!x.allFinite() || !(x.cwiseAbs().maxCoeff() < 1.0)) return std::nullopt;
  StationaryPoint sp = describe_point(fe, x);
  if (!(sp.grad_norm <= kStationaryGradTol)) return std::nullopt;
  return sp;
}

}  // namespace

std::optional<StationaryPoint> fixed_point_iterate(const FreeEnergy& fe, const Vec& x0,
                                                   double damping,
                                                   const FixedPointOptions& opts) {
  if (!(damping > 0.0 && damping <= 1.0)) throw ValidationError("damping must lie in (0,1]");
  if (x0.size() != fe.K() || !(x0.cwiseAbs().maxCoeff() <= 1.0)) {
    throw ValidationError("fixed_point_iterate: x0 must lie in [-1,1]^K");
  }
  Vec x = x0;
  bool converged = false;
  for (long it = 0; it < opts.max_iter; ++it) {
    const Vec next = (1.0 - damping) * x + damping * fixed_point_map(fe, x);
    const double moved = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (moved <= opts.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) return std::nullopt;
  const auto polished = newton_u(fe, atanh_vec(x));
  if (!polished) return std::nullopt;
  return validated(fe, *polished);
}

std::optional<StationaryPoint> fixed_point_iterate(const ModelSpec& spec, const Vec& x0,
                                                   double damping) {
  return fixed_point_iterate(FreeEnergy::limiting(spec), x0, damping);
}

std::optional<StationaryPoint> newton_stationary(const FreeEnergy& fe, const Vec& x0) {
  const auto x = newton_u(fe, atanh_vec(x0));
  if (!x) return std::nullopt;
  return validated(fe, *x);
}

namespace {

std::vector<Vec> seed_points(int K, const StationarySearch& search) {
  std::vector<Vec> seeds;
  const int d = search.grid_density;
  double total = std::pow(static_cast<double>(d), K);
  if (total <= static_cast<double>(search.max_seeds)) {
    const long n = static_cast<long>(total);
    for (long idx = 0; idx < n; ++idx) {
      Vec s(K);
      long rem = idx;
      for (int p = K - 1; p >= 0; --p) {
        const long k = rem % d;
        rem /= d;
        s(p) = -0.99 + 1.98 * static_cast<double>(k) / static_cast<double>(d - 1);
      }
      seeds.push_back(s);
    }
  } else {
    // Latin hypercube with a fixed generator so results are reproducible.
    std::mt19937_64 rng(0x5eedULL);
    const long n = search.max_seeds;
    std::vector<std::vector<long>> perms(static_cast<std::size_t>(K));
    for (auto& perm : perms) {
      perm.resize(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (long i = 0; i < n; ++i) {
      Vec s(K);
      for (int p = 0; p < K; ++p) {
        const double cell = static_cast<double>(perms[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)]);
        s(p) = -0.99 + 1.98 * (cell + u01(rng)) / static_cast<double>(n);
      }
      seeds.push_back(s);
    }
  }
  const long corners = 1L << K;
  for (long mask = 0; mask < corners && K <= 16; ++mask) {
    Vec s(K);
    for (int p = 0; p < K; ++p) s(p) = (mask >> p) & 1 ? 0.999 : -0.999;
    seeds.push_back(s);
  }
  return seeds;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return false;
}

}  // namespace

std::vector<StationaryPoint> find_all_stationary(const FreeEnergy& fe,
                                                 const StationarySearch& search) {
  if (search.grid_density < 2) throw ValidationError("grid_density must be at least 2");
  const std::vector<Vec> seeds = seed_points(fe.K(), search);
  std::vector<std::vector<StationaryPoint>> found(seeds.size());
  FixedPointOptions fp;
  fp.max_iter = 2000;
  parallel_for(seeds.size(), search.threads, [&](std::size_t i) {
    for (double damping : {1.0, 0.5, 0.25}) {
      if (auto sp = fixed_point_iterate(fe, seeds[i], damping, fp)) {
        found[i].push_back(std::move(*sp));
        break;
      }
    }
    if (auto sp = newton_stationary(fe, seeds[i])) found[i].push_back(std::move(*sp));
  });

  std::vector<StationaryPoint> unique;
  for (auto& list : found) {
    for (auto& sp : list) {
      bool merged = false;
      for (auto& u : unique) {
        if ((u.x - sp.x).cwiseAbs().maxCoeff() <= kDedupTol) {
          ++u.basin_seed_count;
          if (sp.grad_norm < u.grad_norm) {
            const int count = u.basin_seed_count;
            u = sp;
            u.basin_seed_count = count;
          }
          merged = true;
          break;
        }
      }
      if (!merged) unique.push_back(std::move(sp));
    }
  }
  std::sort(unique.begin(), unique.end(),
            [](const StationaryPoint& a, const StationaryPoint& b) { return lex_less(a.x, b.x); });
  return unique;
}

std::vector<StationaryPoint> find_all_stationary(const ModelSpec& spec, int grid_density) {
  StationarySearch s;
  s.grid_density = grid_density;
  return find_all_stationary(FreeEnergy::limiting(spec), s);
}

MaximizerSet global_maximizers(const FreeEnergy& fe, double tie_tol, const StationarySearch& search) {
  const auto all = find_all_stationary(fe, search);
  if (all.empty()) throw NumericalError("no stationary point found");
  MaximizerSet ms;
  ms.f_max = all.front().f_value;
  for (const auto& sp : all) ms.f_max = std::max(ms.f_max, sp.f_value);
  for (const auto& sp : all) {
    if (sp.f_value >= ms.f_max - tie_tol) {
      if (sp.hess_eigs.maxCoeff() > -kEigTol) ms.degenerate = true;
      ms.points.push_back(sp);
    }
  }
  return ms;
}

MaximizerSet global_maximizers(const ModelSpec& spec, double tie_tol) {
  return global_maximizers(FreeEnergy::limiting(spec), tie_tol);
}

StationaryPoint unique_maximizer(const FreeEnergy& fe, const StationarySearch& search) {
  const MaximizerSet ms = global_maximizers(fe, 1e-9, search);
  if (ms.points.size() != 1) {
    throw NumericalError("expected a unique global maximizer, found " +
                         std::to_string(ms.points.size()));
  }
  if (ms.degenerate) throw NumericalError("global maximizer has a degenerate Hessian");
  return ms.points.front();
}

}  // namespace mcw
