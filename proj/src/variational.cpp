#include "mcw/variational.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "mcw/landscape.hpp"

namespace mcw {

namespace {

constexpr double kLog2 = 0.69314718055994530942;

// Shifted weights pi_i proportional to w_i exp(v_i c), normalized.
void tilted_moments(const PriorSpec& prior, double c, double& mean, double& var) {
  std::vector<double> v, w;
  prior_atoms(prior, v, w);
  double top = kNegInf;
  for (std::size_t i = 0; i < v.size(); ++i) top = std::max(top, std::log(w[i]) + v[i] * c);
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double e = std::exp(std::log(w[i]) + v[i] * c - top);
    z += e;
    m1 += e * v[i];
    m2 += e * v[i] * v[i];
  }
  mean = m1 / z;
  var = std::max(0.0, m2 / z - mean * mean);
}

}  // namespace

double log_mgf(const PriorSpec& prior, double c) {
  if (is_ising(prior)) {
    const double a = std::abs(c);
    return a + std::log1p(std::exp(-2.0 * a)) - kLog2;
  }
  std::vector<double> v, w;
  prior_atoms(prior, v, w);
  LogSumExp acc;
  for (std::size_t i = 0; i < v.size(); ++i) acc.add(std::log(w[i]) + v[i] * c);
  return acc.value();
}

double mean_fn(const PriorSpec& prior, double c) {
  if (is_ising(prior)) return std::tanh(c);
  double mean = 0.0, var = 0.0;
  tilted_moments(prior, c, mean, var);
  return mean;
}

double mean_fn_deriv(const PriorSpec& prior, double c) {
  if (is_ising(prior)) {
    const double t = std::tanh(c);
    return 1.0 - t * t;
  }
  double mean = 0.0, var = 0.0;
  tilted_moments(prior, c, mean, var);
  return var;
}

Vec effective_field(const ModelSpec& spec, const Vec& x) {
  return spec.J * spec.alpha.cwiseProduct(x) + spec.h;
}

double p_var(const ModelSpec& spec, const Vec& x) {
  const Mat delta = build_delta(spec);
  const Vec c = effective_field(spec, x);
  double s = -0.5 * x.dot(delta * x);
  for (int p = 0; p < spec.K; ++p) s += spec.alpha(p) * log_mgf(spec.prior, c(p));
  return s;
}

Vec grad_p_var(const ModelSpec& spec, const Vec& x) {
  const Mat delta = build_delta(spec);
  const Vec c = effective_field(spec, x);
  Vec psi(spec.K);
  for (int p = 0; p < spec.K; ++p) psi(p) = mean_fn(spec.prior, c(p));
  return delta * (psi - x);
}

Mat hess_p_var(const ModelSpec& spec, const Vec& x) {
  const Mat delta = build_delta(spec);
  const Vec c = effective_field(spec, x);
  Vec d(spec.K);
  for (int p = 0; p < spec.K; ++p) d(p) = mean_fn_deriv(spec.prior, c(p)) / spec.alpha(p);
  return -delta + delta * d.asDiagonal() * delta;
}

namespace {

// Multi-start points on a regular grid, or a Latin hypercube when the grid
// would exceed the cap.
std::vector<Vec> grid_seeds(int d, double half_width, double spacing, long max_seeds,
                            std::uint64_t salt) {
  std::vector<Vec> seeds;
  if (d == 0) {
    seeds.emplace_back(Vec(0));
    return seeds;
  }
  const long n = static_cast<long>(std::floor(2.0 * half_width / spacing + 1e-9)) + 1;
  const double total = std::pow(static_cast<double>(n), d);
  if (total <= static_cast<double>(max_seeds)) {
    const long count = static_cast<long>(total);
    for (long idx = 0; idx < count; ++idx) {
      Vec s(d);
      long rem = idx;
      for (int k = d - 1; k >= 0; --k) {
        s(k) = -half_width + spacing * static_cast<double>(rem % n);
        rem /= n;
      }
      seeds.push_back(s);
    }
    return seeds;
  }
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL ^ salt);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::vector<long>> perms(static_cast<std::size_t>(d));
  for (auto& perm : perms) {
    perm.resize(static_cast<std::size_t>(max_seeds));
    for (long i = 0; i < max_seeds; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  for (long i = 0; i < max_seeds; ++i) {
    Vec s(d);
    for (int k = 0; k < d; ++k) {
      const double cell = static_cast<double>(perms[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)]);
      s(k) = -half_width + 2.0 * half_width * (cell + u01(rng)) / static_cast<double>(max_seeds);
    }
    seeds.push_back(s);
  }
  return seeds;
}

// Ascent direction from the Hessian with eigenvalues replaced by their
// magnitudes (floored), which is Newton near a nondegenerate maximum.
Vec ascent_direction(const Vec& g, const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const Vec lam = es.eigenvalues().cwiseAbs().cwiseMax(1e-8);
  const Mat& V = es.eigenvectors();
  return V * (V.transpose() * g).cwiseQuotient(lam);
}

// Coordinates x = base + B y.
struct Slice {
  const ModelSpec* spec;
  Vec base;
  Mat B;

  Vec point(const Vec& y) const { return B.cols() == 0 ? base : Vec(base + B * y); }
  double value(const Vec& y) const { return p_var(*spec, point(y)); }
  Vec grad(const Vec& y) const { return B.transpose() * grad_p_var(*spec, point(y)); }
  Mat hess(const Vec& y) const { return B.transpose() * hess_p_var(*spec, point(y)) * B; }
};

Vec local_max(const Slice& s, Vec y) {
  if (y.size() == 0) return y;
  double q = s.value(y);
  for (int it = 0; it < 500; ++it) {
    const Vec g = s.grad(y);
    if (g.norm() <= 1e-13) break;
    const Vec dir = ascent_direction(g, s.hess(y));
    const double slope = g.dot(dir);
    double t = 1.0;
    Vec y_new = y + dir;
    double q_new = s.value(y_new);
    while (!(q_new >= q + 1e-4 * t * slope) && t > 1e-12) {
      t *= 0.5;
      y_new = y + t * dir;
      q_new = s.value(y_new);
    }
    if (!(q_new >= q)) break;
    const double moved = (y_new - y).cwiseAbs().maxCoeff();
    y = y_new;
    q = q_new;
    if (moved <= 1e-15 * (1.0 + y.cwiseAbs().maxCoeff())) break;
  }
  return y;
}

struct SupResult {
  double value = kNegInf;
  Vec y;
};

SupResult global_sup(const Slice& s, const std::vector<Vec>& seeds, const Vec* hint, int threads) {
  std::vector<Vec> starts = seeds;
  if (hint != nullptr) starts.push_back(*hint);
  std::vector<SupResult> local(starts.size());
  parallel_for(starts.size(), threads, [&](std::size_t i) {
    local[i].y = local_max(s, starts[i]);
    local[i].value = s.value(local[i].y);
  });
  SupResult best;
  for (const auto& r : local) {
    if (r.value > best.value) best = r;
  }
  return best;
}

struct Frame {
  Mat O;
  Vec lam;
  std::vector<int> inf_idx;
  std::vector<int> sup_idx;
  int a = 0;

  Mat columns(const std::vector<int>& idx) const {
    Mat B(O.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = O.col(idx[k]);
    return B;
  }
};

Frame make_frame(const ModelSpec& spec, const SaddleOptions& opts) {
  const SpectralSplit split = spectral_split(build_delta(spec), opts.zero_tol);
  Frame fr;
  fr.a = split.a;
  if (opts.coordinates == SaddleCoordinates::Original) {
    if (split.a != 0) {
      throw ValidationError("original coordinates require a positive semidefinite Delta with no kernel");
    }
    fr.O = Mat::Identity(spec.K, spec.K);
    fr.lam = split.eigenvalues;
    for (int k = 0; k < spec.K; ++k) fr.sup_idx.push_back(k);
    return fr;
  }
  fr.O = split.O;
  fr.lam = split.eigenvalues;
  for (int k = 0; k < spec.K; ++k) {
    const double l = split.eigenvalues(k);
    if (std::abs(l) <= opts.zero_tol) continue;
    (l < 0.0 ? fr.inf_idx : fr.sup_idx).push_back(k);
  }
  return fr;
}

// Newton on the reduced gradient; steps use a pseudo-inverse.
Vec newton_reduced(const Slice& s, Vec r) {
  auto gnorm2 = [&](const Vec& v) { return s.grad(v).squaredNorm(); };
  double g2 = gnorm2(r);
  for (int it = 0; it < 100; ++it) {
    if (!(g2 > 0.0) || !std::isfinite(g2)) break;
    const Vec g = s.grad(r);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(s.hess(r));
    cod.setThreshold(1e-12);
    const Vec step = cod.solve(-g);
    if (!step.allFinite()) break;
    double t = 1.0;
    Vec r_new = r + step;
    double g2_new = gnorm2(r_new);
    while (!(g2_new < g2) && t > 1e-8) {
      t *= 0.5;
      r_new = r + t * step;
      g2_new = gnorm2(r_new);
    }
    if (!(g2_new < g2)) break;
    const double moved = (r_new - r).cwiseAbs().maxCoeff();
    r = r_new;
    g2 = g2_new;
    if (moved <= 1e-15 * (1.0 + r.cwiseAbs().maxCoeff())) break;
  }
  return r;
}

std::string describe_candidates(const std::vector<SaddleCandidate>& cands) {
  std::ostringstream os;
  os << cands.size() << " stationary point(s):";
  for (const auto& c : cands) {
    os << " [x=(";
    for (Eigen::Index i = 0; i < c.x.size(); ++i) os << (i ? "," : "") << format_double(c.x(i));
    os << ") value=" << format_double(c.value) << "]";
  }
  return os.str();
}

Vec general_mean_field_newton(const ModelSpec& spec, Vec m) {
  const int K = spec.K;
  auto residual = [&](const Vec& mm) {
    const Vec c = effective_field(spec, mm);
    Vec r(K);
    for (int p = 0; p < K; ++p) r(p) = mm(p) - mean_fn(spec.prior, c(p));
    return r;
  };
  Vec F = residual(m);
  for (int it = 0; it < 200; ++it) {
    if (F.cwiseAbs().maxCoeff() == 0.0) break;
    const Vec c = effective_field(spec, m);
    Vec d(K);
    for (int p = 0; p < K; ++p) d(p) = mean_fn_deriv(spec.prior, c(p));
    const Mat Jac = Mat::Identity(K, K) - d.asDiagonal() * spec.J * spec.alpha.asDiagonal();
    Eigen::ColPivHouseholderQR<Mat> qr(Jac);
    if (qr.rank() < K) break;
    const Vec step = qr.solve(-F);
    double t = 1.0;
    Vec m_new = m + step;
    Vec F_new = residual(m_new);
    while (!(F_new.squaredNorm() < F.squaredNorm()) && t > 1e-8) {
      t *= 0.5;
      m_new = m + t * step;
      F_new = residual(m_new);
    }
    if (!(F_new.squaredNorm() <= F.squaredNorm())) break;
    const double moved = (m_new - m).cwiseAbs().maxCoeff();
    m = m_new;
    F = F_new;
    if (moved <= 1e-16) break;
  }
  return m;
}

}  // namespace

std::vector<Vec> mean_field_points(const ModelSpec& spec, int threads) {
  std::vector<Vec> out;
  if (is_ising(spec.prior)) {
    StationarySearch search;
    search.threads = threads;
    for (const auto& sp : find_all_stationary(FreeEnergy::limiting(spec), search)) out.push_back(sp.x);
    return out;
  }
  std::vector<double> v, w;
  prior_atoms(spec.prior, v, w);
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  std::vector<Vec> seeds;
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  for (const Vec& s : grid_seeds(spec.K, 0.99, 0.33, 100000, 1)) {
    seeds.push_back((Vec::Constant(spec.K, mid) + half * s).eval());
  }
  std::vector<Vec> found(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    found[i] = general_mean_field_newton(spec, seeds[i]);
  });
  for (const Vec& m : found) {
    const Vec c = effective_field(spec, m);
    double res = 0.0;
    for (int p = 0; p < spec.K; ++p) res = std::max(res, std::abs(m(p) - mean_fn(spec.prior, c(p))));
    if (!(res <= 1e-11)) continue;
    bool dup = false;
    for (const Vec& u : out) {
      if ((u - m).cwiseAbs().maxCoeff() <= 1e-7) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(m);
  }
  return out;
}

SaddleResult infsup_solve(const ModelSpec& spec, const SaddleOptions& opts) {
  const Frame fr = make_frame(spec, opts);
  const int n_inf = static_cast<int>(fr.inf_idx.size());
  const int n_sup = static_cast<int>(fr.sup_idx.size());
  std::vector<int> active = fr.inf_idx;
  active.insert(active.end(), fr.sup_idx.begin(), fr.sup_idx.end());
  const Mat B_inf = fr.columns(fr.inf_idx);
  const Mat B_sup = fr.columns(fr.sup_idx);
  const Mat B_act = fr.columns(active);
  const int d = n_inf + n_sup;

  SaddleResult res;
  res.a = fr.a;
  if (d == 0) {
    res.value = p_var(spec, Vec::Zero(spec.K));
    res.z_star = Vec::Zero(spec.K);
    res.x_star = Vec::Zero(spec.K);
    res.grad_norm = 0.0;
    res.converged = true;
    res.method = "constant";
    return res;
  }

  const Slice full{&spec, Vec::Zero(spec.K), B_act};

  // Stationary points: mean-field solutions and Newton from a grid in z.
  std::vector<Vec> starts;
  for (const Vec& m : mean_field_points(spec, opts.threads)) starts.push_back(B_act.transpose() * m);
  for (const Vec& s : grid_seeds(d, opts.grid_half_width, opts.grid_spacing, opts.max_seeds, 2)) {
    starts.push_back(s);
  }
  std::vector<Vec> refined(starts.size());
  parallel_for(starts.size(), opts.threads,
               [&](std::size_t i) { refined[i] = newton_reduced(full, starts[i]); });

  std::vector<Vec> unique;
  for (const Vec& r : refined) {
    if (!r.allFinite()) continue;
    if (!(full.grad(r).norm() <= opts.grad_tol)) continue;
    bool dup = false;
    for (const Vec& u : unique) {
      if ((u - r).cwiseAbs().maxCoeff() <= 1e-7) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(r);
  }

  const std::vector<Vec> sup_seeds =
      grid_seeds(n_sup, opts.grid_half_width, opts.grid_spacing, opts.max_seeds, 3);
  std::vector<std::size_t> ok_idx;
  for (const Vec& r : unique) {
    SaddleCandidate c;
    c.x = B_act * r;
    c.z = fr.O.transpose() * c.x;
    c.value = full.value(r);
    c.grad_norm = full.grad(r).norm();
    const Mat Hr = full.hess(r);
    const double scale = 1e-9 * std::max(1.0, Hr.cwiseAbs().maxCoeff());
    bool ok = true;
    if (n_inf > 0) ok = ok && symmetric_eigenvalues(Hr.topLeftCorner(n_inf, n_inf)).minCoeff() >= -scale;
    if (n_sup > 0) ok = ok && symmetric_eigenvalues(Hr.bottomRightCorner(n_sup, n_sup)).maxCoeff() <= scale;
    c.inertia_ok = ok;
    if (ok) {
      const Slice inner{&spec, B_inf * r.head(n_inf), B_sup};
      const Vec hint = r.tail(n_sup);
      const SupResult sup = global_sup(inner, sup_seeds, &hint, opts.threads);
      c.certified = sup.value <= c.value + 1e-9 * std::max(1.0, std::abs(c.value));
      ok_idx.push_back(res.candidates.size());
    }
    res.candidates.push_back(c);
  }

  if (ok_idx.empty()) {
    throw SaddleNotFound("no stationary point with the required inertia; located " +
                             describe_candidates(res.candidates),
                         res.candidates);
  }

  double vmin = res.candidates[ok_idx.front()].value, vmax = vmin;
  for (std::size_t i : ok_idx) {
    vmin = std::min(vmin, res.candidates[i].value);
    vmax = std::max(vmax, res.candidates[i].value);
  }
  res.multistart_spread = vmax - vmin;

  const SaddleCandidate* best = nullptr;
  for (std::size_t i : ok_idx) {
    const auto& c = res.candidates[i];
    if (c.certified && (best == nullptr || c.value < best->value)) best = &c;
  }
  if (best != nullptr) {
    res.value = best->value;
    res.x_star = best->x;
    res.z_star = best->z;
    res.grad_norm = best->grad_norm;
    res.converged = true;
    res.method = "multistart";
    return res;
  }

  // Nested fallback: the outer function is convex in the inf block, so a
  // descent with the envelope gradient reaches its minimum.
  const std::vector<Vec> coarse = grid_seeds(n_sup, opts.grid_half_width, 2.0 * opts.grid_spacing,
                                             opts.max_seeds, 4);
  Vec zi = B_inf.transpose() * res.candidates[ok_idx.front()].x;
  auto outer = [&](const Vec& z, Vec& y_out) {
    const Slice inner{&spec, B_inf * z, B_sup};
    const SupResult sup = global_sup(inner, coarse, nullptr, opts.threads);
    y_out = sup.y;
    return sup.value;
  };
  Vec y;
  double phi = outer(zi, y);
  Vec g = B_inf.transpose() * grad_p_var(spec, B_inf * zi + B_sup * y);
  for (int it = 0; it < 500 && g.norm() > opts.grad_tol; ++it) {
    double t = 1.0;
    Vec y_new;
    Vec z_new = zi - t * g;
    double phi_new = outer(z_new, y_new);
    while (!(phi_new <= phi - 1e-4 * t * g.squaredNorm()) && t > 1e-12) {
      t *= 0.5;
      z_new = zi - t * g;
      phi_new = outer(z_new, y_new);
    }
    if (!(phi_new < phi)) break;
    zi = z_new;
    y = y_new;
    phi = phi_new;
    g = B_inf.transpose() * grad_p_var(spec, B_inf * zi + B_sup * y);
  }
  res.x_star = B_inf * zi + B_sup * y;
  res.z_star = fr.O.transpose() * res.x_star;
  res.value = phi;
  res.grad_norm = grad_p_var(spec, res.x_star).norm();
  res.converged = res.grad_norm <= opts.grad_tol;
  res.method = "nested";
  return res;
}

}  // namespace mcw
