#include "mcw/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mcw {

using nlohmann::json;

bool is_ising(const PriorSpec& prior) { return std::holds_alternative<IsingPrior>(prior); }

void prior_atoms(const PriorSpec& prior, std::vector<double>& values, std::vector<double>& weights) {
  if (std::holds_alternative<IsingPrior>(prior)) {
    values = {-1.0, 1.0};
    weights = {0.5, 0.5};
  } else if (const auto* a = std::get_if<AtomsPrior>(&prior)) {
    values = a->values;
    weights = a->weights;
  } else {
    const auto& q = std::get<QuadraturePrior>(prior);
    values = q.nodes;
    weights = q.weights;
  }
}

namespace {

constexpr double kSpecTol = 1e-12;

void normalize_weights(std::vector<double>& values, std::vector<double>& weights,
                       const char* what) {
  if (values.empty()) throw ValidationError(std::string(what) + " prior has no support points");
  if (values.size() != weights.size()) {
    throw ValidationError(std::string(what) + " prior: support and weight lengths differ");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < -1.0 || values[i] > 1.0) {
      throw ValidationError(std::string(what) + " prior: support point outside [-1,1]");
    }
    if (!(weights[i] > 0.0)) throw ValidationError(std::string(what) + " prior: weights must be positive");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > kSpecTol) {
    throw ValidationError(std::string(what) + " prior: weights sum to " + format_double(total) +
                          ", not 1");
  }
  for (double& w : weights) w /= total;
}

}  // namespace

ModelSpec validate(ModelSpec spec) {
  const int K = spec.K;
  if (K < 1) throw ValidationError("K must be a positive integer");
  if (spec.J.rows() != K || spec.J.cols() != K) throw ValidationError("J must be K x K");
  if (spec.h.size() != K) throw ValidationError("h must have length K");
  if (spec.alpha.size() != K) throw ValidationError("alpha must have length K");
  if (spec.beta.size() == 0) spec.beta = Vec::Zero(K);
  if (spec.beta.size() != K) throw ValidationError("beta must have length K");
  if (!spec.J.allFinite() || !spec.h.allFinite() || !spec.alpha.allFinite() ||
      !spec.beta.allFinite() || !std::isfinite(spec.theta)) {
    throw ValidationError("model contains non-finite values");
  }
  const double asym = (spec.J - spec.J.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSpecTol) {
    throw ValidationError("J is not symmetric (max asymmetry " + format_double(asym) + ")");
  }
  spec.J = (0.5 * (spec.J + spec.J.transpose())).eval();
  if ((spec.alpha.array() <= 0.0).any()) throw ValidationError("alpha entries must be positive");
  if (std::abs(spec.alpha.sum() - 1.0) > kSpecTol) {
    throw ValidationError("alpha must sum to 1 (got " + format_double(spec.alpha.sum()) + ")");
  }
  if (spec.theta < 0.5) throw ValidationError("theta must be >= 0.5");
  if (auto* a = std::get_if<AtomsPrior>(&spec.prior)) {
    normalize_weights(a->values, a->weights, "atoms");
  } else if (auto* q = std::get_if<QuadraturePrior>(&spec.prior)) {
    normalize_weights(q->nodes, q->weights, "quadrature");
  }
  return spec;
}

ModelSpec make_spec(const Mat& J, const Vec& h, const Vec& alpha, PriorSpec prior, const Vec& beta,
                    double theta) {
  ModelSpec s;
  s.K = static_cast<int>(J.rows());
  s.J = J;
  s.h = h;
  s.alpha = alpha;
  s.prior = std::move(prior);
  s.beta = beta.size() == 0 ? Vec::Zero(s.K) : beta;
  s.theta = theta;
  return validate(std::move(s));
}

namespace {

Vec json_vec(const json& j, const char* key, int K) {
  if (!j.is_array()) throw ValidationError(std::string(key) + " must be an array");
  if (static_cast<int>(j.size()) != K) {
    throw ValidationError(std::string(key) + " must have length K=" + std::to_string(K));
  }
  Vec v(K);
  for (int i = 0; i < K; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number()) {
      throw ValidationError(std::string(key) + " entries must be numbers");
    }
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

std::vector<double> json_list(const json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string(key) + " must be an array");
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) throw ValidationError(std::string(key) + " entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

PriorSpec parse_prior(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ValidationError("prior must be an object with a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  if (type == "ising") return IsingPrior{};
  if (type == "atoms") {
    if (!j.contains("points") || !j["points"].is_array()) {
      throw ValidationError("atoms prior needs 'points': [[value, weight], ...]");
    }
    AtomsPrior a;
    for (const auto& p : j["points"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw ValidationError("atoms prior points must be [value, weight] pairs");
      }
      a.values.push_back(p[0].get<double>());
      a.weights.push_back(p[1].get<double>());
    }
    return a;
  }
  if (type == "quadrature") {
    if (!j.contains("nodes") || !j.contains("weights")) {
      throw ValidationError("quadrature prior needs 'nodes' and 'weights'");
    }
    QuadraturePrior q;
    q.nodes = json_list(j["nodes"], "nodes");
    q.weights = json_list(j["weights"], "weights");
    return q;
  }
  throw ValidationError("unknown prior type '" + type + "'");
}

}  // namespace

ModelSpec load_spec_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("model JSON must be an object");
  for (const char* key : {"K", "J", "h", "prior", "alpha"}) {
    if (!j.contains(key)) throw ValidationError(std::string("model JSON missing key '") + key + "'");
  }
  if (!j["K"].is_number_integer() || j["K"].get<long>() < 1) {
    throw ValidationError("K must be a positive integer");
  }
  ModelSpec s;
  s.K = j["K"].get<int>();
  const json& Jj = j["J"];
  if (!Jj.is_array() || static_cast<int>(Jj.size()) != s.K) {
    throw ValidationError("J must be a K x K array of arrays");
  }
  s.J.resize(s.K, s.K);
  for (int r = 0; r < s.K; ++r) {
    s.J.row(r) = json_vec(Jj[static_cast<std::size_t>(r)], "J row", s.K).transpose();
  }
  s.h = json_vec(j["h"], "h", s.K);
  s.alpha = json_vec(j["alpha"], "alpha", s.K);
  s.prior = parse_prior(j["prior"]);
  s.beta = j.contains("beta") ? json_vec(j["beta"], "beta", s.K) : Vec::Zero(s.K);
  if (j.contains("theta")) {
    if (!j["theta"].is_number()) throw ValidationError("theta must be a number");
    s.theta = j["theta"].get<double>();
  }
  return validate(std::move(s));
}

ModelSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_spec_json(ss.str());
}

std::string spec_to_json(const ModelSpec& spec) {
  json j;
  j["K"] = spec.K;
  j["J"] = json::array();
  for (int r = 0; r < spec.K; ++r) {
    json row = json::array();
    for (int c = 0; c < spec.K; ++c) row.push_back(spec.J(r, c));
    j["J"].push_back(row);
  }
  auto vec = [](const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  j["h"] = vec(spec.h);
  j["alpha"] = vec(spec.alpha);
  j["beta"] = vec(spec.beta);
  j["theta"] = spec.theta;
  if (is_ising(spec.prior)) {
    j["prior"] = {{"type", "ising"}};
  } else if (const auto* a = std::get_if<AtomsPrior>(&spec.prior)) {
    json pts = json::array();
    for (std::size_t i = 0; i < a->values.size(); ++i) pts.push_back({a->values[i], a->weights[i]});
    j["prior"] = {{"type", "atoms"}, {"points", pts}};
  } else {
    const auto& q = std::get<QuadraturePrior>(spec.prior);
    j["prior"] = {{"type", "quadrature"}, {"nodes", q.nodes}, {"weights", q.weights}};
  }
  return j.dump(2);
}

Mat scaled_delta(const Mat& J, const Vec& a) { return a.asDiagonal() * J * a.asDiagonal(); }

Mat build_delta(const ModelSpec& spec) { return scaled_delta(spec.J, spec.alpha); }

Vec build_h_tilde(const ModelSpec& spec) { return spec.alpha.cwiseProduct(spec.h); }

SpectralSplit spectral_split(const Mat& delta, double zero_tol) {
  if (delta.rows() != delta.cols()) throw ValidationError("spectral_split needs a square matrix");
  if ((delta - delta.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ValidationError("spectral_split needs a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(delta);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigensolver failed to converge on a " + std::to_string(delta.rows()) +
                         "x" + std::to_string(delta.rows()) + " matrix");
  }
  SpectralSplit s;
  s.delta = delta;
  s.eigenvalues = es.eigenvalues();
  s.O = es.eigenvectors();
  const Eigen::Index K = delta.rows();
  s.a = 0;
  Vec lam_minus = Vec::Zero(K);
  Vec lam_plus = Vec::Zero(K);
  for (Eigen::Index i = 0; i < K; ++i) {
    const double l = s.eigenvalues(i);
    if (l <= zero_tol) ++s.a;
    if (std::abs(l) <= zero_tol) continue;
    if (l < 0.0) {
      lam_minus(i) = l;
    } else {
      lam_plus(i) = l;
    }
  }
  s.delta_minus = s.O * lam_minus.asDiagonal() * s.O.transpose();
  s.delta_plus = s.O * lam_plus.asDiagonal() * s.O.transpose();
  return s;
}

long FiniteSizes::total() const { return std::accumulate(sizes.begin(), sizes.end(), 0L); }

Vec target_ratios(const ModelSpec& spec, double N) {
  return spec.alpha + std::pow(N, -spec.theta) * spec.beta;
}

FiniteSizes finite_sizes(const ModelSpec& spec, long N) {
  const int K = spec.K;
  if (N < K) throw ValidationError("N must be at least K");
  const Vec r = target_ratios(spec, static_cast<double>(N));
  if ((r.array() <= 0.0).any()) throw ValidationError("perturbation too large for N");
  const long total = std::lround(static_cast<double>(N) * r.sum());
  if (total < K) throw ValidationError("perturbation too large for N");
  const Vec quota = r * (static_cast<double>(total) / r.sum());

  std::vector<long> sizes(static_cast<std::size_t>(K));
  long assigned = 0;
  for (int p = 0; p < K; ++p) {
    sizes[static_cast<std::size_t>(p)] = static_cast<long>(std::floor(quota(p)));
    assigned += sizes[static_cast<std::size_t>(p)];
  }
  std::vector<int> order(static_cast<std::size_t>(K));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return quota(a) - std::floor(quota(a)) > quota(b) - std::floor(quota(b));
  });
  for (long i = 0; assigned < total; ++i, ++assigned) {
    ++sizes[static_cast<std::size_t>(order[static_cast<std::size_t>(i % K)])];
  }
  // Every species needs at least one spin; take from the largest.
  for (int p = 0; p < K; ++p) {
    while (sizes[static_cast<std::size_t>(p)] < 1) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      ++sizes[static_cast<std::size_t>(p)];
    }
  }

  FiniteSizes fs;
  fs.N = N;
  fs.sizes = std::move(sizes);
  fs.alpha_N.resize(K);
  for (int p = 0; p < K; ++p) {
    fs.alpha_N(p) = static_cast<double>(fs.sizes[static_cast<std::size_t>(p)]) / static_cast<double>(N);
  }
  return fs;
}

FiniteSizes sizes_from_counts(const std::vector<long>& counts) {
  if (counts.empty()) throw ValidationError("sizes must be nonempty");
  FiniteSizes fs;
  fs.sizes = counts;
  for (long c : counts) {
    if (c < 1) throw ValidationError("every species size must be at least 1");
  }
  fs.N = fs.total();
  fs.alpha_N.resize(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t p = 0; p < counts.size(); ++p) {
    fs.alpha_N(static_cast<Eigen::Index>(p)) = static_cast<double>(counts[p]) / static_cast<double>(fs.N);
  }
  return fs;
}

double hamiltonian_density(const ModelSpec& spec, const FiniteSizes& sizes, const Vec& m) {
  const Mat dN = scaled_delta(spec.J, sizes.alpha_N);
  return 0.5 * m.dot(dN * m) + sizes.alpha_N.cwiseProduct(spec.h).dot(m);
}

}  // namespace mcw
