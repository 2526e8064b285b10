#include "mcw/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcw {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

GlauberChain::GlauberChain(const ModelSpec& spec, const FiniteSizes& sizes, std::uint64_t seed)
    : sizes_(sizes.sizes),
      delta_N_(scaled_delta(spec.J, sizes.alpha_N)),
      h_N_(sizes.alpha_N.cwiseProduct(spec.h)),
      scale_(static_cast<double>(sizes.N)),
      rng_(seed) {
  if (!is_ising(spec.prior)) throw ValidationError("the sampler supports the Ising prior only");
  for (std::size_t p = 0; p < sizes_.size(); ++p) {
    species_.insert(species_.end(), static_cast<std::size_t>(sizes_[p]), static_cast<int>(p));
  }
  spins_.assign(species_.size(), 1);
  sums_ = sizes_;
}

double GlauberChain::uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

std::size_t GlauberChain::random_site() {
  const std::uint64_t n = spins_.size();
  return static_cast<std::size_t>(((rng_() >> 32) * n) >> 32);
}

void GlauberChain::initialize(InitKind init, const Vec& point) {
  switch (init) {
    case InitKind::AllUp:
      std::fill(spins_.begin(), spins_.end(), 1);
      break;
    case InitKind::AllDown:
      std::fill(spins_.begin(), spins_.end(), -1);
      break;
    case InitKind::Random:
      for (auto& s : spins_) s = uniform() < 0.5 ? 1 : -1;
      break;
    case InitKind::AtPoint: {
      if (point.size() != static_cast<Eigen::Index>(sizes_.size())) {
        throw ValidationError("initial point must have length K");
      }
      std::size_t offset = 0;
      for (std::size_t p = 0; p < sizes_.size(); ++p) {
        const long n = sizes_[p];
        const double x = std::clamp(point(static_cast<Eigen::Index>(p)), -1.0, 1.0);
        const long up = std::lround(static_cast<double>(n) * (1.0 + x) / 2.0);
        for (long i = 0; i < n; ++i) spins_[offset + static_cast<std::size_t>(i)] = i < up ? 1 : -1;
        offset += static_cast<std::size_t>(n);
      }
      break;
    }
  }
  sums_ = recount();
}

std::vector<long> GlauberChain::recount() const {
  std::vector<long> s(sizes_.size(), 0);
  for (std::size_t i = 0; i < spins_.size(); ++i) s[static_cast<std::size_t>(species_[i])] += spins_[i];
  return s;
}

Vec GlauberChain::magnetization() const {
  Vec m(static_cast<Eigen::Index>(sizes_.size()));
  for (std::size_t p = 0; p < sizes_.size(); ++p) {
    m(static_cast<Eigen::Index>(p)) = static_cast<double>(sums_[p]) / static_cast<double>(sizes_[p]);
  }
  return m;
}

void GlauberChain::sweep() {
  const std::size_t n = spins_.size();
  Vec dm = delta_N_ * magnetization();
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t i = random_site();
    const int p = species_[i];
    const double d = -2.0 * spins_[i] / static_cast<double>(sizes_[static_cast<std::size_t>(p)]);
    const double gain = scale_ * (dm(p) * d + 0.5 * delta_N_(p, p) * d * d + h_N_(p) * d);
    ++proposed_;
    // Heat bath: accept with probability 1 / (1 + exp(dH)), dH = -gain.
    if (uniform() * (1.0 + std::exp(-gain)) < 1.0) {
      spins_[i] = static_cast<std::int8_t>(-spins_[i]);
      sums_[static_cast<std::size_t>(p)] += 2 * spins_[i];
      dm += delta_N_.col(p) * d;
      ++accepted_;
    }
  }
}

SampleSet glauber_run(const ModelSpec& spec, const FiniteSizes& sizes, const ChainConfig& config) {
  if (config.burn_in_sweeps < 1) throw ValidationError("burn_in_sweeps must be at least 1");
  if (config.thinning < 1) throw ValidationError("thinning must be at least 1");
  if (config.sample_sweeps < 0) throw ValidationError("sample_sweeps must be nonnegative");
  GlauberChain chain(spec, sizes, config.seed);
  chain.initialize(config.init, config.init_point);
  for (long s = 0; s < config.burn_in_sweeps; ++s) chain.sweep();
  std::vector<Vec> kept;
  SampleSet out;
  for (long s = 1; s <= config.sample_sweeps; ++s) {
    chain.sweep();
    if (s % config.thinning != 0) continue;
    Vec m = chain.magnetization();
    if (config.keep_box && !box_contains(*config.keep_box, m)) {
      ++out.discarded;
      continue;
    }
    kept.push_back(std::move(m));
  }
  out.samples.resize(static_cast<Eigen::Index>(kept.size()), spec.K);
  for (std::size_t r = 0; r < kept.size(); ++r) out.samples.row(static_cast<Eigen::Index>(r)) = kept[r].transpose();
  out.acceptance = chain.proposed() > 0 ? static_cast<double>(chain.accepted()) / static_cast<double>(chain.proposed()) : 0.0;
  return out;
}

std::optional<Vec> split_rhat(const std::vector<Mat>& chains) {
  if (chains.size() < 2) return std::nullopt;
  Eigen::Index len = chains.front().rows();
  for (const Mat& c : chains) len = std::min(len, c.rows());
  const Eigen::Index half = len / 2;
  if (half < 2) return std::nullopt;
  const Eigen::Index K = chains.front().cols();
  std::vector<Mat> parts;
  for (const Mat& c : chains) {
    parts.push_back(c.topRows(half));
    parts.push_back(c.middleRows(half, half));
  }
  const double m = static_cast<double>(parts.size());
  const double n = static_cast<double>(half);
  Vec rhat(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    Vec means(static_cast<Eigen::Index>(parts.size()));
    double W = 0.0;
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const Vec col = parts[j].col(k);
      const double mu = col.mean();
      means(static_cast<Eigen::Index>(j)) = mu;
      W += (col.array() - mu).square().sum() / (n - 1.0);
    }
    W /= m;
    const double grand = means.mean();
    const double B = n * (means.array() - grand).square().sum() / (m - 1.0);
    if (W <= 0.0) {
      rhat(k) = B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    const double var_plus = (n - 1.0) / n * W + B / n;
    rhat(k) = std::sqrt(var_plus / W);
  }
  return rhat;
}

MultiChainResult multichain(const ModelSpec& spec, const FiniteSizes& sizes, const ChainConfig& config,
                            int chains, int threads, const std::vector<InitKind>& inits) {
  if (chains < 1) throw ValidationError("chains must be at least 1");
  if (!inits.empty() && static_cast<int>(inits.size()) != chains) {
    throw ValidationError("per-chain inits must match the chain count");
  }
  MultiChainResult res;
  res.chains.resize(static_cast<std::size_t>(chains));
  parallel_for(static_cast<std::size_t>(chains), threads, [&](std::size_t c) {
    ChainConfig cc = config;
    cc.seed = derive_seed(config.seed, c);
    if (!inits.empty()) cc.init = inits[c];
    res.chains[c] = glauber_run(spec, sizes, cc);
  });
  std::vector<Mat> mats;
  Eigen::Index rows = 0;
  for (const auto& c : res.chains) {
    mats.push_back(c.samples);
    rows += c.samples.rows();
  }
  res.rhat = split_rhat(mats);
  if (res.rhat && (res.rhat->array() > kRhatLimit).any()) {
    throw MixingError("chains disagree (max split R-hat " + format_double(res.rhat->maxCoeff()) +
                          " > 1.05); pool per basin with a conditioning box instead",
                      *res.rhat);
  }
  res.pooled.resize(rows, spec.K);
  Eigen::Index r = 0;
  for (const auto& c : res.chains) {
    res.pooled.middleRows(r, c.samples.rows()) = c.samples;
    r += c.samples.rows();
  }
  return res;
}

}  // namespace mcw
