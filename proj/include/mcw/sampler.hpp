#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mcw/model.hpp"

namespace mcw {

enum class InitKind { AllUp, AllDown, Random, AtPoint };

struct ChainConfig {
  std::uint64_t seed = 1;
  long burn_in_sweeps = 100;
  long sample_sweeps = 1000;
  long thinning = 1;
  InitKind init = InitKind::Random;
  Vec init_point;
  /// Samples outside this box are discarded.
  std::optional<Box> keep_box;
};

/// Seed for chain `index` derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Heat-bath single-spin-flip dynamics on the block Hamiltonian.
class GlauberChain {
 public:
  GlauberChain(const ModelSpec& spec, const FiniteSizes& sizes, std::uint64_t seed);

  void initialize(InitKind init, const Vec& point = Vec());
  /// One sweep: as many proposals as there are spins.
  void sweep();
  Vec magnetization() const;
  /// Species sums recomputed from the spin array.
  std::vector<long> recount() const;
  const std::vector<long>& cached_sums() const { return sums_; }
  const std::vector<std::int8_t>& spins() const { return spins_; }
  long accepted() const { return accepted_; }
  long proposed() const { return proposed_; }

 private:
  double uniform();
  std::size_t random_site();

  std::vector<long> sizes_;
  std::vector<int> species_;
  std::vector<std::int8_t> spins_;
  std::vector<long> sums_;
  Mat delta_N_;
  Vec h_N_;
  double scale_;
  std::mt19937_64 rng_;
  long accepted_ = 0;
  long proposed_ = 0;
};

struct SampleSet {
  Mat samples;
  long discarded = 0;
  double acceptance = 0.0;
};

SampleSet glauber_run(const ModelSpec& spec, const FiniteSizes& sizes, const ChainConfig& config);

/// Split-R-hat per component; needs at least two chains with four samples each.
std::optional<Vec> split_rhat(const std::vector<Mat>& chains);

class MixingError : public NumericalError {
 public:
  MixingError(const std::string& msg, Vec r) : NumericalError(msg), rhat(std::move(r)) {}
  Vec rhat;
};

struct MultiChainResult {
  std::vector<SampleSet> chains;
  Mat pooled;
  std::optional<Vec> rhat;
};

inline constexpr double kRhatLimit = 1.05;

/// Independent chains with derived seeds. `inits` overrides config.init per
/// chain when nonempty. Throws MixingError when any R-hat exceeds the limit.
MultiChainResult multichain(const ModelSpec& spec, const FiniteSizes& sizes, const ChainConfig& config,
                            int chains, int threads = 1, const std::vector<InitKind>& inits = {});

}  // namespace mcw
