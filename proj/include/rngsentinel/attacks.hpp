#pragma once

// Simulated attacks on the randomness pipeline: weak seeds that can be
// brute-forced, and sampler substitutions that only the dynamic auditor sees.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rngsentinel/auditor.hpp"
#include "rngsentinel/distribution.hpp"
#include "rngsentinel/json_io.hpp"
#include "rngsentinel/prng.hpp"

namespace rngsentinel {

struct ConstantSeedAttack {
  std::uint64_t value = 0;
  Algorithm algorithm = Algorithm::MT19937;
};

/// The victim seeds from the clock; the attacker knows the clock to within
/// `window_s` seconds starting at `window_start_us`.
struct TimeWindowSeedAttack {
  double window_s = 10.0;
  std::int64_t resolution_us = 1;
  std::int64_t server_start_us = 1'700'000'004'242'424;
  std::int64_t window_start_us = 1'700'000'000'000'000;
  Algorithm algorithm = Algorithm::MT19937;
  double noise_sigma = 1.0;
};

struct TransformSubstitutionAttack {
  DistributionSpec claimed = Normal{};
  DistributionSpec actual = UniformReal{};
};

/// Shifts every draw's mean by bias * sigma of the claimed normal.
struct BiasedGeneratorAttack {
  double bias = 0.5;
  Normal claimed{};
};

using AttackKind = std::variant<ConstantSeedAttack, TimeWindowSeedAttack,
                                TransformSubstitutionAttack, BiasedGeneratorAttack>;

struct AttackScenario {
  AttackKind kind;
  std::string target_slot = "target";
  /// Batches audited in each phase of a detection experiment.
  std::size_t batches = 1000;
  std::uint64_t seed = 20240917;
};

AttackScenario scenario_from_json(const Json& j);

/// log2(window_s * 1e6 / resolution_us). Throws InvalidWindow.
double entropy_bits(double window_s, std::int64_t resolution_us);
inline double entropy_bits(const TimeWindowSeedAttack& a) {
  return entropy_bits(a.window_s, a.resolution_us);
}

/// An arithmetic progression of candidate seeds.
struct SeedCandidates {
  std::uint64_t first = 0;
  std::uint64_t count = 0;
  std::uint64_t step = 1;
};

/// Every clock reading the victim could have seeded from inside the window.
SeedCandidates time_window_candidates(std::int64_t window_start_us, double window_s,
                                      std::int64_t resolution_us);

/// First candidate whose generator reproduces all observed canonical 64-bit
/// words. Four or more words make a false match negligible. CsprngCtr has no
/// seed to search and is rejected with InvalidArgument.
std::optional<std::uint64_t> brute_force_seed(std::span<const std::uint64_t> observed,
                                              Algorithm algorithm,
                                              const SeedCandidates& candidates);
std::optional<std::uint64_t> brute_force_seed(std::span<const std::uint64_t> observed,
                                              Algorithm algorithm,
                                              std::span<const std::uint64_t> candidates);

/// Number of candidates that reproduce the observed words.
std::uint64_t count_matching_seeds(std::span<const std::uint64_t> observed, Algorithm algorithm,
                                   const SeedCandidates& candidates);

/// The noise sequence a generator seeded with `seed` produces after
/// discarding `skip_words` raw words.
std::vector<double> regenerate_noise(Algorithm algorithm, std::uint64_t seed,
                                     const DistributionSpec& noise_spec, std::size_t count,
                                     std::uint64_t skip_words = 0);

/// noisy - regenerate_noise(...). Throws SpecMismatch for a discrete noise spec.
std::vector<double> denoise_dp_updates(std::span<const double> noisy, std::uint64_t recovered_seed,
                                       Algorithm algorithm, const DistributionSpec& noise_spec,
                                       std::uint64_t skip_words = 0);

/// Makes `slot` sample from `actual` while still declaring its original spec.
void substitute_transform(GeneratorRegistry& registry, std::string_view slot,
                          const DistributionSpec& actual);

/// Gradients of a least-squares model trained for a few rounds; the private
/// signal in the DP kill chain.
struct LinearRegressionFixture {
  std::size_t examples = 64;
  std::size_t features = 8;
  std::size_t rounds = 16;
  double learning_rate = 0.05;
  std::uint64_t data_seed = 7;

  /// rounds * features values, round-major.
  std::vector<double> gradients() const;
};

struct KillChainResult {
  double entropy_bits = 0.0;
  std::uint64_t search_size = 0;
  std::uint64_t true_seed = 0;
  std::optional<std::uint64_t> recovered_seed;
  double recovery_seconds = 0.0;
  std::size_t elements = 0;
  double max_abs_error = 0.0;
};

/// Victim seeds from the clock, publishes four raw words, adds Gaussian noise
/// to the fixture's gradients. Attacker brute-forces the window, regenerates
/// the noise and subtracts it.
KillChainResult run_seed_kill_chain(const TimeWindowSeedAttack& attack,
                                    const LinearRegressionFixture& fixture = {},
                                    std::size_t observed_words = 4);

struct DetectionConfig {
  DistributionSpec claimed = Normal{};
  DistributionSpec actual = UniformReal{};
  std::size_t attack_batches = 1000;
  std::size_t recovery_batches = 10000;
  AuditorConfig auditor{};
  Algorithm algorithm = Algorithm::MT19937;
  std::uint64_t seed = 1;
};

struct DetectionResult {
  std::size_t attack_reports = 0;
  std::size_t attack_warns = 0;
  std::size_t recovery_reports = 0;
  std::size_t recovery_warns = 0;
  SecurityClass class_after = SecurityClass::Weak;
  std::vector<RebindRecord> rebinds;

  double attack_warn_rate() const {
    return attack_reports ? static_cast<double>(attack_warns) / attack_reports : 0.0;
  }
  double recovery_warn_rate() const {
    return recovery_reports ? static_cast<double>(recovery_warns) / recovery_reports : 0.0;
  }
};

/// Substitutes `actual` for `claimed` on an audited slot, counts warnings,
/// enforces ReplaceWithCsprng on the slot and counts warnings again.
DetectionResult run_substitution_experiment(const DetectionConfig& config);

/// Runs a scenario end to end and returns its transcript records.
std::vector<Json> run_scenario(const AttackScenario& scenario);

}  // namespace rngsentinel
