#pragma once

// Overhead of the enforcement modes on a synthetic sampling workload.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rngsentinel/json_io.hpp"

namespace rngsentinel {

/// Unwrapped: MT19937 sampler called directly.
/// Static: registry slot under per-call ReplaceWithCsprng, no runtime tests.
/// Blocking, ASN, RASN: the same slot with an auditor in that mode.
enum class BenchMode { Unwrapped, Static, Blocking, ASN, RASN };

std::string_view to_string(BenchMode mode) noexcept;
std::optional<BenchMode> parse_bench_mode(std::string_view name) noexcept;

struct BenchConfig {
  /// Workload is batches * batch_size standard normal draws.
  std::size_t batches = 10'000;
  std::size_t batch_size = 100;
  std::size_t runs = 5;
  std::uint64_t stride = 10;
  std::vector<BenchMode> modes{BenchMode::Unwrapped, BenchMode::Static, BenchMode::Blocking,
                               BenchMode::ASN, BenchMode::RASN};
};

/// `run_seconds` is the workload's own wall time: until the last call
/// returns. `run_total_seconds` also waits for the auditor to finish every
/// submitted batch; the two differ only for ASN and RASN.
struct BenchRow {
  BenchMode mode = BenchMode::Unwrapped;
  std::vector<double> run_seconds;
  std::vector<double> run_total_seconds;
  double median_seconds = 0.0;
  double median_total_seconds = 0.0;
  std::uint64_t reports = 0;
};

/// Runs are interleaved across modes so drift hits every mode alike, after
/// one untimed warm-up round. Zero
/// batches gives an empty table.
std::vector<BenchRow> run_bench(const BenchConfig& config);

/// {"batches","batch_size","runs","rows":[{"mode","median_s","runs_s",
/// "median_total_s","reports","overhead_vs_unwrapped"}]}. The overhead is median / unwrapped
/// median - 1, or null when unwrapped was not measured.
Json bench_to_json(const BenchConfig& config, const std::vector<BenchRow>& rows);

}  // namespace rngsentinel
