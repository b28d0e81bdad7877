#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "rngsentinel/distribution.hpp"

namespace rngsentinel {

inline constexpr double kDefaultWarnThreshold = 0.01;
/// Reported p-values never drop below this, so log-aggregation stays finite.
inline constexpr double kMinPValue = 1e-300;

inline constexpr std::size_t kKsMinSamples = 20;
inline constexpr std::size_t kChiSquareMinSamples = 13;
inline constexpr double kChiSquareMinExpected = 5.0;
inline constexpr std::size_t kMonoBitMinBits = 100;

enum class TestKind { Z, KS, ChiSquare, MonoBit };
enum class Verdict { Pass, Warn };

std::string_view to_string(TestKind kind) noexcept;
std::string_view to_string(Verdict verdict) noexcept;

struct BitUniform {
  bool operator==(const BitUniform&) const = default;
};

/// What the test compared against. Unspecified when the caller supplied a
/// bare CDF or bare expected counts.
using TestTarget = std::variant<std::monostate, BitUniform, DistributionSpec>;

struct TestReport {
  TestKind test = TestKind::KS;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t sample_size = 0;
  TestTarget target;
  Verdict verdict = Verdict::Pass;
};

/// Two-sided one-sample Z test of the mean against a known (mu, sigma).
TestReport z_test(std::span<const double> samples, double mu, double sigma,
                  double warn_threshold = kDefaultWarnThreshold);

/// sup |F_n - F| over the sorted samples. Inputs need not be sorted.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// One-sample, two-sided Kolmogorov-Smirnov. Requires n >= 20 finite samples.
TestReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                   double warn_threshold = kDefaultWarnThreshold);

/// KS against a continuous DistributionSpec's own CDF.
TestReport ks_test(std::span<const double> samples, const DistributionSpec& spec,
                   double warn_threshold = kDefaultWarnThreshold);

/// Pearson chi-square with k - 1 degrees of freedom. Needs k >= 2, every
/// expected count >= 5, at least 13 observations, and sum(O) == round(sum(E)).
TestReport chi_square_test(std::span<const std::uint64_t> observed,
                           std::span<const double> expected,
                           double warn_threshold = kDefaultWarnThreshold);

/// Observed and expected counts for `samples` under `spec`. Continuous specs
/// use `bins` equal-probability bins. UniformInt uses one bin per value when
/// the range has at most `bins` values, else `bins` contiguous value groups.
struct BinnedCounts {
  std::vector<std::uint64_t> observed;
  std::vector<double> expected;
};
BinnedCounts bin_samples(std::span<const double> samples, const DistributionSpec& spec,
                         std::size_t bins = 10);

TestReport chi_square_test(std::span<const double> samples, const DistributionSpec& spec,
                           std::size_t bins = 10, double warn_threshold = kDefaultWarnThreshold);

/// NIST SP800-22 frequency (MonoBit) test over bits given as 0/1 bytes.
TestReport monobit_test(std::span<const std::uint8_t> bits,
                        double warn_threshold = kDefaultWarnThreshold);

/// MonoBit over the 64 * words.size() bits of raw generator words.
TestReport monobit_test_words(std::span<const std::uint64_t> words,
                              double warn_threshold = kDefaultWarnThreshold);

}  // namespace rngsentinel
