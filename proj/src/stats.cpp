#include "rngsentinel/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rngsentinel/error.hpp"
#include "rngsentinel/special_functions.hpp"

namespace rngsentinel {

std::string_view to_string(TestKind kind) noexcept {
  switch (kind) {
    case TestKind::Z: return "z";
    case TestKind::KS: return "ks";
    case TestKind::ChiSquare: return "chi_square";
    case TestKind::MonoBit: return "monobit";
  }
  return "unknown";
}

std::string_view to_string(Verdict verdict) noexcept {
  return verdict == Verdict::Pass ? "pass" : "warn";
}

namespace {

TestReport make_report(TestKind kind, double statistic, double p, std::size_t n,
                       double warn_threshold, TestTarget target = {}) {
  TestReport report;
  report.test = kind;
  report.statistic = statistic;
  report.p_value = std::clamp(p, kMinPValue, 1.0);
  report.sample_size = n;
  report.target = std::move(target);
  report.verdict = report.p_value < warn_threshold ? Verdict::Warn : Verdict::Pass;
  return report;
}

}  // namespace

TestReport z_test(std::span<const double> samples, double mu, double sigma,
                  double warn_threshold) {
  if (samples.empty()) throw Error(Errc::EmptySample, "z_test needs at least one sample");
  if (!(sigma > 0.0)) throw Error(Errc::InvalidScale, "z_test requires sigma > 0");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (!std::isfinite(mean)) throw Error(Errc::NonFiniteSample, "z_test sample mean is not finite");
  const double z = (mean - mu) / (sigma / std::sqrt(n));
  const double p = erfc(std::abs(z) / std::numbers::sqrt2);  // 2 * (1 - Phi(|z|))
  return make_report(TestKind::Z, z, p, samples.size(), warn_threshold);
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return d;
}

TestReport ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                   double warn_threshold) {
  if (samples.size() < kKsMinSamples) {
    throw Error(Errc::SampleTooSmall, "ks_test needs at least 20 samples, got " +
                                          std::to_string(samples.size()));
  }
  if (!std::all_of(samples.begin(), samples.end(), [](double x) { return std::isfinite(x); })) {
    throw Error(Errc::NonFiniteSample, "ks_test sample contains NaN or infinity");
  }
  const double d = ks_statistic(samples, cdf);
  const double p = kolmogorov_sf(d, static_cast<double>(samples.size()));
  return make_report(TestKind::KS, d, p, samples.size(), warn_threshold);
}

TestReport ks_test(std::span<const double> samples, const DistributionSpec& spec,
                   double warn_threshold) {
  validate(spec);
  if (!is_continuous(spec)) {
    throw Error(Errc::SpecMismatch, "ks_test needs a continuous distribution");
  }
  auto report = ks_test(samples, [&spec](double x) { return cdf(spec, x); }, warn_threshold);
  report.target = spec;
  return report;
}

TestReport chi_square_test(std::span<const std::uint64_t> observed,
                           std::span<const double> expected, double warn_threshold) {
  if (observed.size() != expected.size()) {
    throw Error(Errc::CountMismatch, "observed and expected bin counts differ in length");
  }
  if (observed.size() < 2) throw Error(Errc::InvalidArgument, "chi_square_test needs k >= 2 bins");
  const std::uint64_t total = std::accumulate(observed.begin(), observed.end(), std::uint64_t{0});
  if (total < kChiSquareMinSamples) {
    throw Error(Errc::SampleTooSmall, "chi_square_test needs at least 13 observations, got " +
                                          std::to_string(total));
  }
  for (double e : expected) {
    if (!(e >= kChiSquareMinExpected)) {
      throw Error(Errc::BinTooSparse, "expected count " + std::to_string(e) + " is below 5");
    }
  }
  const double expected_total = std::accumulate(expected.begin(), expected.end(), 0.0);
  if (static_cast<double>(total) != std::round(expected_total)) {
    throw Error(Errc::CountMismatch, "observed total " + std::to_string(total) +
                                         " does not match expected total " +
                                         std::to_string(expected_total));
  }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double diff = static_cast<double>(observed[i]) - expected[i];
    chi2 += diff * diff / expected[i];
  }
  const double p = chi2_sf(chi2, static_cast<double>(observed.size() - 1));
  return make_report(TestKind::ChiSquare, chi2, p, static_cast<std::size_t>(total),
                     warn_threshold);
}

BinnedCounts bin_samples(std::span<const double> samples, const DistributionSpec& spec,
                         std::size_t bins) {
  validate(spec);
  if (bins < 2) throw Error(Errc::InvalidArgument, "need at least two bins");
  const double n = static_cast<double>(samples.size());
  BinnedCounts counts;

  if (const auto* ints = std::get_if<UniformInt>(&spec)) {
    __extension__ typedef unsigned __int128 u128;
    const std::uint64_t range =
        static_cast<std::uint64_t>(ints->b) - static_cast<std::uint64_t>(ints->a);
    const std::uint64_t k = std::min<std::uint64_t>(range, bins);
    counts.observed.assign(k, 0);
    counts.expected.resize(k);
    // Group i covers offsets [floor(i * range / k), floor((i + 1) * range / k)).
    for (std::uint64_t i = 0; i < k; ++i) {
      const auto lo = static_cast<std::uint64_t>(u128{i} * range / k);
      const auto hi = static_cast<std::uint64_t>(u128{i + 1} * range / k);
      counts.expected[i] = n * static_cast<double>(hi - lo) / static_cast<double>(range);
    }
    for (double x : samples) {
      if (!std::isfinite(x)) throw Error(Errc::NonFiniteSample, "chi-square sample is not finite");
      const double offset = std::floor(x) - static_cast<double>(ints->a);
      std::uint64_t bin = 0;
      if (offset >= static_cast<double>(range)) {
        bin = k - 1;
      } else if (offset > 0.0) {
        const auto o = static_cast<std::uint64_t>(offset);
        bin = static_cast<std::uint64_t>(((u128{o} + 1) * k - 1) / range);
      }
      ++counts.observed[bin];
    }
    return counts;
  }

  counts.observed.assign(bins, 0);
  counts.expected.assign(bins, n / static_cast<double>(bins));
  for (double x : samples) {
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteSample, "chi-square sample is not finite");
    const double u = cdf(spec, x);
    const auto bin = std::min(static_cast<std::size_t>(u * static_cast<double>(bins)), bins - 1);
    ++counts.observed[bin];
  }
  return counts;
}

TestReport chi_square_test(std::span<const double> samples, const DistributionSpec& spec,
                           std::size_t bins, double warn_threshold) {
  const auto counts = bin_samples(samples, spec, bins);
  auto report = chi_square_test(counts.observed, counts.expected, warn_threshold);
  report.target = spec;
  return report;
}

namespace {

TestReport monobit_from_sum(std::int64_t sum, std::size_t n, double warn_threshold) {
  if (n < kMonoBitMinBits) {
    throw Error(Errc::SampleTooSmall, "monobit_test needs at least 100 bits, got " +
                                          std::to_string(n));
  }
  const double s = static_cast<double>(std::abs(sum)) / std::sqrt(static_cast<double>(n));
  const double p = erfc(s / std::numbers::sqrt2);
  return make_report(TestKind::MonoBit, s, p, n, warn_threshold, BitUniform{});
}

}  // namespace

TestReport monobit_test(std::span<const std::uint8_t> bits, double warn_threshold) {
  std::int64_t sum = 0;
  for (auto b : bits) {
    if (b > 1) throw Error(Errc::InvalidArgument, "monobit_test bits must be 0 or 1");
    sum += b ? 1 : -1;
  }
  return monobit_from_sum(sum, bits.size(), warn_threshold);
}

TestReport monobit_test_words(std::span<const std::uint64_t> words, double warn_threshold) {
  std::int64_t ones = 0;
  for (auto w : words) ones += std::popcount(w);
  const auto n = static_cast<std::int64_t>(words.size() * 64);
  return monobit_from_sum(2 * ones - n, words.size() * 64, warn_threshold);
}

}  // namespace rngsentinel
