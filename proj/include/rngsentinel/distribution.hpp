#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

namespace rngsentinel {

struct UniformReal {
  double a = 0.0;
  double b = 1.0;
  bool operator==(const UniformReal&) const = default;
};

/// Integers in [a, b).
struct UniformInt {
  std::int64_t a = 0;
  std::int64_t b = 2;
  bool operator==(const UniformInt&) const = default;
};

struct Normal {
  double mu = 0.0;
  double sigma = 1.0;
  bool operator==(const Normal&) const = default;
};

struct Laplace {
  double mu = 0.0;
  double b = 1.0;
  bool operator==(const Laplace&) const = default;
};

/// The distribution a sample stream claims to follow, and the contract the
/// auditor checks it against.
using DistributionSpec = std::variant<UniformReal, UniformInt, Normal, Laplace>;

/// Throws InvalidRange (a >= b) or InvalidScale (sigma or b not positive).
void validate(const DistributionSpec& spec);

bool is_continuous(const DistributionSpec& spec) noexcept;
std::string_view family_name(const DistributionSpec& spec) noexcept;

/// "normal:0,1", "uniform:0,1", "uniform_int:0,10", "laplace:0,1".
std::string to_string(const DistributionSpec& spec);
DistributionSpec parse_distribution(std::string_view text);

double cdf(const DistributionSpec& spec, double x);
double mean(const DistributionSpec& spec);
double stddev(const DistributionSpec& spec);

// Continuous observations are audited against a standard member: normals
// against N(0,1) after (x - mu) / sigma, everything else against U(0,1)
// through the distribution's own CDF.
enum class StandardMember { StandardNormal, StandardUniform };

StandardMember standard_member(const DistributionSpec& spec);
double standardize(const DistributionSpec& spec, double x);
double standard_cdf(StandardMember member, double x);

}  // namespace rngsentinel
