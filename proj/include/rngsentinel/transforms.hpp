#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>

#include "rngsentinel/distribution.hpp"
#include "rngsentinel/prng.hpp"

namespace rngsentinel {

// Pure transforms from raw uniform words to the distributions ML code asks
// for. None of them owns a generator.

/// u / 2^64 * (b - a) + a, kept inside [a, b).
double to_uniform_real(std::uint64_t u, double a, double b);

/// u mod (b - a) + a.
std::int64_t to_uniform_int(std::uint64_t u, std::int64_t a, std::int64_t b);

/// Box-Muller. Requires u0 in (0, 1] and u1 in [0, 1).
std::pair<double, double> box_muller(double u0, double u1);

double scale_normal(double z, double mu, double sigma);

/// Inverse-CDF Laplace sample mu - b * sgn(u) * ln(1 - |u|), u in (-1, 1).
double to_laplace(double u, double mu, double b);

/// Unit-interval value for the Box-Muller radius draw: raw word 0 is moved
/// to the smallest positive grid value so the transform stays total.
double unit_interval_open_below(std::uint64_t word) noexcept;

/// Draws samples of a DistributionSpec from a generator. Normal draws are
/// produced in Box-Muller pairs; the second half of a pair is cached.
class Sampler {
 public:
  explicit Sampler(DistributionSpec spec);

  const DistributionSpec& spec() const noexcept { return spec_; }
  void set_spec(DistributionSpec spec);
  /// Drops a cached Box-Muller half, e.g. after the generator is swapped.
  void reset() noexcept { spare_.reset(); }

  double draw(GeneratorHandle& gen);

  /// Same transform over any source of raw 64-bit words.
  template <typename NextWord>
  double draw_from(NextWord&& next_word) {
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, UniformReal>) {
            return to_uniform_real(next_word(), d.a, d.b);
          } else if constexpr (std::is_same_v<T, UniformInt>) {
            return static_cast<double>(to_uniform_int(next_word(), d.a, d.b));
          } else if constexpr (std::is_same_v<T, Normal>) {
            if (spare_) {
              const double z = *spare_;
              spare_.reset();
              return scale_normal(z, d.mu, d.sigma);
            }
            const double u0 = unit_interval_open_below(next_word());
            const double u1 = raw_to_unit_interval(next_word());
            const auto [z0, z1] = box_muller(u0, u1);
            spare_ = z1;
            return scale_normal(z0, d.mu, d.sigma);
          } else {
            double u = to_uniform_real(next_word(), -1.0, 1.0);
            if (u == -1.0) u = std::nextafter(-1.0, 0.0);
            return to_laplace(u, d.mu, d.b);
          }
        },
        spec_);
  }

 private:
  DistributionSpec spec_;
  std::optional<double> spare_;
};

}  // namespace rngsentinel
