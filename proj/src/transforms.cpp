#include "rngsentinel/transforms.hpp"

#include <cmath>
#include <numbers>

#include "rngsentinel/error.hpp"

namespace rngsentinel {

double to_uniform_real(std::uint64_t u, double a, double b) {
  if (!(a < b)) throw Error(Errc::InvalidRange, "to_uniform_real requires a < b");
  const double z = raw_to_unit_interval(u) * (b - a) + a;
  // Rounding in the affine map can land on b for wide or offset ranges.
  return z < b ? z : std::nextafter(b, a);
}

std::int64_t to_uniform_int(std::uint64_t u, std::int64_t a, std::int64_t b) {
  if (!(a < b)) throw Error(Errc::InvalidRange, "to_uniform_int requires a < b");
  const std::uint64_t width = static_cast<std::uint64_t>(b) - static_cast<std::uint64_t>(a);
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + u % width);
}

std::pair<double, double> box_muller(double u0, double u1) {
  if (!(u0 > 0.0 && u0 <= 1.0)) throw Error(Errc::DomainError, "box_muller requires u0 in (0, 1]");
  if (!(u1 >= 0.0 && u1 < 1.0)) throw Error(Errc::DomainError, "box_muller requires u1 in [0, 1)");
  const double radius = std::sqrt(-2.0 * std::log(u0));
  const double angle = 2.0 * std::numbers::pi * u1;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double scale_normal(double z, double mu, double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::InvalidScale, "scale_normal requires sigma > 0");
  return sigma * z + mu;
}

double to_laplace(double u, double mu, double b) {
  if (!(std::abs(u) < 1.0)) throw Error(Errc::DomainError, "to_laplace requires |u| < 1");
  if (!(b > 0.0)) throw Error(Errc::InvalidScale, "to_laplace requires b > 0");
  const double sign = (u > 0.0) - (u < 0.0);
  return mu - b * sign * std::log1p(-std::abs(u));
}

double unit_interval_open_below(std::uint64_t word) noexcept {
  const double u = raw_to_unit_interval(word);
  return u > 0.0 ? u : 0x1.0p-53;
}

Sampler::Sampler(DistributionSpec spec) : spec_(spec) { validate(spec_); }

void Sampler::set_spec(DistributionSpec spec) {
  validate(spec);
  spec_ = spec;
  spare_.reset();
}

double Sampler::draw(GeneratorHandle& gen) {
  return draw_from([&gen] { return gen.next_u64(); });
}

}  // namespace rngsentinel
