#include "rngsentinel/distribution.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "rngsentinel/error.hpp"
#include "rngsentinel/special_functions.hpp"

namespace rngsentinel {

void validate(const DistributionSpec& spec) {
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformReal>) {
          if (!(d.a < d.b)) throw Error(Errc::InvalidRange, "uniform requires a < b");
        } else if constexpr (std::is_same_v<T, UniformInt>) {
          if (!(d.a < d.b)) throw Error(Errc::InvalidRange, "uniform_int requires a < b");
        } else if constexpr (std::is_same_v<T, Normal>) {
          if (!(d.sigma > 0.0) || !std::isfinite(d.mu)) {
            throw Error(Errc::InvalidScale, "normal requires sigma > 0");
          }
        } else {
          if (!(d.b > 0.0) || !std::isfinite(d.mu)) {
            throw Error(Errc::InvalidScale, "laplace requires b > 0");
          }
        }
      },
      spec);
}

bool is_continuous(const DistributionSpec& spec) noexcept {
  return !std::holds_alternative<UniformInt>(spec);
}

std::string_view family_name(const DistributionSpec& spec) noexcept {
  switch (spec.index()) {
    case 0: return "uniform";
    case 1: return "uniform_int";
    case 2: return "normal";
    default: return "laplace";
  }
}

namespace {

std::string format_real(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, std::string_view whole) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw Error(Errc::ParseError, "bad number '" + std::string(text) + "' in '" +
                                      std::string(whole) + "'");
  }
  return value;
}

}  // namespace

std::string to_string(const DistributionSpec& spec) {
  return std::visit(
      [&](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        const std::string family(family_name(spec));
        if constexpr (std::is_same_v<T, UniformInt>) {
          return family + ":" + std::to_string(d.a) + "," + std::to_string(d.b);
        } else if constexpr (std::is_same_v<T, UniformReal>) {
          return family + ":" + format_real(d.a) + "," + format_real(d.b);
        } else if constexpr (std::is_same_v<T, Normal>) {
          return family + ":" + format_real(d.mu) + "," + format_real(d.sigma);
        } else {
          return family + ":" + format_real(d.mu) + "," + format_real(d.b);
        }
      },
      spec);
}

DistributionSpec parse_distribution(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(Errc::ParseError, "expected family:p1,p2, got '" + std::string(text) + "'");
  }
  const auto family = text.substr(0, colon);
  const auto params = split(text.substr(colon + 1), ',');
  if (params.size() != 2) {
    throw Error(Errc::ParseError, "expected two parameters in '" + std::string(text) + "'");
  }
  DistributionSpec spec;
  if (family == "uniform" || family == "uniform_real") {
    spec = UniformReal{parse_number<double>(params[0], text), parse_number<double>(params[1], text)};
  } else if (family == "uniform_int") {
    spec = UniformInt{parse_number<std::int64_t>(params[0], text),
                      parse_number<std::int64_t>(params[1], text)};
  } else if (family == "normal") {
    spec = Normal{parse_number<double>(params[0], text), parse_number<double>(params[1], text)};
  } else if (family == "laplace") {
    spec = Laplace{parse_number<double>(params[0], text), parse_number<double>(params[1], text)};
  } else {
    throw Error(Errc::ParseError, "unknown distribution family '" + std::string(family) + "'");
  }
  validate(spec);
  return spec;
}

double cdf(const DistributionSpec& spec, double x) {
  return std::visit(
      [x](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformReal>) {
          if (x <= d.a) return 0.0;
          if (x >= d.b) return 1.0;
          return (x - d.a) / (d.b - d.a);
        } else if constexpr (std::is_same_v<T, UniformInt>) {
          const double k = std::floor(x);
          const double n = static_cast<double>(d.b) - static_cast<double>(d.a);
          const double below = k - static_cast<double>(d.a) + 1.0;
          if (below <= 0.0) return 0.0;
          if (below >= n) return 1.0;
          return below / n;
        } else if constexpr (std::is_same_v<T, Normal>) {
          return normal_cdf((x - d.mu) / d.sigma);
        } else {
          const double z = (x - d.mu) / d.b;
          return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
        }
      },
      spec);
}

double mean(const DistributionSpec& spec) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformReal>) {
          return 0.5 * (d.a + d.b);
        } else if constexpr (std::is_same_v<T, UniformInt>) {
          return 0.5 * (static_cast<double>(d.a) + static_cast<double>(d.b) - 1.0);
        } else {
          return d.mu;
        }
      },
      spec);
}

double stddev(const DistributionSpec& spec) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformReal>) {
          return (d.b - d.a) / std::sqrt(12.0);
        } else if constexpr (std::is_same_v<T, UniformInt>) {
          const double n = static_cast<double>(d.b) - static_cast<double>(d.a);
          return std::sqrt((n * n - 1.0) / 12.0);
        } else if constexpr (std::is_same_v<T, Normal>) {
          return d.sigma;
        } else {
          return d.b * std::sqrt(2.0);
        }
      },
      spec);
}

StandardMember standard_member(const DistributionSpec& spec) {
  if (!is_continuous(spec)) {
    throw Error(Errc::SpecMismatch, "discrete distributions have no continuous standard member");
  }
  return std::holds_alternative<Normal>(spec) ? StandardMember::StandardNormal
                                              : StandardMember::StandardUniform;
}

double standardize(const DistributionSpec& spec, double x) {
  if (const auto* n = std::get_if<Normal>(&spec)) return (x - n->mu) / n->sigma;
  if (!is_continuous(spec)) {
    throw Error(Errc::SpecMismatch, "discrete distributions cannot be standardized");
  }
  return cdf(spec, x);
}

double standard_cdf(StandardMember member, double x) {
  if (member == StandardMember::StandardNormal) return normal_cdf(x);
  return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x);
}

}  // namespace rngsentinel
