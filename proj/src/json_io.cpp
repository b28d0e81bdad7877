#include "rngsentinel/json_io.hpp"

#include <charconv>

#include "rngsentinel/error.hpp"

namespace rngsentinel {

Json distribution_to_json(const DistributionSpec& spec) {
  Json j;
  j["family"] = std::string(family_name(spec));
  std::visit(
      [&j](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UniformReal> || std::is_same_v<T, UniformInt>) {
          j["a"] = d.a;
          j["b"] = d.b;
        } else if constexpr (std::is_same_v<T, Normal>) {
          j["mu"] = d.mu;
          j["sigma"] = d.sigma;
        } else {
          j["mu"] = d.mu;
          j["b"] = d.b;
        }
      },
      spec);
  return j;
}

DistributionSpec distribution_from_json(const Json& j) {
  if (j.is_string()) return parse_distribution(j.get<std::string>());
  const auto family = required<std::string>(j, "family");
  DistributionSpec spec;
  if (family == "uniform" || family == "uniform_real") {
    spec = UniformReal{required<double>(j, "a"), required<double>(j, "b")};
  } else if (family == "uniform_int") {
    spec = UniformInt{required<std::int64_t>(j, "a"), required<std::int64_t>(j, "b")};
  } else if (family == "normal") {
    spec = Normal{required<double>(j, "mu"), required<double>(j, "sigma")};
  } else if (family == "laplace") {
    spec = Laplace{required<double>(j, "mu"), required<double>(j, "b")};
  } else {
    throw Error(Errc::ParseError, "unknown distribution family '" + family + "'");
  }
  validate(spec);
  return spec;
}

Json seed_source_to_json(const SeedSource& source) {
  Json j;
  j["kind"] = std::string(to_string(kind_of(source)));
  std::visit(
      [&j](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SystemTime>) {
          j["resolution_us"] = s.resolution_us;
        } else if constexpr (std::is_same_v<T, BoundedRange>) {
          j["lo"] = s.lo;
          j["hi"] = s.hi;
        } else if constexpr (std::is_same_v<T, ConstantSeed> || std::is_same_v<T, UserProvided>) {
          j["value"] = s.value;
        }
      },
      source);
  return j;
}

SeedSource seed_source_from_json(const Json& j) {
  const Json obj = j.is_string() ? Json{{"kind", j.get<std::string>()}} : j;
  const auto kind = required<std::string>(obj, "kind");
  SeedSource source;
  if (kind == "os_entropy") {
    source = OsEntropy{};
  } else if (kind == "system_time") {
    source = SystemTime{obj.value("resolution_us", std::int64_t{1})};
  } else if (kind == "constant") {
    source = ConstantSeed{required<std::uint64_t>(obj, "value")};
  } else if (kind == "bounded_range") {
    source = BoundedRange{required<std::uint64_t>(obj, "lo"), required<std::uint64_t>(obj, "hi")};
  } else if (kind == "user_provided") {
    source = UserProvided{required<std::uint64_t>(obj, "value")};
  } else {
    throw Error(Errc::ParseError, "unknown seed source kind '" + kind + "'");
  }
  validate(source);
  return source;
}

namespace {

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw Error(Errc::ParseError, "bad unsigned integer '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

SeedSource parse_seed_source(std::string_view text) {
  const auto colon = text.find(':');
  const auto kind = text.substr(0, colon);
  const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  SeedSource source;
  if (kind == "os" || kind == "os_entropy") {
    source = OsEntropy{};
  } else if (kind == "time" || kind == "system_time") {
    source = SystemTime{arg.empty() ? 1 : static_cast<std::int64_t>(parse_u64(arg))};
  } else if (kind == "constant") {
    source = ConstantSeed{parse_u64(arg)};
  } else if (kind == "user" || kind == "user_provided") {
    source = UserProvided{parse_u64(arg)};
  } else if (kind == "range" || kind == "bounded_range") {
    const auto comma = arg.find(',');
    if (comma == std::string_view::npos) {
      throw Error(Errc::ParseError, "range seed source needs lo,hi");
    }
    source = BoundedRange{parse_u64(arg.substr(0, comma)), parse_u64(arg.substr(comma + 1))};
  } else {
    throw Error(Errc::ParseError, "unknown seed source '" + std::string(text) + "'");
  }
  validate(source);
  return source;
}

Json test_target_to_json(const TestTarget& target) {
  if (std::holds_alternative<BitUniform>(target)) return Json{{"family", "bit_uniform"}};
  if (const auto* spec = std::get_if<DistributionSpec>(&target)) return distribution_to_json(*spec);
  return nullptr;
}

Json test_report_to_json(const TestReport& report) {
  return Json{{"test", std::string(to_string(report.test))},
              {"statistic", report.statistic},
              {"p_value", report.p_value},
              {"sample_size", report.sample_size},
              {"target", test_target_to_json(report.target)},
              {"verdict", std::string(to_string(report.verdict))}};
}

}  // namespace rngsentinel
