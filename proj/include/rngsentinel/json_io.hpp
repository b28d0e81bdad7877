#pragma once

// JSON encodings shared by the manifest reader, the audit log and the CLI.
// Objects are nlohmann::json (sorted keys), so field order is stable.

#include <json.hpp>

#include "rngsentinel/distribution.hpp"
#include "rngsentinel/error.hpp"
#include "rngsentinel/prng.hpp"
#include "rngsentinel/stats.hpp"

namespace rngsentinel {

using Json = nlohmann::json;

/// {"family": "normal", "mu": 0, "sigma": 1} and friends.
Json distribution_to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const Json& j);

/// {"kind": "system_time", "resolution_us": 1}; the bare string
/// "os_entropy" is also accepted on input.
Json seed_source_to_json(const SeedSource& source);
SeedSource seed_source_from_json(const Json& j);

/// "os", "time", "time:1000", "constant:7", "range:1,1000000000", "user:42".
SeedSource parse_seed_source(std::string_view text);

Json test_target_to_json(const TestTarget& target);
Json test_report_to_json(const TestReport& report);

/// Reads a required field, turning nlohmann's type errors into ParseError.
template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(Errc::ParseError, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace rngsentinel
