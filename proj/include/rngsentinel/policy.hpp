#pragma once

// Static phase: a randomness manifest declares a call graph and what each
// function knows about its randomness. Policies run over every function that
// can reach a core RNG primitive.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rngsentinel/distribution.hpp"
#include "rngsentinel/json_io.hpp"
#include "rngsentinel/prng.hpp"

namespace rngsentinel {

struct GeneratorFact {
  Algorithm algorithm = Algorithm::MT19937;
  SeedSource seed_source = OsEntropy{};

  SecurityClass security_class() const noexcept {
    return classify(algorithm, kind_of(seed_source));
  }
  bool operator==(const GeneratorFact&) const = default;
};

struct GeneralContext {
  bool operator==(const GeneralContext&) const = default;
};

/// epsilon and delta are labels only; nothing here checks a privacy bound.
struct DifferentialPrivacy {
  double epsilon = 1.0;
  double delta = 0.0;
  bool operator==(const DifferentialPrivacy&) const = default;
};

using FunctionContext = std::variant<GeneralContext, DifferentialPrivacy>;

struct FunctionFact {
  std::string id;
  std::optional<DistributionSpec> declared_distribution;
  std::optional<GeneratorFact> generator;
  FunctionContext context;
  bool operator==(const FunctionFact&) const = default;
};

struct CallEdge {
  std::string caller;
  std::string callee;
  bool operator==(const CallEdge&) const = default;
};

struct RandomnessManifest {
  std::vector<FunctionFact> functions;
  std::vector<CallEdge> edges;
  std::vector<std::string> core_rng_ids;
};

/// Throws MalformedManifest on duplicate ids, dangling edges, unknown core
/// ids or out-of-range privacy labels.
void validate(const RandomnessManifest& manifest);

RandomnessManifest manifest_from_json(const Json& j);
Json manifest_to_json(const RandomnessManifest& manifest);

/// Every function from which some core RNG id is reachable along call edges,
/// the core ids included.
std::set<std::string> transitive_rng_closure(const RandomnessManifest& manifest);

enum class Rule {
  InsecureSeedSource,
  LowSeedEntropy,
  NonCsprngInDpContext,
  UnexpectedDistribution,
  UnreachableGeneratorFacts,
};
enum class Severity { Error, Warning };

std::string_view to_string(Rule rule) noexcept;
std::string_view to_string(Severity severity) noexcept;

struct PolicyViolation {
  Rule rule = Rule::InsecureSeedSource;
  std::string function_id;
  Severity severity = Severity::Error;
  std::string detail;
};

Json violation_to_json(const PolicyViolation& violation);

struct Ruleset {
  /// Bounded-range seeds narrower than this many bits are flagged.
  double min_seed_entropy_bits = 32.0;
  /// Distribution each known function id must declare, if it declares one.
  std::map<std::string, DistributionSpec, std::less<>> expected_distributions;

  /// Entropy floor plus expectations for the PyTorch core primitives.
  static Ruleset defaults();
};

Ruleset ruleset_from_json(const Json& j);

/// Violations sorted by (function_id, rule).
std::vector<PolicyViolation> evaluate_policies(const RandomnessManifest& manifest,
                                               const Ruleset& ruleset = Ruleset::defaults());

enum class Directive { ReseedFromOsEntropy, ReplaceWithCsprng };

std::string_view to_string(Directive directive) noexcept;

struct Remediation {
  std::string function_id;
  Directive directive = Directive::ReseedFromOsEntropy;
  bool operator==(const Remediation&) const = default;
};

Json remediation_to_json(const Remediation& remediation);

/// One directive per affected function, sorted by id. ReplaceWithCsprng
/// subsumes a reseed of the same function.
std::vector<Remediation> remediation_plan(std::span<const PolicyViolation> violations);

/// The manifest as it would look after the directives were enforced.
RandomnessManifest apply_remediation(RandomnessManifest manifest,
                                     std::span<const Remediation> plan);

}  // namespace rngsentinel
