#include "rngsentinel/policy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <unordered_map>

#include "rngsentinel/error.hpp"

namespace rngsentinel {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedManifest, what); }

FunctionContext context_from_json(const Json& j) {
  if (j.is_null()) return GeneralContext{};
  const Json obj = j.is_string() ? Json{{"kind", j.get<std::string>()}} : j;
  const auto kind = required<std::string>(obj, "kind");
  if (kind == "general") return GeneralContext{};
  if (kind == "differential_privacy" || kind == "dp") {
    return DifferentialPrivacy{required<double>(obj, "epsilon"), obj.value("delta", 0.0)};
  }
  malformed("unknown function context '" + kind + "'");
}

Json context_to_json(const FunctionContext& context) {
  if (const auto* dp = std::get_if<DifferentialPrivacy>(&context)) {
    return Json{{"kind", "differential_privacy"}, {"epsilon", dp->epsilon}, {"delta", dp->delta}};
  }
  return Json{{"kind", "general"}};
}

}  // namespace

void validate(const RandomnessManifest& manifest) {
  std::set<std::string, std::less<>> ids;
  for (const auto& f : manifest.functions) {
    if (f.id.empty()) malformed("function with empty id");
    if (!ids.insert(f.id).second) malformed("duplicate function id '" + f.id + "'");
    if (const auto* dp = std::get_if<DifferentialPrivacy>(&f.context)) {
      if (!(dp->epsilon > 0.0) || !(dp->delta >= 0.0 && dp->delta < 1.0)) {
        malformed("function '" + f.id + "' has DP labels outside epsilon > 0, delta in [0, 1)");
      }
    }
  }
  for (const auto& e : manifest.edges) {
    if (!ids.contains(e.caller) || !ids.contains(e.callee)) {
      malformed("dangling edge " + e.caller + " -> " + e.callee);
    }
  }
  for (const auto& core : manifest.core_rng_ids) {
    if (!ids.contains(core)) malformed("core RNG id '" + core + "' is not a declared function");
  }
}

RandomnessManifest manifest_from_json(const Json& j) {
  if (!j.is_object()) malformed("manifest must be a JSON object");
  RandomnessManifest manifest;
  try {
    for (const auto& fj : j.value("functions", Json::array())) {
      FunctionFact fact;
      fact.id = required<std::string>(fj, "id");
      if (fj.contains("distribution") && !fj["distribution"].is_null()) {
        fact.declared_distribution = distribution_from_json(fj["distribution"]);
      }
      if (fj.contains("generator") && !fj["generator"].is_null()) {
        const auto& gj = fj["generator"];
        const auto name = required<std::string>(gj, "algorithm");
        const auto algorithm = parse_algorithm(name);
        if (!algorithm) malformed("unknown algorithm '" + name + "' in '" + fact.id + "'");
        fact.generator = GeneratorFact{*algorithm, seed_source_from_json(gj.at("seed_source"))};
      }
      fact.context = context_from_json(fj.value("context", Json()));
      manifest.functions.push_back(std::move(fact));
    }
    for (const auto& ej : j.value("edges", Json::array())) {
      if (ej.is_array() && ej.size() == 2) {
        manifest.edges.push_back({ej[0].get<std::string>(), ej[1].get<std::string>()});
      } else {
        manifest.edges.push_back(
            {required<std::string>(ej, "caller"), required<std::string>(ej, "callee")});
      }
    }
    for (const auto& cj : j.value("core_rng_ids", Json::array())) {
      manifest.core_rng_ids.push_back(cj.get<std::string>());
    }
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedManifest) throw;
    malformed(e.what());
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  validate(manifest);
  return manifest;
}

Json manifest_to_json(const RandomnessManifest& manifest) {
  Json functions = Json::array();
  for (const auto& f : manifest.functions) {
    Json fj{{"id", f.id}, {"context", context_to_json(f.context)}};
    if (f.declared_distribution) fj["distribution"] = distribution_to_json(*f.declared_distribution);
    if (f.generator) {
      fj["generator"] = Json{{"algorithm", std::string(to_string(f.generator->algorithm))},
                             {"seed_source", seed_source_to_json(f.generator->seed_source)}};
    }
    functions.push_back(std::move(fj));
  }
  Json edges = Json::array();
  for (const auto& e : manifest.edges) edges.push_back(Json::array({e.caller, e.callee}));
  return Json{{"functions", functions}, {"edges", edges}, {"core_rng_ids", manifest.core_rng_ids}};
}

std::set<std::string> transitive_rng_closure(const RandomnessManifest& manifest) {
  validate(manifest);
  std::unordered_map<std::string_view, std::vector<std::string_view>> callers;
  for (const auto& e : manifest.edges) callers[e.callee].push_back(e.caller);

  std::set<std::string> closure;
  std::deque<std::string_view> frontier;
  for (const auto& core : manifest.core_rng_ids) {
    if (closure.insert(core).second) frontier.push_back(core);
  }
  while (!frontier.empty()) {
    const auto id = frontier.front();
    frontier.pop_front();
    const auto it = callers.find(id);
    if (it == callers.end()) continue;
    for (const auto caller : it->second) {
      if (closure.emplace(caller).second) frontier.push_back(caller);
    }
  }
  return closure;
}

std::string_view to_string(Rule rule) noexcept {
  switch (rule) {
    case Rule::InsecureSeedSource: return "InsecureSeedSource";
    case Rule::LowSeedEntropy: return "LowSeedEntropy";
    case Rule::NonCsprngInDpContext: return "NonCsprngInDpContext";
    case Rule::UnexpectedDistribution: return "UnexpectedDistribution";
    case Rule::UnreachableGeneratorFacts: return "UnreachableGeneratorFacts";
  }
  return "Unknown";
}

std::string_view to_string(Severity severity) noexcept {
  return severity == Severity::Error ? "Error" : "Warning";
}

Json violation_to_json(const PolicyViolation& v) {
  return Json{{"rule", std::string(to_string(v.rule))},
              {"function_id", v.function_id},
              {"severity", std::string(to_string(v.severity))},
              {"detail", v.detail}};
}

Ruleset Ruleset::defaults() {
  Ruleset rules;
  rules.expected_distributions.emplace("torch.rand", UniformReal{0.0, 1.0});
  rules.expected_distributions.emplace("torch.Tensor.uniform_", UniformReal{0.0, 1.0});
  rules.expected_distributions.emplace("torch.randn", Normal{0.0, 1.0});
  return rules;
}

Ruleset ruleset_from_json(const Json& j) {
  Ruleset rules = Ruleset::defaults();
  if (j.contains("min_seed_entropy_bits")) {
    rules.min_seed_entropy_bits = required<double>(j, "min_seed_entropy_bits");
  }
  if (j.contains("expected_distributions")) {
    rules.expected_distributions.clear();
    for (const auto& [id, spec] : j.at("expected_distributions").items()) {
      rules.expected_distributions.emplace(id, distribution_from_json(spec));
    }
  }
  return rules;
}

std::vector<PolicyViolation> evaluate_policies(const RandomnessManifest& manifest,
                                               const Ruleset& ruleset) {
  const auto closure = transitive_rng_closure(manifest);
  std::vector<PolicyViolation> out;
  auto emit = [&out](Rule rule, const std::string& id, Severity sev, std::string detail) {
    out.push_back({rule, id, sev, std::move(detail)});
  };

  for (const auto& f : manifest.functions) {
    if (!closure.contains(f.id)) {
      if (f.generator || f.declared_distribution) {
        emit(Rule::UnreachableGeneratorFacts, f.id, Severity::Warning,
             "declares randomness facts but reaches no core RNG function");
      }
      continue;
    }

    if (std::holds_alternative<DifferentialPrivacy>(f.context)) {
      if (!f.generator) {
        emit(Rule::NonCsprngInDpContext, f.id, Severity::Error,
             "DP noise drawn from the host default generator");
      } else if (f.generator->security_class() != SecurityClass::Cryptographic) {
        emit(Rule::NonCsprngInDpContext, f.id, Severity::Error,
             "DP noise drawn from " + std::string(to_string(f.generator->algorithm)) + " (" +
                 std::string(to_string(f.generator->security_class())) + ")");
      }
    }

    if (f.generator) {
      const auto& source = f.generator->seed_source;
      switch (kind_of(source)) {
        case SeedKind::SystemTime:
          emit(Rule::InsecureSeedSource, f.id, Severity::Error, "seeded from the system clock");
          break;
        case SeedKind::Constant:
          emit(Rule::InsecureSeedSource, f.id, Severity::Error, "seeded with a constant");
          break;
        case SeedKind::UserProvided:
          emit(Rule::InsecureSeedSource, f.id, Severity::Warning,
               "seed supplied by the caller; its entropy is the caller's responsibility");
          break;
        case SeedKind::BoundedRange: {
          const double bits = effective_entropy_bits(source);
          if (bits < ruleset.min_seed_entropy_bits) {
            std::ostringstream detail;
            detail.precision(4);
            detail << "seed range carries " << bits << " bits, below the "
                   << ruleset.min_seed_entropy_bits << "-bit floor";
            emit(Rule::LowSeedEntropy, f.id, Severity::Warning, detail.str());
          }
          break;
        }
        case SeedKind::OsEntropy:
          break;
      }
    }

    if (f.declared_distribution) {
      const auto it = ruleset.expected_distributions.find(f.id);
      if (it != ruleset.expected_distributions.end() && it->second != *f.declared_distribution) {
        emit(Rule::UnexpectedDistribution, f.id, Severity::Warning,
             "declares " + to_string(*f.declared_distribution) + ", expected " +
                 to_string(it->second));
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const PolicyViolation& a, const PolicyViolation& b) {
    return std::tie(a.function_id, a.rule) < std::tie(b.function_id, b.rule);
  });
  return out;
}

std::string_view to_string(Directive directive) noexcept {
  return directive == Directive::ReseedFromOsEntropy ? "ReseedFromOsEntropy" : "ReplaceWithCsprng";
}

Json remediation_to_json(const Remediation& r) {
  return Json{{"function_id", r.function_id}, {"directive", std::string(to_string(r.directive))}};
}

std::vector<Remediation> remediation_plan(std::span<const PolicyViolation> violations) {
  std::map<std::string, Directive> chosen;
  for (const auto& v : violations) {
    std::optional<Directive> directive;
    switch (v.rule) {
      case Rule::InsecureSeedSource:
      case Rule::LowSeedEntropy:
        directive = Directive::ReseedFromOsEntropy;
        break;
      case Rule::NonCsprngInDpContext:
        directive = Directive::ReplaceWithCsprng;
        break;
      case Rule::UnexpectedDistribution:
      case Rule::UnreachableGeneratorFacts:
        break;
    }
    if (!directive) continue;
    auto [it, inserted] = chosen.emplace(v.function_id, *directive);
    if (!inserted && *directive == Directive::ReplaceWithCsprng) it->second = *directive;
  }
  std::vector<Remediation> plan;
  for (const auto& [id, directive] : chosen) plan.push_back({id, directive});
  return plan;
}

RandomnessManifest apply_remediation(RandomnessManifest manifest,
                                     std::span<const Remediation> plan) {
  for (const auto& r : plan) {
    auto it = std::find_if(manifest.functions.begin(), manifest.functions.end(),
                           [&](const FunctionFact& f) { return f.id == r.function_id; });
    if (it == manifest.functions.end()) {
      throw Error(Errc::UnknownSlot, "no function '" + r.function_id + "' in manifest");
    }
    if (r.directive == Directive::ReplaceWithCsprng) {
      it->generator = GeneratorFact{Algorithm::CsprngCtr, OsEntropy{}};
    } else if (it->generator) {
      it->generator->seed_source = OsEntropy{};
    } else {
      it->generator = GeneratorFact{Algorithm::MT19937, OsEntropy{}};
    }
  }
  return manifest;
}

}  // namespace rngsentinel
