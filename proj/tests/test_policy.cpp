#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rngsentinel/error.hpp"
#include "rngsentinel/policy.hpp"

using namespace rngsentinel;

namespace {

Json load(const std::string& name) {
  std::ifstream in(std::string(RNGSENTINEL_TEST_DATA) + "/" + name);
  REQUIRE(in);
  return Json::parse(in);
}

FunctionFact fn(std::string id, std::optional<GeneratorFact> gen = std::nullopt,
                FunctionContext ctx = GeneralContext{}) {
  return FunctionFact{std::move(id), std::nullopt, std::move(gen), ctx};
}

// Reachability by depth-first search from every function separately.
std::set<std::string> closure_oracle(const RandomnessManifest& m) {
  std::set<std::string> core(m.core_rng_ids.begin(), m.core_rng_ids.end());
  std::set<std::string> out;
  for (const auto& f : m.functions) {
    std::set<std::string> seen;
    std::vector<std::string> stack{f.id};
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      for (const auto& e : m.edges) {
        if (e.caller == cur) stack.push_back(e.callee);
      }
    }
    for (const auto& s : seen) {
      if (core.contains(s)) {
        out.insert(f.id);
        break;
      }
    }
  }
  return out;
}

std::vector<std::pair<std::string, Rule>> keys(const std::vector<PolicyViolation>& vs) {
  std::vector<std::pair<std::string, Rule>> out;
  for (const auto& v : vs) out.emplace_back(v.function_id, v.rule);
  return out;
}

}  // namespace

TEST_CASE("golden manifest") {
  const auto m = manifest_from_json(load("golden_manifest.json"));
  const auto vs = evaluate_policies(m);
  REQUIRE(vs.size() == 3);
  CHECK(vs[0].function_id == "dp_noise");
  CHECK(vs[0].rule == Rule::NonCsprngInDpContext);
  CHECK(vs[0].severity == Severity::Error);
  CHECK(vs[1].function_id == "init_weights");
  CHECK(vs[1].rule == Rule::InsecureSeedSource);
  CHECK(vs[1].severity == Severity::Error);
  CHECK(vs[2].function_id == "keras_init");
  CHECK(vs[2].rule == Rule::LowSeedEntropy);
  CHECK(vs[2].severity == Severity::Warning);

  const auto plan = remediation_plan(vs);
  CHECK(plan == std::vector<Remediation>{{"dp_noise", Directive::ReplaceWithCsprng},
                                         {"init_weights", Directive::ReseedFromOsEntropy},
                                         {"keras_init", Directive::ReseedFromOsEntropy}});
  CHECK(evaluate_policies(apply_remediation(m, plan)).empty());
}

TEST_CASE("clean manifest") {
  CHECK(evaluate_policies(manifest_from_json(load("clean_manifest.json"))).empty());
  CHECK(evaluate_policies(RandomnessManifest{}).empty());
}

TEST_CASE("seed rules") {
  RandomnessManifest m;
  m.functions = {fn("a", GeneratorFact{Algorithm::MT19937, ConstantSeed{42}}),
                 fn("b", GeneratorFact{Algorithm::MT19937, SystemTime{1000}}),
                 fn("c", GeneratorFact{Algorithm::PhiloxCounter, BoundedRange{0, 1ULL << 32}}),
                 fn("d", GeneratorFact{Algorithm::PhiloxCounter, BoundedRange{0, (1ULL << 32) - 1}}),
                 fn("e", GeneratorFact{Algorithm::PhiloxCounter, UserProvided{7}})};
  m.core_rng_ids = {"a", "b", "c", "d", "e"};
  const auto vs = evaluate_policies(m);
  using P = std::pair<std::string, Rule>;
  CHECK(keys(vs) == std::vector<P>{{"a", Rule::InsecureSeedSource},
                                   {"b", Rule::InsecureSeedSource},
                                   {"d", Rule::LowSeedEntropy},
                                   {"e", Rule::InsecureSeedSource}});
  CHECK(vs[3].severity == Severity::Warning);

  Ruleset strict;
  strict.min_seed_entropy_bits = 40;
  CHECK(keys(evaluate_policies(m, strict)).size() == 5);
}

TEST_CASE("dp context rules") {
  RandomnessManifest m;
  m.functions = {fn("host_default", std::nullopt, DifferentialPrivacy{1.0, 0.0}),
                 fn("philox", GeneratorFact{Algorithm::PhiloxCounter, OsEntropy{}},
                    DifferentialPrivacy{1.0, 0.0}),
                 fn("secure", GeneratorFact{Algorithm::CsprngCtr, OsEntropy{}},
                    DifferentialPrivacy{1.0, 0.0})};
  m.core_rng_ids = {"host_default", "philox", "secure"};
  const auto vs = evaluate_policies(m);
  REQUIRE(vs.size() == 2);
  CHECK(vs[0].function_id == "host_default");
  CHECK(vs[1].function_id == "philox");
  for (const auto& v : vs) CHECK(v.rule == Rule::NonCsprngInDpContext);
}

TEST_CASE("dp plus weak seed remediates to a single replacement") {
  RandomnessManifest m;
  m.functions = {fn("f", GeneratorFact{Algorithm::MT19937, SystemTime{1}}, DifferentialPrivacy{})};
  m.core_rng_ids = {"f"};
  const auto vs = evaluate_policies(m);
  CHECK(vs.size() == 2);
  CHECK(remediation_plan(vs) == std::vector<Remediation>{{"f", Directive::ReplaceWithCsprng}});
}

TEST_CASE("unexpected distribution") {
  RandomnessManifest m;
  m.functions = {FunctionFact{"torch.randn", UniformReal{0, 1}, std::nullopt, GeneralContext{}},
                 FunctionFact{"torch.rand", UniformReal{0, 1}, std::nullopt, GeneralContext{}}};
  m.core_rng_ids = {"torch.randn", "torch.rand"};
  const auto vs = evaluate_policies(m);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].rule == Rule::UnexpectedDistribution);
  CHECK(vs[0].severity == Severity::Warning);
  CHECK(remediation_plan(vs).empty());

  const auto rules = ruleset_from_json(Json::parse(
      R"({"expected_distributions": {"torch.rand": "normal:0,1"}})"));
  CHECK(keys(evaluate_policies(m, rules)) ==
        std::vector<std::pair<std::string, Rule>>{{"torch.rand", Rule::UnexpectedDistribution}});
}

TEST_CASE("functions outside the closure") {
  RandomnessManifest m;
  m.functions = {fn("core"), fn("caller"),
                 fn("island", GeneratorFact{Algorithm::MT19937, ConstantSeed{1}}), fn("plain")};
  m.edges = {{"caller", "core"}, {"core", "plain"}};
  m.core_rng_ids = {"core"};
  CHECK(transitive_rng_closure(m) == std::set<std::string>{"caller", "core"});
  const auto vs = evaluate_policies(m);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].rule == Rule::UnreachableGeneratorFacts);
  CHECK(vs[0].severity == Severity::Warning);
}

TEST_CASE("closure handles cycles and matches a brute-force oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    RandomnessManifest m;
    const int n = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < n; ++i) m.functions.push_back(fn("f" + std::to_string(i)));
    const int edges = static_cast<int>(rng() % (2 * n + 1));
    for (int e = 0; e < edges; ++e) {
      m.edges.push_back({"f" + std::to_string(rng() % n), "f" + std::to_string(rng() % n)});
    }
    const int cores = static_cast<int>(rng() % 3);
    for (int c = 0; c < cores; ++c) m.core_rng_ids.push_back("f" + std::to_string(rng() % n));
    REQUIRE(transitive_rng_closure(m) == closure_oracle(m));
  }
}

TEST_CASE("malformed manifests") {
  auto code = [](const char* text) {
    try {
      manifest_from_json(Json::parse(text));
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code(R"([])") == Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"id":"a"},{"id":"a"}]})") == Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"id":"a"}],"edges":[["a","b"]]})") == Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"id":"a"}],"core_rng_ids":["b"]})") == Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"id":"a","generator":{"algorithm":"rc4","seed_source":"os_entropy"}}]})") ==
        Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"id":"a","context":{"kind":"dp","epsilon":-1}}]})") ==
        Errc::MalformedManifest);
  CHECK(code(R"({"functions":[{"nope":"a"}]})") == Errc::MalformedManifest);
}

TEST_CASE("manifest json round trip") {
  const auto m = manifest_from_json(load("golden_manifest.json"));
  const auto again = manifest_from_json(manifest_to_json(m));
  CHECK(again.functions == m.functions);
  CHECK(again.edges == m.edges);
  CHECK(again.core_rng_ids == m.core_rng_ids);
}

TEST_CASE("apply_remediation rejects unknown ids") {
  RandomnessManifest m;
  const Remediation r{"ghost", Directive::ReplaceWithCsprng};
  try {
    apply_remediation(m, std::span(&r, 1));
    FAIL("expected UnknownSlot");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownSlot);
  }
}

TEST_CASE("violation json") {
  const PolicyViolation v{Rule::LowSeedEntropy, "k", Severity::Warning, "d"};
  CHECK(violation_to_json(v).dump() ==
        R"({"detail":"d","function_id":"k","rule":"LowSeedEntropy","severity":"Warning"})");
}
