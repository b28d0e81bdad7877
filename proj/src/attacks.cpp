#include "rngsentinel/attacks.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "rngsentinel/error.hpp"
#include "rngsentinel/policy.hpp"
#include "rngsentinel/transforms.hpp"

namespace rngsentinel {

double entropy_bits(double window_s, std::int64_t resolution_us) {
  if (!(window_s > 0.0) || !std::isfinite(window_s)) {
    throw Error(Errc::InvalidWindow, "window must be a positive number of seconds");
  }
  if (resolution_us < 1) throw Error(Errc::InvalidWindow, "clock resolution must be >= 1 us");
  return std::log2(window_s * 1e6 / static_cast<double>(resolution_us));
}

SeedCandidates time_window_candidates(std::int64_t window_start_us, double window_s,
                                      std::int64_t resolution_us) {
  entropy_bits(window_s, resolution_us);  // validates
  const auto first = window_start_us - window_start_us % resolution_us;
  const auto span_us = static_cast<std::uint64_t>(std::ceil(window_s * 1e6));
  const auto step = static_cast<std::uint64_t>(resolution_us);
  return {static_cast<std::uint64_t>(first), (span_us + step - 1) / step, step};
}

// ---------------------------------------------------------------------------
// Seed search
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxObservedWords = 64;

// Scans candidates in order and calls `on_match(seed)` for each one whose
// generator reproduces `observed`; stops as soon as on_match returns true.
template <typename SeedAt, typename OnMatch>
void scan_seeds(std::span<const std::uint64_t> observed, Algorithm algorithm, std::uint64_t count,
                SeedAt seed_at, OnMatch on_match) {
  if (observed.empty()) throw Error(Errc::InvalidArgument, "need at least one observed word");
  if (observed.size() > kMaxObservedWords) {
    throw Error(Errc::InvalidArgument, "at most 64 observed words are supported");
  }
  switch (algorithm) {
    case Algorithm::MT19937: {
      // Eight independent seeding chains at a time; the 397-step init
      // recurrence is latency bound, so interleaving lanes is what pays.
      constexpr std::size_t kLanes = 8;
      const std::size_t k32 = observed.size() * 2;
      const std::size_t needed = k32 + Mt19937::kShift;
      std::array<std::array<std::uint32_t, kLanes>, kMaxObservedWords * 2 + 1> head{};
      std::array<std::array<std::uint32_t, kLanes>, kMaxObservedWords * 2> far{};
      std::array<std::uint64_t, kLanes> seeds{};
      for (std::uint64_t base = 0; base < count; base += kLanes) {
        const std::size_t lanes = static_cast<std::size_t>(std::min<std::uint64_t>(kLanes, count - base));
        std::array<std::uint32_t, kLanes> cur{};
        for (std::size_t l = 0; l < kLanes; ++l) {
          seeds[l] = seed_at(base + std::min(l, lanes - 1));
          cur[l] = static_cast<std::uint32_t>(seeds[l]);
        }
        head[0] = cur;
        for (std::uint32_t i = 1; i < needed; ++i) {
          for (std::size_t l = 0; l < kLanes; ++l) {
            cur[l] = 1812433253U * (cur[l] ^ (cur[l] >> 30)) + i;
          }
          if (i <= k32) head[i] = cur;
          if (i >= Mt19937::kShift) far[i - Mt19937::kShift] = cur;
        }
        for (std::size_t l = 0; l < lanes; ++l) {
          bool match = true;
          for (std::size_t w = 0; w < observed.size() && match; ++w) {
            std::uint64_t word = 0;
            for (std::size_t half = 0; half < 2; ++half) {
              const std::size_t j = 2 * w + half;
              std::uint32_t y = (head[j][l] & 0x80000000U) | (head[j + 1][l] & 0x7fffffffU);
              y = far[j][l] ^ (y >> 1) ^ ((y & 1U) ? 0x9908b0dfU : 0U);
              y ^= y >> 11;
              y ^= (y << 7) & 0x9d2c5680U;
              y ^= (y << 15) & 0xefc60000U;
              y ^= y >> 18;
              word |= std::uint64_t{y} << (32 * half);
            }
            match = word == observed[w];
          }
          if (match && on_match(seeds[l])) return;
        }
      }
      return;
    }
    case Algorithm::PhiloxCounter:
    case Algorithm::WeakLCG:
      for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t seed = seed_at(i);
        bool match = true;
        if (algorithm == Algorithm::PhiloxCounter) {
          for (std::size_t w = 0; w < observed.size() && match; ++w) {
            match = PhiloxCounter::at(seed, w) == observed[w];
          }
        } else {
          WeakLcg lcg(seed);
          for (std::size_t w = 0; w < observed.size() && match; ++w) match = lcg.next() == observed[w];
        }
        if (match && on_match(seed)) return;
      }
      return;
    case Algorithm::CsprngCtr:
      break;
  }
  throw Error(Errc::InvalidArgument, "CsprngCtr keys are not derived from a searchable seed");
}

}  // namespace

std::optional<std::uint64_t> brute_force_seed(std::span<const std::uint64_t> observed,
                                              Algorithm algorithm,
                                              const SeedCandidates& candidates) {
  std::optional<std::uint64_t> found;
  scan_seeds(
      observed, algorithm, candidates.count,
      [&](std::uint64_t i) { return candidates.first + i * candidates.step; },
      [&](std::uint64_t seed) {
        found = seed;
        return true;
      });
  return found;
}

std::optional<std::uint64_t> brute_force_seed(std::span<const std::uint64_t> observed,
                                              Algorithm algorithm,
                                              std::span<const std::uint64_t> candidates) {
  std::optional<std::uint64_t> found;
  scan_seeds(
      observed, algorithm, candidates.size(), [&](std::uint64_t i) { return candidates[i]; },
      [&](std::uint64_t seed) {
        found = seed;
        return true;
      });
  return found;
}

std::uint64_t count_matching_seeds(std::span<const std::uint64_t> observed, Algorithm algorithm,
                                   const SeedCandidates& candidates) {
  std::uint64_t matches = 0;
  scan_seeds(
      observed, algorithm, candidates.count,
      [&](std::uint64_t i) { return candidates.first + i * candidates.step; },
      [&](std::uint64_t) {
        ++matches;
        return false;
      });
  return matches;
}

// ---------------------------------------------------------------------------
// Noise regeneration
// ---------------------------------------------------------------------------

std::vector<double> regenerate_noise(Algorithm algorithm, std::uint64_t seed,
                                     const DistributionSpec& noise_spec, std::size_t count,
                                     std::uint64_t skip_words) {
  if (!is_continuous(noise_spec)) {
    throw Error(Errc::SpecMismatch, "DP noise must be real-valued, got " + to_string(noise_spec));
  }
  auto gen = GeneratorHandle::from_seed(algorithm, seed);
  for (std::uint64_t i = 0; i < skip_words; ++i) gen.next_u64();
  Sampler sampler(noise_spec);
  std::vector<double> noise(count);
  for (auto& x : noise) x = sampler.draw(gen);
  return noise;
}

std::vector<double> denoise_dp_updates(std::span<const double> noisy, std::uint64_t recovered_seed,
                                       Algorithm algorithm, const DistributionSpec& noise_spec,
                                       std::uint64_t skip_words) {
  const auto noise = regenerate_noise(algorithm, recovered_seed, noise_spec, noisy.size(), skip_words);
  std::vector<double> clean(noisy.size());
  for (std::size_t i = 0; i < noisy.size(); ++i) clean[i] = noisy[i] - noise[i];
  return clean;
}

void substitute_transform(GeneratorRegistry& registry, std::string_view slot,
                          const DistributionSpec& actual) {
  registry.slot(slot).set_draw_spec(actual);
}

// ---------------------------------------------------------------------------
// Fixtures and experiments
// ---------------------------------------------------------------------------

std::vector<double> LinearRegressionFixture::gradients() const {
  auto gen = GeneratorHandle::from_seed(Algorithm::PhiloxCounter, data_seed);
  Sampler normal(Normal{0.0, 1.0});
  std::vector<double> x(examples * features);
  for (auto& v : x) v = normal.draw(gen);
  std::vector<double> true_w(features);
  for (auto& v : true_w) v = normal.draw(gen);
  std::vector<double> y(examples);
  for (std::size_t i = 0; i < examples; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < features; ++j) dot += x[i * features + j] * true_w[j];
    y[i] = dot + 0.1 * normal.draw(gen);
  }

  std::vector<double> w(features, 0.0);
  std::vector<double> out;
  out.reserve(rounds * features);
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> grad(features, 0.0);
    for (std::size_t i = 0; i < examples; ++i) {
      double residual = -y[i];
      for (std::size_t j = 0; j < features; ++j) residual += x[i * features + j] * w[j];
      for (std::size_t j = 0; j < features; ++j) grad[j] += 2.0 * residual * x[i * features + j];
    }
    for (std::size_t j = 0; j < features; ++j) {
      grad[j] /= static_cast<double>(examples);
      w[j] -= learning_rate * grad[j];
      out.push_back(grad[j]);
    }
  }
  return out;
}

KillChainResult run_seed_kill_chain(const TimeWindowSeedAttack& attack,
                                    const LinearRegressionFixture& fixture,
                                    std::size_t observed_words) {
  KillChainResult result;
  result.entropy_bits = entropy_bits(attack);
  const Normal noise_spec{0.0, attack.noise_sigma};

  // Victim side.
  SeedEnvironment server_clock;
  server_clock.clock_us = [t = attack.server_start_us] { return t; };
  auto server = GeneratorHandle::create(attack.algorithm, SystemTime{attack.resolution_us},
                                        server_clock);
  result.true_seed = *server.seed();
  std::vector<std::uint64_t> published(observed_words);
  for (auto& w : published) w = server.next_u64();
  const auto gradients = fixture.gradients();
  Sampler noise(noise_spec);
  std::vector<double> noisy(gradients.size());
  for (std::size_t i = 0; i < gradients.size(); ++i) noisy[i] = gradients[i] + noise.draw(server);

  // Attacker side.
  const auto candidates =
      time_window_candidates(attack.window_start_us, attack.window_s, attack.resolution_us);
  result.search_size = candidates.count;
  const auto start = std::chrono::steady_clock::now();
  result.recovered_seed = brute_force_seed(published, attack.algorithm, candidates);
  result.recovery_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.elements = gradients.size();
  if (!result.recovered_seed) {
    result.max_abs_error = std::numeric_limits<double>::infinity();
    return result;
  }
  const auto denoised = denoise_dp_updates(noisy, *result.recovered_seed, attack.algorithm,
                                           noise_spec, observed_words);
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    result.max_abs_error = std::max(result.max_abs_error, std::abs(denoised[i] - gradients[i]));
  }
  return result;
}

DetectionResult run_substitution_experiment(const DetectionConfig& config) {
  constexpr auto kDrainTimeout = std::chrono::minutes(5);
  const std::string slot = "target";
  Auditor auditor(config.auditor);
  GeneratorRegistry registry(&auditor);
  registry.add(slot, GeneratorHandle::from_seed(config.algorithm, config.seed), config.claimed);
  substitute_transform(registry, slot, config.actual);

  auto count_warns = [](const std::vector<AuditReport>& reports) {
    return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) {
      return r.report.verdict == Verdict::Warn;
    }));
  };

  DetectionResult result;
  auto& gen = registry.slot(slot);
  const std::size_t batch = config.auditor.batch_size;
  for (std::size_t i = 0; i < config.attack_batches * batch; ++i) gen.draw();
  const auto attack_reports = auditor.drain_reports(kDrainTimeout);
  result.attack_reports = attack_reports.size();
  result.attack_warns = count_warns(attack_reports);

  const Remediation directive{slot, Directive::ReplaceWithCsprng};
  result.rebinds = registry.enforce(std::span(&directive, 1));
  result.class_after = gen.inner().security_class();

  for (std::size_t i = 0; i < config.recovery_batches * batch; ++i) gen.draw();
  const auto recovery_reports = auditor.drain_reports(kDrainTimeout);
  result.recovery_reports = recovery_reports.size();
  result.recovery_warns = count_warns(recovery_reports);
  auditor.stop();
  return result;
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

namespace {

Algorithm algorithm_field(const Json& j, Algorithm fallback) {
  if (!j.contains("algorithm")) return fallback;
  const auto name = required<std::string>(j, "algorithm");
  const auto algorithm = parse_algorithm(name);
  if (!algorithm) throw Error(Errc::ParseError, "unknown algorithm '" + name + "'");
  return *algorithm;
}

}  // namespace

AttackScenario scenario_from_json(const Json& j) {
  AttackScenario scenario;
  const auto kind = required<std::string>(j, "kind");
  scenario.target_slot = j.value("target_slot", scenario.target_slot);
  scenario.batches = j.value("batches", scenario.batches);
  scenario.seed = j.value("seed", scenario.seed);
  if (kind == "constant_seed") {
    scenario.kind = ConstantSeedAttack{j.value("value", std::uint64_t{0}),
                                       algorithm_field(j, Algorithm::MT19937)};
  } else if (kind == "time_window_seed") {
    TimeWindowSeedAttack a;
    a.window_s = j.value("window_s", a.window_s);
    a.resolution_us = j.value("resolution_us", a.resolution_us);
    a.server_start_us = j.value("server_start_us", a.server_start_us);
    a.window_start_us = j.value("window_start_us", a.window_start_us);
    a.noise_sigma = j.value("noise_sigma", a.noise_sigma);
    a.algorithm = algorithm_field(j, a.algorithm);
    entropy_bits(a);
    scenario.kind = a;
  } else if (kind == "transform_substitution") {
    scenario.kind = TransformSubstitutionAttack{distribution_from_json(j.at("claimed")),
                                                distribution_from_json(j.at("actual"))};
  } else if (kind == "biased_generator") {
    BiasedGeneratorAttack a;
    a.bias = j.value("bias", a.bias);
    if (j.contains("claimed")) {
      const auto claimed = distribution_from_json(j.at("claimed"));
      if (!std::holds_alternative<Normal>(claimed)) {
        throw Error(Errc::SpecMismatch, "biased_generator needs a normal claimed spec");
      }
      a.claimed = std::get<Normal>(claimed);
    }
    scenario.kind = a;
  } else {
    throw Error(Errc::ParseError, "unknown scenario kind '" + kind + "'");
  }
  return scenario;
}

namespace {

Json detection_transcript(const std::string& slot, const DetectionConfig& config,
                          std::vector<Json>& out) {
  const auto result = run_substitution_experiment(config);
  const bool substituted = config.actual != config.claimed;
  out.push_back(Json{{"phase", "attack"},
                     {"slot", slot},
                     {"claimed", distribution_to_json(config.claimed)},
                     {"actual", distribution_to_json(config.actual)},
                     {"test", std::string(to_string(is_continuous(config.claimed)
                                                        ? config.auditor.continuous_test
                                                        : config.auditor.discrete_test))},
                     {"reports", result.attack_reports},
                     {"warns", result.attack_warns},
                     {"warn_rate", result.attack_warn_rate()}});
  out.push_back(Json{{"phase", "enforce"},
                     {"slot", slot},
                     {"directive", "ReplaceWithCsprng"},
                     {"security_class", std::string(to_string(result.class_after))}});
  out.push_back(Json{{"phase", "post_enforce"},
                     {"slot", slot},
                     {"reports", result.recovery_reports},
                     {"warns", result.recovery_warns},
                     {"warn_rate", result.recovery_warn_rate()},
                     {"verdict", result.recovery_warn_rate() <= 0.014 ? "pass" : "warn"}});
  // A substitution counts as detected when its warn rate clears the honest
  // calibration band.
  const bool detected = result.attack_warn_rate() > 0.014;
  Json outcome{{"phase", "outcome"}, {"substituted", substituted}, {"detected", detected}};
  outcome["result"] = detected ? "violation detected" : "no violation";
  return outcome;
}

}  // namespace

std::vector<Json> run_scenario(const AttackScenario& scenario) {
  std::vector<Json> out;
  const auto& slot = scenario.target_slot;

  if (const auto* a = std::get_if<ConstantSeedAttack>(&scenario.kind)) {
    RandomnessManifest manifest;
    manifest.functions.push_back({slot, std::nullopt, GeneratorFact{a->algorithm, ConstantSeed{a->value}},
                                  GeneralContext{}});
    manifest.core_rng_ids.push_back(slot);
    const auto violations = evaluate_policies(manifest);
    Json vj = Json::array();
    for (const auto& v : violations) vj.push_back(violation_to_json(v));
    out.push_back(Json{{"phase", "policy"}, {"slot", slot}, {"draws_before", 0}, {"violations", vj}});

    // Anyone who knows the constant reproduces the victim stream.
    auto victim = GeneratorHandle::from_seed(a->algorithm, a->value, ConstantSeed{a->value});
    auto attacker = GeneratorHandle::from_seed(a->algorithm, a->value);
    bool predicted = true;
    for (int i = 0; i < 16; ++i) predicted = predicted && victim.next_u64() == attacker.next_u64();
    out.push_back(Json{{"phase", "exploit"}, {"predicted_words", 16}, {"prediction_matches", predicted}});

    const auto plan = remediation_plan(violations);
    const auto after = evaluate_policies(apply_remediation(manifest, plan));
    Json pj = Json::array();
    for (const auto& r : plan) pj.push_back(remediation_to_json(r));
    out.push_back(Json{{"phase", "enforce"}, {"plan", pj}, {"violations_after", after.size()}});
    const bool flagged = std::any_of(violations.begin(), violations.end(), [](const auto& v) {
      return v.rule == Rule::InsecureSeedSource && v.severity == Severity::Error;
    });
    out.push_back(Json{{"phase", "outcome"},
                       {"detected", flagged},
                       {"result", flagged ? "violation detected" : "no violation"}});
    return out;
  }

  if (const auto* a = std::get_if<TimeWindowSeedAttack>(&scenario.kind)) {
    const auto result = run_seed_kill_chain(*a);
    out.push_back(Json{{"phase", "window"},
                       {"window_s", a->window_s},
                       {"resolution_us", a->resolution_us},
                       {"entropy_bits", result.entropy_bits},
                       {"search_size", result.search_size}});
    out.push_back(Json{{"phase", "brute_force"},
                       {"algorithm", std::string(to_string(a->algorithm))},
                       {"recovered_seed", result.recovered_seed ? Json(*result.recovered_seed) : Json()},
                       {"true_seed", result.true_seed},
                       {"recovery_seconds", result.recovery_seconds}});
    const bool recovered = result.recovered_seed == result.true_seed;
    out.push_back(Json{{"phase", "denoise"},
                       {"elements", result.elements},
                       {"max_abs_error", recovered ? Json(result.max_abs_error) : Json()}});
    out.push_back(Json{{"phase", "outcome"},
                       {"seed_recovered", recovered},
                       {"result", recovered ? "gradients recovered" : "seed not found"}});
    return out;
  }

  DetectionConfig config;
  config.attack_batches = scenario.batches;
  config.recovery_batches = scenario.batches;
  config.seed = scenario.seed;
  config.auditor.mode = AuditMode::ASN;
  if (const auto* a = std::get_if<TransformSubstitutionAttack>(&scenario.kind)) {
    config.claimed = a->claimed;
    config.actual = a->actual;
  } else {
    const auto& b = std::get<BiasedGeneratorAttack>(scenario.kind);
    config.claimed = b.claimed;
    config.actual = Normal{b.claimed.mu + b.bias * b.claimed.sigma, b.claimed.sigma};
    config.auditor.continuous_test = TestKind::Z;
  }
  out.push_back(detection_transcript(slot, config, out));
  return out;
}

}  // namespace rngsentinel
