#include "rngsentinel/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>

#include "rngsentinel/attacks.hpp"
#include "rngsentinel/auditor.hpp"
#include "rngsentinel/bench.hpp"
#include "rngsentinel/error.hpp"
#include "rngsentinel/json_io.hpp"
#include "rngsentinel/policy.hpp"
#include "rngsentinel/stats.hpp"
#include "rngsentinel/transforms.hpp"

namespace rngsentinel::cli {

namespace {

// Opened input: either the caller's stream or a file we own.
class Input {
 public:
  Input(const std::string& path, std::istream& fallback, bool binary) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_ = std::make_unique<std::ifstream>(path, binary ? std::ios::binary : std::ios::in);
    if (!*file_) throw Error(Errc::InvalidArgument, "cannot open '" + path + "'");
    stream_ = file_.get();
  }
  std::istream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ifstream> file_;
  std::istream* stream_ = nullptr;
};

Json read_json(const std::string& path, std::istream& fallback) {
  Input input(path, fallback, false);
  try {
    return Json::parse(input.get());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

double default_threshold() {
  const char* env = std::getenv("RNG_SENTINEL_THRESHOLD");
  if (env == nullptr || *env == '\0') return kDefaultWarnThreshold;
  double v = 0.0;
  const std::string_view s(env);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !(v > 0.0 && v < 1.0)) {
    throw Error(Errc::InvalidConfig, "RNG_SENTINEL_THRESHOLD must be a number in (0, 1)");
  }
  return v;
}

std::optional<TestKind> parse_test_kind(std::string_view name) {
  for (auto k : {TestKind::Z, TestKind::KS, TestKind::ChiSquare, TestKind::MonoBit}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditArgs {
  std::string input;
  bool raw = false;
  bool text = false;
  std::string spec;
  std::string mode = "blocking";
  std::uint64_t stride = 10;
  std::size_t batch_size = 100;
  std::optional<double> threshold;
  std::string test;
  bool monobit = false;
  bool strict = false;
};

// Pulls the next raw word or text value; nullopt at clean end of input.
class SampleReader {
 public:
  SampleReader(std::istream& in, bool raw) : in_(in), raw_(raw) {}

  std::optional<std::uint64_t> next_word() {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), sizeof buf);
    const auto got = in_.gcount();
    if (got == 0) return std::nullopt;
    if (got != 8) throw Error(Errc::ParseError, "raw input length is not a multiple of 8 bytes");
    std::uint64_t w = 0;
    for (int i = 7; i >= 0; --i) w = (w << 8) | buf[i];
    ++position_;
    return w;
  }

  std::optional<double> next_value() {
    std::string line;
    while (std::getline(in_, line)) {
      ++position_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      const char* b = line.data() + first;
      const char* e = line.data() + last + 1;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (ec != std::errc{} || ptr != e || !std::isfinite(v)) {
        throw Error(Errc::ParseError, "line " + std::to_string(position_) + ": '" +
                                          std::string(b, e) + "' is not a finite number");
      }
      return v;
    }
    return std::nullopt;
  }

  bool raw() const noexcept { return raw_; }

 private:
  std::istream& in_;
  bool raw_;
  std::uint64_t position_ = 0;
};

int audit_monobit(const AuditArgs& a, double threshold, SampleReader& reader,
                  const std::string& tag, std::ostream& out, std::ostream& err) {
  if (!reader.raw()) throw Error(Errc::InvalidConfig, "--monobit needs --raw input");
  std::size_t reports = 0;
  std::size_t warns = 0;
  std::uint64_t index = 0;
  std::vector<std::uint64_t> batch;
  batch.reserve(a.batch_size);
  bool more = true;
  while (more) {
    const auto w = reader.next_word();
    if (w) batch.push_back(*w);
    more = w.has_value();
    if (batch.size() == a.batch_size) {
      ++index;
      const bool audited = a.mode != "rasn" || index % a.stride == 0;
      if (audited) {
        AuditReport r{tag, index, monobit_test_words(batch, threshold)};
        out << report_record(r).dump() << '\n';
        ++reports;
        warns += r.report.verdict == Verdict::Warn;
      }
      batch.clear();
    }
  }
  err << "audited " << reports << " batches, " << warns << " warn\n";
  return a.strict && warns > 0 ? kExitFindings : kExitClean;
}

int cmd_audit(const AuditArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  const double threshold = a.threshold ? *a.threshold : default_threshold();
  Input input(a.input, in, a.raw);
  SampleReader reader(input.get(), a.raw);
  const std::string tag = a.input.empty() || a.input == "-" ? "stdin" : a.input;
  const auto mode = parse_audit_mode(a.mode);
  if (!mode) throw Error(Errc::InvalidConfig, "unknown mode '" + a.mode + "'");

  if (a.monobit) {
    if (a.stride < 1) throw Error(Errc::InvalidConfig, "stride must be at least 1");
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw Error(Errc::InvalidConfig, "threshold must be in (0, 1)");
    }
    if (a.batch_size * 64 < kMonoBitMinBits || a.batch_size == 0) {
      throw Error(Errc::InvalidConfig, "batch too small for MonoBit");
    }
    return audit_monobit(a, threshold, reader, tag, out, err);
  }
  if (a.spec.empty()) throw Error(Errc::InvalidConfig, "--spec is required unless --monobit");
  const auto spec = parse_distribution(a.spec);

  AuditorConfig config;
  config.mode = *mode;
  config.stride = a.stride;
  config.batch_size = a.batch_size;
  config.warn_threshold = threshold;
  if (!a.test.empty()) {
    const auto kind = parse_test_kind(a.test);
    if (!kind) throw Error(Errc::InvalidConfig, "unknown test '" + a.test + "'");
    (is_continuous(spec) ? config.continuous_test : config.discrete_test) = *kind;
  }

  config.validate_for(spec);
  AuditLog log(out);
  Auditor auditor(config, &log);
  std::vector<double> batch;
  batch.reserve(config.batch_size);
  std::uint64_t index = 0;
  std::vector<std::future<AuditReport>> pending;
  Sampler transform(spec);

  auto flush = [&] {
    ++index;
    if (config.mode != AuditMode::RASN || index % config.stride == 0) {
      auto f = auditor.submit(AuditEvent{tag, spec, std::move(batch), index});
      if (config.mode == AuditMode::Blocking) f.get();
      else pending.push_back(std::move(f));
    }
    batch = {};
    batch.reserve(config.batch_size);
  };

  try {
    for (;;) {
      std::optional<double> x;
      if (reader.raw()) {
        bool exhausted = false;
        auto next = [&]() -> std::uint64_t {
          const auto w = reader.next_word();
          if (!w) {
            exhausted = true;
            return 0;
          }
          return *w;
        };
        const double v = transform.draw_from(next);
        if (!exhausted) x = v;
      } else {
        x = reader.next_value();
      }
      if (!x) break;
      batch.push_back(*x);
      if (batch.size() == config.batch_size) flush();
    }
  } catch (...) {
    auditor.stop();
    throw;
  }
  auditor.stop();

  for (auto& f : pending) f.get();
  std::size_t reports = 0;
  std::size_t warns = 0;
  for (const auto& rec : log.records()) {
    ++reports;
    warns += rec.value("verdict", "") == "warn";
  }
  err << "audited " << reports << " batches, " << warns << " warn";
  if (!batch.empty()) err << ", " << batch.size() << " trailing samples not audited";
  err << '\n';
  return a.strict && warns > 0 ? kExitFindings : kExitClean;
}

// ---------------------------------------------------------------------------
// policy
// ---------------------------------------------------------------------------

struct PolicyArgs {
  std::string manifest;
  std::string ruleset;
  bool strict = false;
  bool remediate = false;
};

int cmd_policy(const PolicyArgs& a, std::istream& in, std::ostream& out, std::ostream&) {
  const auto manifest = manifest_from_json(read_json(a.manifest, in));
  const Ruleset rules = a.ruleset.empty() ? Ruleset::defaults()
                                          : ruleset_from_json(read_json(a.ruleset, in));
  const auto violations = evaluate_policies(manifest, rules);
  std::size_t errors = 0;
  Json vj = Json::array();
  for (const auto& v : violations) {
    vj.push_back(violation_to_json(v));
    errors += v.severity == Severity::Error;
  }
  Json doc{{"violations", vj},
           {"errors", errors},
           {"warnings", violations.size() - errors},
           {"closure", transitive_rng_closure(manifest)}};
  if (a.remediate) {
    Json plan = Json::array();
    for (const auto& r : remediation_plan(violations)) plan.push_back(remediation_to_json(r));
    doc["remediation"] = plan;
  }
  out << doc.dump() << '\n';
  return a.strict && errors > 0 ? kExitFindings : kExitClean;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& path, bool strict, std::istream& in, std::ostream& out,
                 std::ostream&) {
  const auto scenario = scenario_from_json(read_json(path, in));
  bool detected = false;
  for (const auto& record : run_scenario(scenario)) {
    out << record.dump() << '\n';
    if (record.value("phase", "") == "outcome") {
      detected = record.value("detected", false) || record.value("seed_recovered", false);
    }
  }
  return strict && detected ? kExitFindings : kExitClean;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(BenchConfig config, const std::string& modes, std::ostream& out) {
  if (!modes.empty()) {
    config.modes.clear();
    std::string_view rest = modes;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto name = rest.substr(0, comma);
      const auto m = parse_bench_mode(name);
      if (!m) throw Error(Errc::InvalidConfig, "unknown bench mode '" + std::string(name) + "'");
      config.modes.push_back(*m);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  out << bench_to_json(config, run_bench(config)).dump() << '\n';
  return kExitClean;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string algorithm = "mt19937";
  std::optional<std::uint64_t> seed;
  std::string seed_source;
  std::string spec = "uniform:0,1";
  std::uint64_t count = 0;
  bool raw = false;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const auto algorithm = parse_algorithm(a.algorithm);
  if (!algorithm) throw Error(Errc::InvalidArgument, "unknown algorithm '" + a.algorithm + "'");
  if (a.seed && !a.seed_source.empty()) {
    throw Error(Errc::InvalidArgument, "--seed and --seed-source are mutually exclusive");
  }
  const auto spec = parse_distribution(a.spec);
  auto gen = a.seed ? GeneratorHandle::from_seed(*algorithm, *a.seed)
                    : GeneratorHandle::create(*algorithm, a.seed_source.empty()
                                                              ? SeedSource{OsEntropy{}}
                                                              : parse_seed_source(a.seed_source));
  Sampler sampler(spec);
  if (a.raw) {
    // The words that drawing `count` samples consumes, so an audit of this
    // stream under the same spec sees the same samples.
    auto emit = [&] {
      const std::uint64_t w = gen.next_u64();
      char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((w >> (8 * i)) & 0xff);
      out.write(buf, sizeof buf);
      return w;
    };
    for (std::uint64_t i = 0; i < a.count; ++i) sampler.draw_from(emit);
  } else {
    out << std::setprecision(17);
    for (std::uint64_t i = 0; i < a.count; ++i) out << sampler.draw(gen) << '\n';
  }
  out.flush();
  return kExitClean;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Randomness auditing for ML pipelines", "rngsentinel"};
  app.require_subcommand(1);

  AuditArgs audit;
  auto* audit_cmd = app.add_subcommand("audit", "Batch a sample stream and test each batch");
  audit_cmd->add_option("-i,--input", audit.input, "Input file, '-' for stdin");
  auto* raw_flag = audit_cmd->add_flag("--raw", audit.raw, "Little-endian 64-bit raw words");
  auto* text_flag = audit_cmd->add_flag("--text", audit.text, "One decimal value per line");
  raw_flag->excludes(text_flag);
  audit_cmd->add_option("--spec", audit.spec, "Declared distribution, e.g. normal:0,1");
  audit_cmd->add_option("--mode", audit.mode, "blocking, asn or rasn")->capture_default_str();
  audit_cmd->add_option("--stride", audit.stride, "RASN stride")->capture_default_str();
  audit_cmd->add_option("--batch-size", audit.batch_size)->capture_default_str();
  audit_cmd->add_option("--threshold", audit.threshold, "Warn below this p-value");
  audit_cmd->add_option("--test", audit.test, "ks, z or chi_square");
  audit_cmd->add_flag("--monobit", audit.monobit, "MonoBit over raw words instead of a spec");
  audit_cmd->add_flag("--strict", audit.strict, "Exit 1 when any batch warns");

  PolicyArgs policy;
  auto* policy_cmd = app.add_subcommand("policy", "Evaluate policies over a manifest");
  policy_cmd->add_option("manifest", policy.manifest, "Manifest JSON, '-' for stdin")->required();
  policy_cmd->add_option("--ruleset", policy.ruleset, "Ruleset JSON");
  policy_cmd->add_flag("--strict", policy.strict, "Exit 1 on any Error violation");
  policy_cmd->add_flag("--remediate", policy.remediate, "Include the remediation plan");

  std::string scenario;
  bool simulate_strict = false;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run an attack scenario");
  simulate_cmd->add_option("scenario", scenario, "Scenario JSON, '-' for stdin")->required();
  simulate_cmd->add_flag("--strict", simulate_strict, "Exit 1 when the attack is detected");

  BenchConfig bench;
  std::string bench_modes;
  auto* bench_cmd = app.add_subcommand("bench", "Time the enforcement modes");
  bench_cmd->add_option("--batches", bench.batches)->capture_default_str();
  bench_cmd->add_option("--batch-size", bench.batch_size)->capture_default_str();
  bench_cmd->add_option("--runs", bench.runs)->capture_default_str();
  bench_cmd->add_option("--stride", bench.stride)->capture_default_str();
  bench_cmd->add_option("--modes", bench_modes, "Comma-separated subset");

  GenerateArgs gen;
  bool gen_text = false;
  auto* gen_cmd = app.add_subcommand("generate", "Emit samples from a generator");
  gen_cmd->add_option("--algorithm", gen.algorithm, "mt19937, philox, lcg or csprng")
      ->capture_default_str();
  auto* seed_opt = gen_cmd->add_option("--seed", gen.seed, "Concrete seed");
  auto* source_opt = gen_cmd->add_option("--seed-source", gen.seed_source,
                                         "os, time[:res], constant:V, range:lo,hi, user:V");
  seed_opt->excludes(source_opt);
  gen_cmd->add_option("--spec", gen.spec)->capture_default_str();
  gen_cmd->add_option("--count", gen.count)->required();
  auto* graw = gen_cmd->add_flag("--raw", gen.raw, "Raw words consumed by the draws");
  auto* gtext = gen_cmd->add_flag("--text", gen_text, "One value per line (default)");
  graw->excludes(gtext);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitClean : kExitUsage;
  }

  try {
    if (*audit_cmd) return cmd_audit(audit, in, out, err);
    if (*policy_cmd) return cmd_policy(policy, in, out, err);
    if (*simulate_cmd) return cmd_simulate(scenario, simulate_strict, in, out, err);
    if (*bench_cmd) return cmd_bench(bench, bench_modes, out);
    if (*gen_cmd) return cmd_generate(gen, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace rngsentinel::cli
