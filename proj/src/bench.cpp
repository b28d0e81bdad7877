#include "rngsentinel/bench.hpp"

#include <algorithm>
#include <chrono>

#include "rngsentinel/auditor.hpp"
#include "rngsentinel/error.hpp"

namespace rngsentinel {

std::string_view to_string(BenchMode mode) noexcept {
  switch (mode) {
    case BenchMode::Unwrapped: return "unwrapped";
    case BenchMode::Static: return "static";
    case BenchMode::Blocking: return "blocking";
    case BenchMode::ASN: return "asn";
    case BenchMode::RASN: return "rasn";
  }
  return "unknown";
}

std::optional<BenchMode> parse_bench_mode(std::string_view name) noexcept {
  for (auto m : {BenchMode::Unwrapped, BenchMode::Static, BenchMode::Blocking, BenchMode::ASN,
                 BenchMode::RASN}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

volatile double g_sink = 0.0;

struct Timed {
  double seconds = 0.0;
  double total_seconds = 0.0;
  std::uint64_t reports = 0;
};

// The workload is `calls` host calls, each filling a tensor of `per_call`
// normal draws.
Timed time_unwrapped(std::size_t calls, std::size_t per_call, std::uint64_t seed) {
  auto gen = GeneratorHandle::from_seed(Algorithm::MT19937, seed);
  Sampler sampler(Normal{});
  std::vector<double> tensor(per_call);
  const auto start = Clock::now();
  double acc = 0.0;
  for (std::size_t c = 0; c < calls; ++c) {
    for (auto& x : tensor) x = sampler.draw(gen);
    acc += tensor.back();
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  g_sink = acc;
  return {elapsed, elapsed, 0};
}

// Calls go through the registry by name, as an intercepted host function
// would, and each one gets a freshly created CSPRNG.
Timed time_enforced(std::size_t calls, std::size_t per_call, std::uint64_t seed,
                    Auditor* auditor) {
  const std::string slot = "torch.randn";
  GeneratorRegistry registry(auditor);
  registry.add(slot, GeneratorHandle::from_seed(Algorithm::MT19937, seed), Normal{});
  const Remediation directive{slot, Directive::ReplaceWithCsprng};
  registry.enforce(std::span(&directive, 1), Injection::PerCall);
  std::vector<double> tensor(per_call);

  const auto start = Clock::now();
  double acc = 0.0;
  for (std::size_t c = 0; c < calls; ++c) {
    registry.call(slot, tensor);
    acc += tensor.back();
  }
  const double workload = std::chrono::duration<double>(Clock::now() - start).count();
  std::uint64_t reports = 0;
  if (auditor != nullptr) reports = auditor->drain_reports(std::chrono::minutes(10)).size();
  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  g_sink = acc;
  return {workload, total, reports};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  if (config.runs < 1) throw Error(Errc::InvalidConfig, "runs must be at least 1");
  if (config.batches == 0 || config.modes.empty()) return {};

  std::vector<BenchRow> rows;
  for (auto m : config.modes) rows.push_back({m, {}, {}, 0.0, 0.0, 0});

  // Run 0 is an untimed warm-up.
  for (std::size_t run = 0; run <= config.runs; ++run) {
    for (auto& row : rows) {
      const std::uint64_t seed = run + 1;
      Timed t;
      if (row.mode == BenchMode::Unwrapped) {
        t = time_unwrapped(config.batches, config.batch_size, seed);
      } else if (row.mode == BenchMode::Static) {
        t = time_enforced(config.batches, config.batch_size, seed, nullptr);
      } else {
        AuditorConfig ac;
        ac.mode = row.mode == BenchMode::Blocking ? AuditMode::Blocking
                  : row.mode == BenchMode::ASN    ? AuditMode::ASN
                                                  : AuditMode::RASN;
        ac.batch_size = config.batch_size;
        ac.stride = config.stride;
        Auditor auditor(ac);
        t = time_enforced(config.batches, config.batch_size, seed, &auditor);
        auditor.stop();
      }
      if (run == 0) continue;
      row.run_seconds.push_back(t.seconds);
      row.run_total_seconds.push_back(t.total_seconds);
      row.reports = t.reports;
    }
  }
  for (auto& row : rows) {
    row.median_seconds = median(row.run_seconds);
    row.median_total_seconds = median(row.run_total_seconds);
  }
  return rows;
}

Json bench_to_json(const BenchConfig& config, const std::vector<BenchRow>& rows) {
  std::optional<double> base;
  for (const auto& r : rows) {
    if (r.mode == BenchMode::Unwrapped) base = r.median_seconds;
  }
  Json table = Json::array();
  for (const auto& r : rows) {
    Json overhead = nullptr;
    if (base && *base > 0.0) overhead = r.median_seconds / *base - 1.0;
    table.push_back(Json{{"mode", std::string(to_string(r.mode))},
                         {"median_s", r.median_seconds},
                         {"runs_s", r.run_seconds},
                         {"median_total_s", r.median_total_seconds},
                         {"reports", r.reports},
                         {"overhead_vs_unwrapped", overhead}});
  }
  return Json{{"batches", config.batches},
              {"batch_size", config.batch_size},
              {"runs", config.runs},
              {"rows", table}};
}

}  // namespace rngsentinel
