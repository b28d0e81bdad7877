// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fail.

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rngsentinel/attacks.hpp"
#include "rngsentinel/auditor.hpp"
#include "rngsentinel/bench.hpp"
#include "rngsentinel/error.hpp"
#include "rngsentinel/policy.hpp"
#include "rngsentinel/prng.hpp"
#include "rngsentinel/special_functions.hpp"
#include "rngsentinel/stats.hpp"
#include "rngsentinel/transforms.hpp"

using namespace rngsentinel;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome mt_conformance() {
  for (std::uint32_t seed : {5489U, 0U, 42U, 0xdeadbeefU}) {
    Mt19937 ours(seed);
    std::mt19937 reference(seed);
    for (int i = 0; i < 1000; ++i) {
      const auto a = ours.next();
      const auto b = reference();
      if (a != b) return {false, fmt("seed %u output %d: %u != %u", seed, i, a, b)};
    }
  }
  return {true, "1000 outputs x 4 seeds bit-exact against std::mt19937"};
}

// --- 2 ---------------------------------------------------------------------

double kolmogorov_theta(double d, double n) {
  const double t = d * (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n));
  if (t <= 0.0) return 1.0;
  if (t < 1.0) {
    double s = 0.0;
    for (int k = 1; k < 200; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * std::numbers::pi * std::numbers::pi / (8.0 * t * t));
    }
    return 1.0 - s * std::sqrt(2.0 * std::numbers::pi) / t;
  }
  double q = 0.0;
  for (int k = 1; k < 200; ++k) q += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * t * t);
  return q;
}

Outcome special_functions() {
  const boost::math::normal_distribution<double> std_normal;
  double worst[4] = {0, 0, 0, 0};
  for (int i = 0; i < 100; ++i) {
    const double x = -8.0 + 16.0 * i / 99.0;
    worst[0] = std::max(worst[0], std::abs(normal_cdf(x) - boost::math::cdf(std_normal, x)));

    const double dof = 1.0 + (i % 10) * 7.0;
    const double cx = 0.05 + (i / 10) * dof * 0.4;
    worst[1] = std::max(worst[1], std::abs(chi2_sf(cx, dof) - boost::math::gamma_q(dof / 2.0, cx / 2.0)));

    const double d = 0.005 + 0.3 * i / 99.0;
    worst[2] = std::max(worst[2], std::abs(kolmogorov_sf(d, 100.0) - kolmogorov_theta(d, 100.0)));

    const double ex = -5.0 + 15.0 * i / 99.0;
    worst[3] = std::max(worst[3], std::abs(rngsentinel::erfc(ex) - boost::math::erfc(ex)));
  }
  const bool ok = std::all_of(std::begin(worst), std::end(worst), [](double w) { return w <= 1e-8; });
  return {ok, fmt("max abs err normal_cdf %.1e chi2_sf %.1e kolmogorov_sf %.1e erfc %.1e", worst[0],
                  worst[1], worst[2], worst[3])};
}

// --- 3 ---------------------------------------------------------------------

Outcome calibration() {
  constexpr int kBatches = 10000;
  constexpr std::size_t kSize = 100;
  std::string detail;
  bool ok = true;
  auto record = [&](const char* name, int warns) {
    const double rate = static_cast<double>(warns) / kBatches;
    const bool in_band = rate >= 0.006 && rate <= 0.014;
    ok = ok && in_band;
    detail += fmt("%s %.4f%s ", name, rate, in_band ? "" : "(out)");
  };

  std::vector<double> batch(kSize);
  auto run = [&](const char* name, const DistributionSpec& spec, std::uint64_t seed, auto test) {
    auto gen = GeneratorHandle::from_seed(Algorithm::MT19937, seed);
    Sampler s(spec);
    int warns = 0;
    for (int b = 0; b < kBatches; ++b) {
      for (auto& x : batch) x = s.draw(gen);
      warns += test(batch).verdict == Verdict::Warn;
    }
    record(name, warns);
  };
  run("ks_normal", Normal{}, 101, [](const auto& xs) { return ks_test(xs, DistributionSpec{Normal{}}); });
  run("ks_uniform", UniformReal{}, 102,
      [](const auto& xs) { return ks_test(xs, DistributionSpec{UniformReal{}}); });
  run("chi2_uniform_10bin", UniformReal{}, 103,
      [](const auto& xs) { return chi_square_test(xs, DistributionSpec{UniformReal{}}, 10); });
  run("z", Normal{}, 104, [](const auto& xs) { return z_test(xs, 0.0, 1.0); });

  auto gen = GeneratorHandle::from_seed(Algorithm::MT19937, 105);
  std::vector<std::uint64_t> words(kSize);
  int warns = 0;
  for (int b = 0; b < kBatches; ++b) {
    for (auto& w : words) w = gen.next_u64();
    warns += monobit_test_words(words).verdict == Verdict::Warn;
  }
  record("monobit", warns);
  return {ok, detail};
}

// --- 4 ---------------------------------------------------------------------

template <typename F>
bool throws(Errc code, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

Outcome validity_rules() {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng() % 10;
    // Sparse bin with enough samples.
    std::vector<double> expected(k, 5.0 + static_cast<double>(rng() % 20));
    expected[rng() % k] = 0.5 + static_cast<double>(rng() % 45) / 10.0;
    double total = 0;
    for (double e : expected) total += e;
    std::vector<std::uint64_t> observed(k, 0);
    observed[0] = static_cast<std::uint64_t>(std::llround(total));
    if (observed[0] >= 13 && !throws(Errc::BinTooSparse, [&] { chi_square_test(observed, expected); })) {
      return {false, fmt("trial %d: sparse bin accepted", trial)};
    }
    // Too few samples, bins otherwise fine.
    const std::size_t n = rng() % 13;
    std::vector<std::uint64_t> few(2, 0);
    few[0] = n;
    const std::vector<double> even{n / 2.0, n - n / 2.0};
    if (!throws(Errc::SampleTooSmall, [&] { chi_square_test(few, even); })) {
      return {false, fmt("trial %d: n=%zu accepted by chi-square", trial, n)};
    }
    const std::size_t m = rng() % 20;
    const std::vector<double> xs(m, 0.25);
    if (!throws(Errc::SampleTooSmall, [&] { ks_test(xs, DistributionSpec{UniformReal{}}); })) {
      return {false, fmt("trial %d: n=%zu accepted by ks", trial, m)};
    }
    checked += 3;
  }
  // The boundaries themselves are legal.
  const std::vector<std::uint64_t> o13{7, 6};
  const std::vector<double> e13{6.5, 6.5};
  const auto boundary = chi_square_test(o13, e13);
  std::vector<double> twenty(20);
  for (int i = 0; i < 20; ++i) twenty[i] = (i + 0.5) / 20.0;
  const auto ks20 = ks_test(twenty, DistributionSpec{UniformReal{}});
  return {boundary.sample_size == 13 && ks20.sample_size == 20,
          fmt("%d invalid inputs rejected; n=13 chi-square and n=20 KS accepted", checked)};
}

// --- 5 ---------------------------------------------------------------------

Outcome attack_detection() {
  DetectionConfig c;
  c.claimed = Normal{0.0, std::sqrt(2.0 / 64.0)};  // Kaiming init, fan_in 64
  c.actual = UniformReal{0.0, 1.0};
  c.attack_batches = 1000;
  c.recovery_batches = 10000;
  c.auditor.mode = AuditMode::ASN;
  const auto r = run_substitution_experiment(c);
  const double recovery = r.recovery_warn_rate();
  const bool ok = r.attack_reports == 1000 && r.attack_warn_rate() >= 0.99 && r.recovery_reports == 10000 &&
                  recovery >= 0.006 && recovery <= 0.014 && r.class_after == SecurityClass::Cryptographic;
  return {ok, fmt("attack flagged %zu/%zu; after enforce warn rate %.4f over %zu batches (%s)",
                  r.attack_warns, r.attack_reports, recovery, r.recovery_reports,
                  std::string(to_string(r.class_after)).c_str())};
}

// --- 6 ---------------------------------------------------------------------

Outcome kill_chain() {
  const TimeWindowSeedAttack attack;  // 10 s window, 1 us clock
  const auto r = run_seed_kill_chain(attack);
  const bool ok = std::abs(r.entropy_bits - 23.25) < 0.01 && r.search_size == 10'000'000 &&
                  r.recovered_seed == r.true_seed && r.max_abs_error <= 1e-9;
  return {ok, fmt("entropy %.3f bits, %llu candidates, seed %s in %.2f s, %zu gradients max err %.2e",
                  r.entropy_bits, static_cast<unsigned long long>(r.search_size),
                  r.recovered_seed == r.true_seed ? "recovered" : "missed", r.recovery_seconds, r.elements,
                  r.max_abs_error)};
}

// --- 7 ---------------------------------------------------------------------

Outcome rasn_exactness() {
  std::vector<std::uint64_t> first_indices;
  for (int repeat = 0; repeat < 2; ++repeat) {
    AuditorConfig cfg;
    cfg.mode = AuditMode::RASN;
    cfg.stride = 10;
    Auditor auditor(cfg);
    AuditedGenerator gen(GeneratorHandle::from_seed(Algorithm::PhiloxCounter, 7), Normal{}, &auditor, "rasn");
    for (int i = 0; i < 1000 * 100; ++i) gen.draw();
    auto reports = auditor.drain_reports(std::chrono::seconds(10));
    std::vector<std::uint64_t> indices;
    for (const auto& rep : reports) indices.push_back(rep.sequence_index);
    std::sort(indices.begin(), indices.end());
    if (gen.batches() != 1000 || indices.size() != 100) {
      return {false, fmt("%zu reports from %llu batches", indices.size(),
                         static_cast<unsigned long long>(gen.batches()))};
    }
    if (repeat == 0) {
      first_indices = indices;
    } else if (indices != first_indices) {
      return {false, "selected batches differ between identical runs"};
    }
  }
  return {true, fmt("100 reports from 1000 batches, batches %llu..%llu, identical on rerun",
                    static_cast<unsigned long long>(first_indices.front()),
                    static_cast<unsigned long long>(first_indices.back()))};
}

// --- 8 ---------------------------------------------------------------------

Outcome mode_ordering() {
  BenchConfig cfg;  // 10^4 batches x 100 draws, median of 5
  const auto rows = run_bench(cfg);
  double t[5] = {};
  for (const auto& row : rows) t[static_cast<int>(row.mode)] = row.median_total_seconds;
  const double unwrapped = t[static_cast<int>(BenchMode::Unwrapped)];
  const double stat = t[static_cast<int>(BenchMode::Static)];
  const double blocking = t[static_cast<int>(BenchMode::Blocking)];
  const double asn = t[static_cast<int>(BenchMode::ASN)];
  const double rasn = t[static_cast<int>(BenchMode::RASN)];
  const bool ok = rows.size() == 5 && unwrapped <= stat && stat < rasn && rasn <= asn && asn <= blocking;
  return {ok, fmt("median s: unwrapped %.4f static %.4f rasn %.4f asn %.4f blocking %.4f", unwrapped, stat,
                  rasn, asn, blocking)};
}

// --- 9 ---------------------------------------------------------------------

std::set<std::string> reachability_oracle(const RandomnessManifest& m) {
  std::set<std::string> core(m.core_rng_ids.begin(), m.core_rng_ids.end());
  std::set<std::string> out;
  for (const auto& f : m.functions) {
    std::set<std::string> seen;
    std::vector<std::string> stack{f.id};
    while (!stack.empty()) {
      const auto cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      if (core.contains(cur)) {
        out.insert(f.id);
        break;
      }
      for (const auto& e : m.edges) {
        if (e.caller == cur) stack.push_back(e.callee);
      }
    }
  }
  return out;
}

Outcome policy_golden() {
  std::ifstream in(std::string(RNGSENTINEL_TEST_DATA) + "/golden_manifest.json");
  if (!in) return {false, "golden manifest missing"};
  const auto manifest = manifest_from_json(Json::parse(in));
  std::multiset<std::string> got;
  for (const auto& v : evaluate_policies(manifest)) {
    got.insert(std::string(to_string(v.rule)) + ":" + std::string(to_string(v.severity)));
  }
  const std::multiset<std::string> want{"NonCsprngInDpContext:Error", "InsecureSeedSource:Error",
                                        "LowSeedEntropy:Warning"};
  if (got != want) {
    std::string list;
    for (const auto& s : got) list += s + " ";
    return {false, "golden violations: " + list};
  }

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    RandomnessManifest m;
    const int n = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < n; ++i) m.functions.push_back({"f" + std::to_string(i), std::nullopt, std::nullopt, {}});
    const int edges = static_cast<int>(rng() % (3 * n + 1));
    for (int e = 0; e < edges; ++e) {
      m.edges.push_back({"f" + std::to_string(rng() % n), "f" + std::to_string(rng() % n)});
    }
    const int cores = 1 + static_cast<int>(rng() % 3);
    for (int c = 0; c < cores; ++c) m.core_rng_ids.push_back("f" + std::to_string(rng() % n));
    if (transitive_rng_closure(m) != reachability_oracle(m)) {
      return {false, fmt("closure mismatch on random manifest %d (%d nodes)", trial, n)};
    }
  }
  return {true, "golden set exact; 200 random closures match the reachability oracle"};
}

// --- 10 --------------------------------------------------------------------

Outcome transform_correctness() {
  constexpr std::size_t kN = 100'000;
  std::vector<double> xs(kN);
  std::string detail;
  bool ok = true;
  auto check = [&](const char* name, const DistributionSpec& spec, std::uint64_t seed) {
    auto gen = GeneratorHandle::from_seed(Algorithm::PhiloxCounter, seed);
    Sampler s(spec);
    for (auto& x : xs) x = s.draw(gen);
    const double p = ks_test(xs, spec).p_value;
    ok = ok && p > 0.001;
    detail += fmt("%s p=%.3f ", name, p);
  };
  check("uniform", UniformReal{-2.0, 3.0}, 1);
  check("normal", Normal{1.0, 2.0}, 2);
  check("laplace", Laplace{0.5, 1.5}, 3);

  // The ln(1 + |u|) variant over the same uniform input.
  const Laplace target{0.5, 1.5};
  auto gen = GeneratorHandle::from_seed(Algorithm::PhiloxCounter, 3);
  for (auto& x : xs) {
    const double u = to_uniform_real(gen.next_u64(), -1.0, 1.0);
    const double sign = (u > 0.0) - (u < 0.0);
    x = target.mu - target.b * sign * std::log1p(std::abs(u));
  }
  const double p_variant = ks_test(xs, DistributionSpec{target}).p_value;
  ok = ok && p_variant <= 0.001;
  detail += fmt("ln(1+|u|) variant p=%.1e (must fail)", p_variant);
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "mt19937 conformance", 1.0, mt_conformance},
      {2, "special functions", 1.0, special_functions},
      {3, "calibration", 120.0, calibration},
      {4, "test validity rules", 1.0, validity_rules},
      {5, "substitution detection", 30.0, attack_detection},
      {6, "seed kill chain", 300.0, kill_chain},
      {7, "rasn exactness", 10.0, rasn_exactness},
      {8, "mode ordering", 120.0, mode_ordering},
      {9, "policy golden", 10.0, policy_golden},
      {10, "transform correctness", 30.0, transform_correctness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("criterion %d: %s  %s (%.2f s, limit %.0f s%s) %s\n", c.id, pass ? "PASS" : "FAIL", c.name,
                secs, c.limit_s, in_time ? "" : ", too slow", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
