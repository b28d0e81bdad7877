#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "rngsentinel/auditor.hpp"
#include "rngsentinel/bounded_queue.hpp"
#include "rngsentinel/error.hpp"

using namespace rngsentinel;
using namespace std::chrono_literals;

namespace {

AuditorConfig cfg(AuditMode mode, std::uint64_t stride = 10) {
  AuditorConfig c;
  c.mode = mode;
  c.stride = stride;
  return c;
}

GeneratorHandle philox(std::uint64_t seed) {
  return GeneratorHandle::from_seed(Algorithm::PhiloxCounter, seed);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("bounded queue") {
  BoundedQueue<int> q(2);
  CHECK(q.push(1));
  CHECK(q.push(2));
  std::thread producer([&] { q.push(3); });
  std::this_thread::sleep_for(20ms);
  CHECK(q.size() == 2);
  CHECK(q.pop() == 1);
  producer.join();
  CHECK(q.pop() == 2);
  q.close();
  CHECK_FALSE(q.push(4));
  CHECK(q.pop() == 3);
  CHECK_FALSE(q.pop().has_value());
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    AuditorConfig c;
    mutate(c);
    return code_of([&] { c.validate(); });
  };
  CHECK(bad([](AuditorConfig& c) { c.stride = 0; }) == Errc::InvalidConfig);
  CHECK(bad([](AuditorConfig& c) { c.batch_size = 19; }) == Errc::InvalidConfig);
  CHECK(bad([](AuditorConfig& c) { c.warn_threshold = 1.0; }) == Errc::InvalidConfig);
  CHECK(bad([](AuditorConfig& c) { c.queue_capacity = 0; }) == Errc::InvalidConfig);
  CHECK(bad([](AuditorConfig& c) { c.continuous_test = TestKind::MonoBit; }) == Errc::InvalidConfig);
  AuditorConfig c;
  c.batch_size = 40;
  CHECK(code_of([&] { c.validate_for(UniformInt{0, 10}); }) == Errc::InvalidConfig);
  CHECK_NOTHROW(c.validate_for(UniformInt{0, 4}));
  CHECK_NOTHROW(c.validate_for(Normal{}));
  CHECK(code_of([] { Auditor a(cfg(AuditMode::RASN, 0)); }) == Errc::InvalidConfig);
}

TEST_CASE("batch boundaries") {
  Auditor auditor(cfg(AuditMode::ASN));
  auto gen = wrap(philox(1), Normal{}, auditor);
  for (int i = 0; i < 99; ++i) gen.draw();
  CHECK(gen.events_submitted() == 0);
  gen.draw();
  CHECK(gen.events_submitted() == 1);
  const auto reports = auditor.drain_reports(10s);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].sequence_index == 1);
  CHECK(reports[0].report.sample_size == 100);
  CHECK(reports[0].report.test == TestKind::KS);
}

TEST_CASE("transparency") {
  for (auto mode : {AuditMode::Blocking, AuditMode::ASN, AuditMode::RASN}) {
    Auditor auditor(cfg(mode));
    auto audited = wrap(philox(77), Laplace{0, 2}, auditor);
    auto plain = philox(77);
    Sampler s(Laplace{0, 2});
    for (int i = 0; i < 1234; ++i) REQUIRE(audited.draw() == s.draw(plain));
  }
}

TEST_CASE("blocking reports arrive before the next draw returns") {
  AuditLog log;
  Auditor auditor(cfg(AuditMode::Blocking), &log);
  auto gen = wrap(philox(2), Normal{}, auditor);
  for (int i = 0; i < 100; ++i) gen.draw();
  CHECK(auditor.completed() == 1);
  CHECK(log.size() == 1);
  for (int i = 0; i < 500; ++i) gen.draw();
  const auto reports = auditor.drain_reports(1s);
  REQUIRE(reports.size() == 6);
  for (std::size_t i = 0; i < reports.size(); ++i) CHECK(reports[i].sequence_index == i + 1);
}

TEST_CASE("asn produces every report") {
  Auditor auditor(cfg(AuditMode::ASN));
  auto gen = wrap(philox(3), Normal{}, auditor);
  for (int i = 0; i < 50 * 100; ++i) gen.draw();
  const auto reports = auditor.drain_reports(30s);
  CHECK(reports.size() == 50);
  std::multiset<std::uint64_t> idx;
  for (const auto& r : reports) idx.insert(r.sequence_index);
  for (std::uint64_t i = 1; i <= 50; ++i) CHECK(idx.count(i) == 1);
}

TEST_CASE("liveness over 10^4 events with a tiny queue") {
  AuditorConfig c = cfg(AuditMode::ASN);
  c.queue_capacity = 4;
  c.batch_size = 20;
  Auditor auditor(c);
  auto gen = wrap(philox(4), UniformReal{}, auditor);
  for (int i = 0; i < 10000 * 20; ++i) gen.draw();
  const auto reports = auditor.drain_reports(120s);
  CHECK(reports.size() == 10000);
  std::set<std::uint64_t> idx;
  for (const auto& r : reports) idx.insert(r.sequence_index);
  CHECK(idx.size() == 10000);
}

TEST_CASE("rasn audits exactly every stride-th batch") {
  for (std::uint64_t stride : {1ULL, 3ULL, 10ULL}) {
    Auditor auditor(cfg(AuditMode::RASN, stride));
    auto gen = wrap(philox(5), Normal{}, auditor);
    for (int i = 0; i < 100 * 100; ++i) gen.draw();
    const auto reports = auditor.drain_reports(30s);
    CHECK(reports.size() == 100 / stride);
    for (const auto& r : reports) CHECK(r.sequence_index % stride == 0);
    CHECK(gen.batches() == 100);
  }
}

TEST_CASE("discrete specs use chi-square") {
  Auditor auditor(cfg(AuditMode::Blocking));
  auto gen = wrap(philox(6), UniformInt{0, 10}, auditor);
  for (int i = 0; i < 100; ++i) gen.draw();
  const auto r = auditor.drain_reports(1s);
  REQUIRE(r.size() == 1);
  CHECK(r[0].report.test == TestKind::ChiSquare);
}

TEST_CASE("substitution is caught and enforcement restores the transform") {
  AuditLog log;
  Auditor auditor(cfg(AuditMode::ASN), &log);
  GeneratorRegistry registry(&auditor, &log);
  auto& gen = registry.add("torch.randn", philox(7), Normal{});
  gen.set_draw_spec(UniformReal{});
  for (int i = 0; i < 100; ++i) gen.draw();
  auto reports = auditor.drain_reports(5s);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].report.verdict == Verdict::Warn);

  const std::vector<Remediation> plan{{"torch.randn", Directive::ReplaceWithCsprng}};
  const auto rebinds = registry.enforce(plan);
  REQUIRE(rebinds.size() == 1);
  CHECK(gen.inner().security_class() == SecurityClass::Cryptographic);
  CHECK(gen.draw_spec() == DistributionSpec{Normal{}});
  CHECK_FALSE(rebinds[0].seed.has_value());

  const auto records = log.records();
  const auto rebind = std::find_if(records.begin(), records.end(),
                                   [](const Json& j) { return j["type"] == "rebind"; });
  REQUIRE(rebind != records.end());
  CHECK((*rebind)["seed"].is_null());
  CHECK((*rebind)["directive"] == "ReplaceWithCsprng");
  CHECK((*rebind)["security_class"] == "cryptographic");
}

TEST_CASE("reseed directives") {
  AuditLog log;
  GeneratorRegistry registry(nullptr, &log);
  auto& gen = registry.add("init", GeneratorHandle::from_seed(Algorithm::MT19937, 1, ConstantSeed{1}),
                           Normal{});
  const std::vector<Remediation> plan{{"init", Directive::ReseedFromOsEntropy}};
  registry.enforce(plan);
  registry.enforce(plan);
  CHECK(log.size() == 2);
  CHECK(registry.rebinds().size() == 2);
  CHECK(gen.inner().algorithm() == Algorithm::MT19937);
  CHECK(kind_of(gen.inner().seed_source()) == SeedKind::OsEntropy);
  CHECK(gen.inner().security_class() == SecurityClass::Statistical);

  // Deterministic from the recorded seed.
  const auto seed = *registry.rebinds().back().seed;
  auto replay = GeneratorHandle::from_seed(Algorithm::MT19937, seed);
  Sampler s(Normal{});
  for (int i = 0; i < 10; ++i) CHECK(gen.draw() == s.draw(replay));

  registry.enforce({});
  CHECK(log.size() == 2);
}

TEST_CASE("unknown slot leaves the registry untouched") {
  GeneratorRegistry registry;
  registry.add("a", philox(1), Normal{});
  const std::vector<Remediation> plan{{"a", Directive::ReplaceWithCsprng},
                                      {"missing", Directive::ReplaceWithCsprng}};
  CHECK(code_of([&] { registry.enforce(plan); }) == Errc::UnknownSlot);
  CHECK(registry.slot("a").inner().algorithm() == Algorithm::PhiloxCounter);
  CHECK(code_of([&] { registry.slot("missing"); }) == Errc::UnknownSlot);
}

TEST_CASE("per-call injection builds a fresh generator each call") {
  GeneratorRegistry registry;
  registry.add("noise", philox(1), Normal{});
  const std::vector<Remediation> plan{{"noise", Directive::ReplaceWithCsprng}};
  registry.enforce(plan, Injection::PerCall);
  std::vector<double> a(4), b(4);
  registry.call("noise", a);
  registry.call("noise", b);
  CHECK(a != b);
  CHECK(registry.slot("noise").inner().security_class() == SecurityClass::Cryptographic);
  CHECK(registry.slot("noise").inner().draws_emitted() == 4);
}

TEST_CASE("stop is idempotent and rejects later submissions") {
  Auditor auditor(cfg(AuditMode::ASN));
  auto gen = wrap(philox(9), Normal{}, auditor);
  for (int i = 0; i < 300; ++i) gen.draw();
  auditor.stop();
  auditor.stop();
  CHECK(auditor.drain_reports(1s).size() == 3);
  CHECK(auditor.drain_reports(1s).empty());
  CHECK(code_of([&] {
          for (int i = 0; i < 100; ++i) gen.draw();
        }) == Errc::AuditorStopped);
}

TEST_CASE("drain with nothing submitted") {
  Auditor auditor(cfg(AuditMode::ASN));
  CHECK(auditor.drain_reports(100ms).empty());
  CHECK(auditor.try_drain().empty());
}

TEST_CASE("audit log records are ndjson") {
  std::ostringstream sink;
  AuditLog log(sink);
  Auditor auditor(cfg(AuditMode::Blocking), &log);
  auto gen = wrap(philox(10), Normal{}, auditor, "slot-x");
  for (int i = 0; i < 200; ++i) gen.draw();
  std::istringstream lines(sink.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = Json::parse(line);
    CHECK(j["type"] == "report");
    CHECK(j["source_tag"] == "slot-x");
    CHECK(j["test"] == "ks");
    CHECK(j["target"]["family"] == "normal");
    for (const char* key : {"statistic", "p_value", "sample_size", "verdict", "sequence_index"}) {
      CHECK(j.contains(key));
    }
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("z test auditing") {
  AuditorConfig c = cfg(AuditMode::Blocking);
  c.continuous_test = TestKind::Z;
  const TestReport r = run_audit_test(c, Normal{5, 2}, std::vector<double>(100, 5.0));
  CHECK(r.test == TestKind::Z);
  CHECK(r.statistic == 0.0);
  CHECK(std::get<DistributionSpec>(r.target) == DistributionSpec{Normal{5, 2}});
}
