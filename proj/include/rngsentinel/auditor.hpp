#pragma once

// Runtime phase. Generators are wrapped so every drawn sample is also copied
// into a batch buffer; full batches become AuditEvents that a single worker
// thread tests against the declared distribution.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "rngsentinel/bounded_queue.hpp"
#include "rngsentinel/distribution.hpp"
#include "rngsentinel/json_io.hpp"
#include "rngsentinel/policy.hpp"
#include "rngsentinel/prng.hpp"
#include "rngsentinel/stats.hpp"
#include "rngsentinel/transforms.hpp"

namespace rngsentinel {

/// Blocking: the producer waits for each batch's report.
/// ASN: the producer enqueues and keeps going.
/// RASN: like ASN, but only every stride-th batch is enqueued.
enum class AuditMode { Blocking, ASN, RASN };

std::string_view to_string(AuditMode mode) noexcept;
std::optional<AuditMode> parse_audit_mode(std::string_view name) noexcept;

struct AuditorConfig {
  AuditMode mode = AuditMode::Blocking;
  std::uint64_t stride = 10;
  std::size_t batch_size = 100;
  double warn_threshold = kDefaultWarnThreshold;
  std::size_t queue_capacity = 1024;
  /// Test for continuous specs; KS, Z or ChiSquare.
  TestKind continuous_test = TestKind::KS;
  /// Test for discrete specs; ChiSquare or Z.
  TestKind discrete_test = TestKind::ChiSquare;
  std::size_t chi_square_bins = 10;

  /// Throws InvalidConfig.
  void validate() const;
  /// Also checks the batch can support the test chosen for `spec`.
  void validate_for(const DistributionSpec& spec) const;
};

struct AuditEvent {
  std::string source_tag;
  DistributionSpec spec;
  std::vector<double> samples;
  std::uint64_t sequence_index = 0;
};

struct AuditReport {
  std::string source_tag;
  std::uint64_t sequence_index = 0;
  TestReport report;
};

/// Runs the test the config selects for one event, synchronously.
TestReport run_audit_test(const AuditorConfig& config, const DistributionSpec& spec,
                          std::span<const double> samples);

struct RebindRecord {
  std::string slot;
  Directive directive = Directive::ReseedFromOsEntropy;
  Algorithm algorithm = Algorithm::CsprngCtr;
  SecurityClass security_class = SecurityClass::Cryptographic;
  std::optional<std::uint64_t> seed;
};

Json report_record(const AuditReport& report);
Json rebind_record(const RebindRecord& record);

/// Newline-delimited JSON log of reports and rebinds. Thread-safe.
///
/// Report records: {"type":"report","source_tag","sequence_index","test",
/// "statistic","p_value","sample_size","target","verdict"}.
/// Rebind records: {"type":"rebind","slot","directive","algorithm",
/// "security_class","seed"}; seed is null for CSPRNG slots.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(std::ostream& sink) : sink_(&sink) {}

  void append(Json record);
  std::vector<Json> records() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Json> records_;
  std::ostream* sink_ = nullptr;
};

class Auditor {
 public:
  explicit Auditor(AuditorConfig config, AuditLog* log = nullptr);
  ~Auditor();
  Auditor(const Auditor&) = delete;
  Auditor& operator=(const Auditor&) = delete;

  const AuditorConfig& config() const noexcept { return config_; }

  /// Enqueues an event, blocking while the work queue is full. The future
  /// resolves once the worker has tested it. Throws AuditorStopped after stop().
  std::future<AuditReport> submit(AuditEvent event);

  /// Waits until every event submitted so far has been tested, then returns
  /// the reports in completion order. Throws Timeout if the worker does not
  /// catch up in time; pending reports stay queued.
  std::vector<AuditReport> drain_reports(std::chrono::milliseconds timeout);

  /// Whatever reports are complete right now, without waiting.
  std::vector<AuditReport> try_drain();

  /// Closes the work queue, lets the worker finish what is queued, and joins
  /// it. Idempotent.
  void stop();

  std::uint64_t submitted() const noexcept { return submitted_.load(); }
  std::uint64_t completed() const noexcept { return completed_.load(); }

 private:
  struct Job {
    AuditEvent event;
    std::promise<AuditReport> done;
  };

  void worker_loop();

  AuditorConfig config_;
  AuditLog* log_;
  BoundedQueue<Job> work_;
  std::mutex results_mutex_;
  std::condition_variable results_cv_;
  std::deque<AuditReport> results_;
  std::atomic<std::uint64_t> submitted_{0};
  std::atomic<std::uint64_t> completed_{0};
  std::once_flag stop_once_;
  std::thread worker_;
};

/// A generator whose draws are observed by an Auditor. Returned values are
/// exactly what the inner generator and sampler produce. With no auditor the
/// wrapper only routes draws (static enforcement without testing).
class AuditedGenerator {
 public:
  AuditedGenerator(GeneratorHandle inner, DistributionSpec spec, Auditor* auditor,
                   std::string source_tag);

  double draw();
  void draw_into(std::span<double> out);

  const DistributionSpec& declared_spec() const noexcept { return declared_; }
  /// What the draw path actually samples. Equal to declared_spec() unless
  /// something substituted the transform.
  const DistributionSpec& draw_spec() const noexcept { return sampler_.spec(); }
  void set_draw_spec(DistributionSpec spec);

  GeneratorHandle& inner() noexcept { return inner_; }
  const GeneratorHandle& inner() const noexcept { return inner_; }
  void replace_inner(GeneratorHandle inner);

  const std::string& source_tag() const noexcept { return tag_; }
  std::uint64_t batches() const noexcept { return batches_; }
  std::uint64_t events_submitted() const noexcept { return events_; }

 private:
  void complete_batch();

  GeneratorHandle inner_;
  DistributionSpec declared_;
  Sampler sampler_;
  Auditor* auditor_;
  std::string tag_;
  std::vector<double> buffer_;
  std::uint64_t batches_ = 0;
  std::uint64_t events_ = 0;
};

AuditedGenerator wrap(GeneratorHandle inner, DistributionSpec spec, Auditor& auditor,
                      std::string source_tag = "generator");

/// Persistent: enforce() rebinds a slot once.
/// PerCall: every call() on the slot also builds a fresh generator of the
/// enforced kind and injects it before drawing.
enum class Injection { Persistent, PerCall };

/// Named generator slots that policy directives and attacks act on.
class GeneratorRegistry {
 public:
  explicit GeneratorRegistry(Auditor* auditor = nullptr, AuditLog* log = nullptr,
                             SeedEnvironment env = {});

  AuditedGenerator& add(const std::string& slot, GeneratorHandle inner, DistributionSpec spec);
  AuditedGenerator& slot(std::string_view name);
  bool contains(std::string_view name) const;
  std::vector<std::string> slot_names() const;

  /// Applies remediation directives to the named slots. ReseedFromOsEntropy
  /// reseeds in place; ReplaceWithCsprng installs a CsprngCtr generator and
  /// restores the declared transform. Every slot is checked before anything
  /// changes, so an UnknownSlot error leaves the registry untouched.
  std::vector<RebindRecord> enforce(std::span<const Remediation> directives,
                                    Injection injection = Injection::Persistent);

  /// One intercepted host call: fills `out` from the slot.
  void call(std::string_view slot, std::span<double> out);

  const std::vector<RebindRecord>& rebinds() const noexcept { return rebinds_; }

 private:
  Auditor* auditor_;
  AuditLog* log_;
  SeedEnvironment env_;
  void rebind(AuditedGenerator& gen, Directive directive);

  std::map<std::string, std::unique_ptr<AuditedGenerator>, std::less<>> slots_;
  std::map<std::string, Directive, std::less<>> per_call_;
  std::vector<RebindRecord> rebinds_;
};

}  // namespace rngsentinel
