#include "rngsentinel/auditor.hpp"

#include <algorithm>
#include <exception>
#include <optional>
#include <ostream>

#include "rngsentinel/error.hpp"

namespace rngsentinel {

std::string_view to_string(AuditMode mode) noexcept {
  switch (mode) {
    case AuditMode::Blocking: return "blocking";
    case AuditMode::ASN: return "asn";
    case AuditMode::RASN: return "rasn";
  }
  return "unknown";
}

std::optional<AuditMode> parse_audit_mode(std::string_view name) noexcept {
  for (auto m : {AuditMode::Blocking, AuditMode::ASN, AuditMode::RASN}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

}  // namespace

void AuditorConfig::validate() const {
  if (stride < 1) invalid("stride must be at least 1");
  if (batch_size < kKsMinSamples) invalid("batch_size must be at least 20");
  if (!(warn_threshold > 0.0 && warn_threshold < 1.0)) invalid("warn_threshold must be in (0, 1)");
  if (queue_capacity < 1) invalid("queue_capacity must be at least 1");
  if (continuous_test == TestKind::MonoBit) invalid("MonoBit cannot audit a distribution");
  if (discrete_test != TestKind::ChiSquare && discrete_test != TestKind::Z) {
    invalid("discrete specs are audited with chi_square or z");
  }
  if (chi_square_bins < 2) invalid("chi_square_bins must be at least 2");
}

void AuditorConfig::validate_for(const DistributionSpec& spec) const {
  validate();
  rngsentinel::validate(spec);
  const bool uses_chi = is_continuous(spec) ? continuous_test == TestKind::ChiSquare
                                            : discrete_test == TestKind::ChiSquare;
  if (!uses_chi) return;
  // Smallest expected bin count the batch would produce.
  std::vector<double> probe(batch_size, mean(spec));
  const auto counts = bin_samples(probe, spec, chi_square_bins);
  const double smallest = *std::min_element(counts.expected.begin(), counts.expected.end());
  if (smallest < kChiSquareMinExpected) {
    invalid("batch_size " + std::to_string(batch_size) + " leaves a chi-square bin with " +
            std::to_string(smallest) + " expected observations for " + to_string(spec));
  }
}

TestReport run_audit_test(const AuditorConfig& config, const DistributionSpec& spec,
                          std::span<const double> samples) {
  const TestKind kind = is_continuous(spec) ? config.continuous_test : config.discrete_test;
  TestReport report;
  switch (kind) {
    case TestKind::KS: {
      const auto member = standard_member(spec);
      std::vector<double> standardized(samples.size());
      std::transform(samples.begin(), samples.end(), standardized.begin(),
                     [&spec](double x) { return standardize(spec, x); });
      report = ks_test(
          standardized, [member](double x) { return standard_cdf(member, x); },
          config.warn_threshold);
      break;
    }
    case TestKind::Z:
      report = z_test(samples, mean(spec), stddev(spec), config.warn_threshold);
      break;
    case TestKind::ChiSquare:
      report = chi_square_test(samples, spec, config.chi_square_bins, config.warn_threshold);
      break;
    case TestKind::MonoBit:
      throw Error(Errc::InvalidConfig, "MonoBit cannot audit a distribution");
  }
  report.target = spec;
  return report;
}

// ---------------------------------------------------------------------------
// Audit log
// ---------------------------------------------------------------------------

Json report_record(const AuditReport& r) {
  Json j = test_report_to_json(r.report);
  j["type"] = "report";
  j["source_tag"] = r.source_tag;
  j["sequence_index"] = r.sequence_index;
  return j;
}

Json rebind_record(const RebindRecord& r) {
  return Json{{"type", "rebind"},
              {"slot", r.slot},
              {"directive", std::string(to_string(r.directive))},
              {"algorithm", std::string(to_string(r.algorithm))},
              {"security_class", std::string(to_string(r.security_class))},
              {"seed", r.seed ? Json(*r.seed) : Json(nullptr)}};
}

void AuditLog::append(Json record) {
  std::lock_guard lock(mutex_);
  if (sink_ != nullptr) *sink_ << record.dump() << '\n';
  records_.push_back(std::move(record));
}

std::vector<Json> AuditLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------
// Auditor
// ---------------------------------------------------------------------------

Auditor::Auditor(AuditorConfig config, AuditLog* log)
    : config_((config.validate(), config)), log_(log), work_(config.queue_capacity) {
  worker_ = std::thread([this] { worker_loop(); });
}

Auditor::~Auditor() { stop(); }

std::future<AuditReport> Auditor::submit(AuditEvent event) {
  Job job{std::move(event), {}};
  auto future = job.done.get_future();
  submitted_.fetch_add(1);
  if (!work_.push(std::move(job))) {
    submitted_.fetch_sub(1);
    throw Error(Errc::AuditorStopped, "auditor has been stopped");
  }
  return future;
}

void Auditor::worker_loop() {
  while (auto job = work_.pop()) {
    std::optional<AuditReport> report;
    std::exception_ptr failure;
    try {
      report = AuditReport{job->event.source_tag, job->event.sequence_index,
                           run_audit_test(config_, job->event.spec, job->event.samples)};
      if (log_ != nullptr) log_->append(report_record(*report));
    } catch (const Error& e) {
      if (log_ != nullptr) {
        log_->append(Json{{"type", "error"},
                          {"source_tag", job->event.source_tag},
                          {"sequence_index", job->event.sequence_index},
                          {"detail", e.what()}});
      }
      failure = std::current_exception();
    }
    // Counted before the future resolves, so a blocking caller sees it.
    {
      std::lock_guard lock(results_mutex_);
      if (report) results_.push_back(*report);
      completed_.fetch_add(1);
    }
    results_cv_.notify_all();
    if (report) {
      job->done.set_value(std::move(*report));
    } else {
      job->done.set_exception(failure);
    }
  }
}

std::vector<AuditReport> Auditor::drain_reports(std::chrono::milliseconds timeout) {
  std::unique_lock lock(results_mutex_);
  const std::uint64_t target = submitted_.load();
  if (!results_cv_.wait_for(lock, timeout, [&] { return completed_.load() >= target; })) {
    throw Error(Errc::Timeout, "auditor still has " + std::to_string(target - completed_.load()) +
                                   " events in flight");
  }
  std::vector<AuditReport> out(std::make_move_iterator(results_.begin()),
                               std::make_move_iterator(results_.end()));
  results_.clear();
  return out;
}

std::vector<AuditReport> Auditor::try_drain() {
  std::lock_guard lock(results_mutex_);
  std::vector<AuditReport> out(std::make_move_iterator(results_.begin()),
                               std::make_move_iterator(results_.end()));
  results_.clear();
  return out;
}

void Auditor::stop() {
  std::call_once(stop_once_, [this] {
    work_.close();
    if (worker_.joinable()) worker_.join();
  });
}

// ---------------------------------------------------------------------------
// AuditedGenerator
// ---------------------------------------------------------------------------

AuditedGenerator::AuditedGenerator(GeneratorHandle inner, DistributionSpec spec, Auditor* auditor,
                                   std::string source_tag)
    : inner_(std::move(inner)),
      declared_(spec),
      sampler_(spec),
      auditor_(auditor),
      tag_(std::move(source_tag)) {
  if (auditor_ != nullptr) {
    auditor_->config().validate_for(declared_);
    buffer_.reserve(auditor_->config().batch_size);
  }
}

double AuditedGenerator::draw() {
  const double x = sampler_.draw(inner_);
  if (auditor_ != nullptr) {
    buffer_.push_back(x);
    if (buffer_.size() == auditor_->config().batch_size) complete_batch();
  }
  return x;
}

void AuditedGenerator::draw_into(std::span<double> out) {
  for (auto& x : out) x = draw();
}

void AuditedGenerator::complete_batch() {
  const auto& config = auditor_->config();
  const std::uint64_t index = ++batches_;
  if (config.mode == AuditMode::RASN && index % config.stride != 0) {
    buffer_.clear();
    return;
  }
  AuditEvent event{tag_, declared_, std::move(buffer_), index};
  buffer_ = {};
  buffer_.reserve(config.batch_size);
  auto future = auditor_->submit(std::move(event));
  ++events_;
  if (config.mode == AuditMode::Blocking) future.get();
}

void AuditedGenerator::set_draw_spec(DistributionSpec spec) { sampler_.set_spec(spec); }

void AuditedGenerator::replace_inner(GeneratorHandle inner) {
  inner_ = std::move(inner);
  sampler_.reset();
}

AuditedGenerator wrap(GeneratorHandle inner, DistributionSpec spec, Auditor& auditor,
                      std::string source_tag) {
  return AuditedGenerator(std::move(inner), spec, &auditor, std::move(source_tag));
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

GeneratorRegistry::GeneratorRegistry(Auditor* auditor, AuditLog* log, SeedEnvironment env)
    : auditor_(auditor), log_(log), env_(std::move(env)) {}

AuditedGenerator& GeneratorRegistry::add(const std::string& slot, GeneratorHandle inner,
                                         DistributionSpec spec) {
  if (slots_.contains(slot)) throw Error(Errc::InvalidArgument, "slot '" + slot + "' exists");
  auto gen = std::make_unique<AuditedGenerator>(std::move(inner), spec, auditor_, slot);
  return *slots_.emplace(slot, std::move(gen)).first->second;
}

AuditedGenerator& GeneratorRegistry::slot(std::string_view name) {
  const auto it = slots_.find(name);
  if (it == slots_.end()) throw Error(Errc::UnknownSlot, "no slot '" + std::string(name) + "'");
  return *it->second;
}

bool GeneratorRegistry::contains(std::string_view name) const { return slots_.contains(name); }

std::vector<std::string> GeneratorRegistry::slot_names() const {
  std::vector<std::string> names;
  for (const auto& [name, _] : slots_) names.push_back(name);
  return names;
}

void GeneratorRegistry::rebind(AuditedGenerator& gen, Directive directive) {
  if (directive == Directive::ReplaceWithCsprng) {
    gen.replace_inner(GeneratorHandle::create(Algorithm::CsprngCtr, OsEntropy{}, env_));
    gen.set_draw_spec(gen.declared_spec());
  } else {
    gen.replace_inner(GeneratorHandle::create(gen.inner().algorithm(), OsEntropy{}, env_));
  }
}

std::vector<RebindRecord> GeneratorRegistry::enforce(std::span<const Remediation> directives,
                                                     Injection injection) {
  for (const auto& d : directives) {
    if (!contains(d.function_id)) {
      throw Error(Errc::UnknownSlot, "no slot '" + d.function_id + "'");
    }
  }
  std::vector<RebindRecord> applied;
  for (const auto& d : directives) {
    auto& gen = slot(d.function_id);
    rebind(gen, d.directive);
    if (injection == Injection::PerCall) {
      // A stronger directive already in place wins.
      auto [it, fresh] = per_call_.emplace(d.function_id, d.directive);
      if (!fresh && d.directive == Directive::ReplaceWithCsprng) it->second = d.directive;
    } else {
      per_call_.erase(d.function_id);
    }
    RebindRecord record{d.function_id, d.directive, gen.inner().algorithm(),
                        gen.inner().security_class(), gen.inner().seed()};
    if (log_ != nullptr) log_->append(rebind_record(record));
    rebinds_.push_back(record);
    applied.push_back(std::move(record));
  }
  return applied;
}

void GeneratorRegistry::call(std::string_view name, std::span<double> out) {
  auto& gen = slot(name);
  if (const auto it = per_call_.find(name); it != per_call_.end()) rebind(gen, it->second);
  gen.draw_into(out);
}

}  // namespace rngsentinel
