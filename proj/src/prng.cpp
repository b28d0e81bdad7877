#include "rngsentinel/prng.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "rngsentinel/error.hpp"

namespace rngsentinel {

// ---------------------------------------------------------------------------
// Seed sources
// ---------------------------------------------------------------------------

SeedKind kind_of(const SeedSource& source) noexcept {
  return static_cast<SeedKind>(source.index());
}

std::string_view to_string(SeedKind kind) noexcept {
  switch (kind) {
    case SeedKind::OsEntropy: return "os_entropy";
    case SeedKind::SystemTime: return "system_time";
    case SeedKind::Constant: return "constant";
    case SeedKind::BoundedRange: return "bounded_range";
    case SeedKind::UserProvided: return "user_provided";
  }
  return "unknown";
}

void validate(const SeedSource& source) {
  if (const auto* range = std::get_if<BoundedRange>(&source); range && range->lo >= range->hi) {
    throw Error(Errc::InvalidRange, "bounded seed range requires lo < hi");
  }
  if (const auto* clock = std::get_if<SystemTime>(&source); clock && clock->resolution_us < 1) {
    throw Error(Errc::InvalidArgument, "system time resolution must be at least 1 us");
  }
}

double effective_entropy_bits(const SeedSource& source, double window_s) {
  validate(source);
  switch (kind_of(source)) {
    case SeedKind::OsEntropy:
    case SeedKind::UserProvided:
      return kSeedWidthBits;
    case SeedKind::Constant:
      return 0.0;
    case SeedKind::SystemTime: {
      const auto res = static_cast<double>(std::get<SystemTime>(source).resolution_us);
      return std::max(0.0, std::log2(window_s * 1e6 / res));
    }
    case SeedKind::BoundedRange: {
      const auto& r = std::get<BoundedRange>(source);
      return std::log2(static_cast<double>(r.hi - r.lo));
    }
  }
  return 0.0;
}

std::int64_t SeedEnvironment::now_us() const {
  if (clock_us) return clock_us();
  using namespace std::chrono;
  return duration_cast<microseconds>(system_clock::now().time_since_epoch()).count();
}

void read_os_entropy(std::span<std::uint8_t> out, const SeedEnvironment& env) {
  // Unbuffered: an ifstream would pull a whole buffer's worth of entropy.
  const int fd = ::open(env.entropy_device.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) {
    throw Error(Errc::OsEntropyUnavailable, "cannot open " + env.entropy_device.string());
  }
  std::size_t got = 0;
  while (got < out.size()) {
    const ssize_t n = ::read(fd, out.data() + got, out.size() - got);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    got += static_cast<std::size_t>(n);
  }
  ::close(fd);
  if (got != out.size()) {
    throw Error(Errc::OsEntropyUnavailable, "short read from " + env.entropy_device.string());
  }
}

namespace {

std::uint64_t os_entropy_u64(const SeedEnvironment& env) {
  std::array<std::uint8_t, 8> bytes{};
  read_os_entropy(bytes, env);
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) value |= std::uint64_t{bytes[i]} << (8 * i);
  return value;
}

}  // namespace

std::uint64_t seed_from_source(const SeedSource& source, const SeedEnvironment& env) {
  validate(source);
  return std::visit(
      [&](const auto& s) -> std::uint64_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, OsEntropy>) {
          return os_entropy_u64(env);
        } else if constexpr (std::is_same_v<T, SystemTime>) {
          const std::int64_t now = env.now_us();
          return static_cast<std::uint64_t>(now - now % s.resolution_us);
        } else if constexpr (std::is_same_v<T, BoundedRange>) {
          // Rejection sampling keeps the draw unbiased over [lo, hi).
          const std::uint64_t span = s.hi - s.lo;
          const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                      std::numeric_limits<std::uint64_t>::max() % span;
          std::uint64_t v = 0;
          do {
            v = os_entropy_u64(env);
          } while (v >= limit);
          return s.lo + v % span;
        } else {
          return s.value;
        }
      },
      source);
}

// ---------------------------------------------------------------------------
// MT19937
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kMtMatrixA = 0x9908b0dfU;
constexpr std::uint32_t kMtUpper = 0x80000000U;
constexpr std::uint32_t kMtLower = 0x7fffffffU;

constexpr std::uint32_t mt_init_step(std::uint32_t prev, std::uint32_t i) noexcept {
  return 1812433253U * (prev ^ (prev >> 30)) + i;
}

constexpr std::uint32_t mt_mix(std::uint32_t cur, std::uint32_t next, std::uint32_t far) noexcept {
  const std::uint32_t y = (cur & kMtUpper) | (next & kMtLower);
  return far ^ (y >> 1) ^ ((y & 1U) ? kMtMatrixA : 0U);
}

constexpr std::uint32_t mt_temper(std::uint32_t y) noexcept {
  y ^= y >> 11;
  y ^= (y << 7) & 0x9d2c5680U;
  y ^= (y << 15) & 0xefc60000U;
  y ^= y >> 18;
  return y;
}

}  // namespace

Mt19937::Mt19937(std::uint64_t seed) {
  mt_[0] = static_cast<std::uint32_t>(seed);
  for (std::uint32_t i = 1; i < kStateSize; ++i) mt_[i] = mt_init_step(mt_[i - 1], i);
}

void Mt19937::twist() {
  constexpr std::size_t kSplit = kStateSize - kShift;
  std::size_t i = 0;
  for (; i < kSplit; ++i) mt_[i] = mt_mix(mt_[i], mt_[i + 1], mt_[i + kShift]);
  for (; i < kStateSize - 1; ++i) mt_[i] = mt_mix(mt_[i], mt_[i + 1], mt_[i - kSplit]);
  mt_[i] = mt_mix(mt_[i], mt_[0], mt_[i - kSplit]);
  index_ = 0;
}

void mt19937_prefix(std::uint64_t seed, std::span<std::uint32_t> out) {
  constexpr std::size_t kMaxPrefix = Mt19937::kStateSize - Mt19937::kShift;
  if (out.size() > kMaxPrefix) {
    throw Error(Errc::InvalidArgument, "mt19937_prefix supports at most 227 words");
  }
  // Word i of the first twist reads only mt[i], mt[i+1] and mt[i+397] of
  // the freshly seeded state, so nothing past index k+397 is needed.
  std::array<std::uint32_t, Mt19937::kStateSize> mt;
  const std::size_t needed = out.size() + Mt19937::kShift;
  mt[0] = static_cast<std::uint32_t>(seed);
  for (std::uint32_t i = 1; i < needed; ++i) mt[i] = mt_init_step(mt[i - 1], i);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mt_temper(mt_mix(mt[i], mt[i + 1], mt[i + Mt19937::kShift]));
  }
}

// ---------------------------------------------------------------------------
// Philox4x32-10
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53U;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57U;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9U;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85U;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = std::uint64_t{a} * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

namespace {

std::array<std::uint32_t, 4> philox_block(std::uint64_t key, std::uint64_t block) noexcept {
  return philox4x32_10(
      {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0U, 0U},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
}

std::uint64_t philox_word(const std::array<std::uint32_t, 4>& block, std::uint64_t counter) {
  const std::size_t lane = (counter & 1U) * 2;
  return (std::uint64_t{block[lane + 1]} << 32) | block[lane];
}

}  // namespace

std::uint64_t PhiloxCounter::at(std::uint64_t key, std::uint64_t counter) noexcept {
  return philox_word(philox_block(key, counter >> 1), counter);
}

std::uint64_t PhiloxCounter::next() {
  const std::uint64_t block_index = counter_ >> 1;
  if (block_index != cached_block_) {
    block_ = philox_block(key_, block_index);
    cached_block_ = block_index;
  }
  return philox_word(block_, counter_++);
}

// ---------------------------------------------------------------------------
// AES-128-CTR
// ---------------------------------------------------------------------------

struct AesCtrKeystream::Impl {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Impl() { EVP_CIPHER_CTX_free(ctx); }
};

AesCtrKeystream::AesCtrKeystream(const AesKey& key, const AesBlock& initial_counter)
    : impl_(std::make_unique<Impl>()) {
  impl_->ctx = EVP_CIPHER_CTX_new();
  if (impl_->ctx == nullptr ||
      EVP_EncryptInit_ex(impl_->ctx, EVP_aes_128_ctr(), nullptr, key.data(),
                         initial_counter.data()) != 1) {
    throw Error(Errc::InvalidArgument, "AES-128-CTR initialisation failed");
  }
}

AesCtrKeystream::~AesCtrKeystream() = default;
AesCtrKeystream::AesCtrKeystream(AesCtrKeystream&&) noexcept = default;
AesCtrKeystream& AesCtrKeystream::operator=(AesCtrKeystream&&) noexcept = default;

void AesCtrKeystream::fill(std::span<std::uint8_t> out) {
  static constexpr std::array<std::uint8_t, 4096> kZeros{};
  while (!out.empty()) {
    const std::size_t chunk = std::min(out.size(), kZeros.size());
    int written = 0;
    if (EVP_EncryptUpdate(impl_->ctx, out.data(), &written, kZeros.data(),
                          static_cast<int>(chunk)) != 1 ||
        written != static_cast<int>(chunk)) {
      throw Error(Errc::InvalidArgument, "AES-128-CTR keystream generation failed");
    }
    out = out.subspan(chunk);
  }
}

// ---------------------------------------------------------------------------
// CSPRNG
// ---------------------------------------------------------------------------

namespace {

AesKey fresh_key(const SeedEnvironment& env) {
  AesKey key{};
  read_os_entropy(key, env);
  return key;
}

}  // namespace

CsprngCtr::CsprngCtr(SeedEnvironment env) : env_(std::move(env)), stream_(fresh_key(env_)) {}

void CsprngCtr::rekey() {
  stream_ = AesCtrKeystream(fresh_key(env_));
  pos_ = kBufferWords;
  since_rekey_ = 0;
  ++rekeys_;
}

void CsprngCtr::refill() {
  std::array<std::uint8_t, kBufferWords * 8> bytes;
  stream_.fill(bytes);
  for (std::size_t w = 0; w < kBufferWords; ++w) {
    std::uint64_t v = 0;
    for (std::size_t b = 0; b < 8; ++b) v |= std::uint64_t{bytes[w * 8 + b]} << (8 * b);
    buffer_[w] = v;
  }
  pos_ = 0;
}

std::uint64_t CsprngCtr::next() {
  if (since_rekey_ == kCsprngReseedInterval) rekey();
  if (pos_ == kBufferWords) refill();
  ++since_rekey_;
  return buffer_[pos_++];
}

// ---------------------------------------------------------------------------
// GeneratorHandle
// ---------------------------------------------------------------------------

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::MT19937: return "mt19937";
    case Algorithm::PhiloxCounter: return "philox";
    case Algorithm::WeakLCG: return "lcg";
    case Algorithm::CsprngCtr: return "csprng";
  }
  return "unknown";
}

std::string_view to_string(SecurityClass cls) noexcept {
  switch (cls) {
    case SecurityClass::Cryptographic: return "cryptographic";
    case SecurityClass::Statistical: return "statistical";
    case SecurityClass::Weak: return "weak";
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept {
  for (auto a : {Algorithm::MT19937, Algorithm::PhiloxCounter, Algorithm::WeakLCG,
                 Algorithm::CsprngCtr}) {
    if (name == to_string(a)) return a;
  }
  return std::nullopt;
}

SecurityClass classify(Algorithm algorithm, SeedKind seed) noexcept {
  if (algorithm == Algorithm::CsprngCtr && seed == SeedKind::OsEntropy) {
    return SecurityClass::Cryptographic;
  }
  if (algorithm == Algorithm::WeakLCG || seed == SeedKind::SystemTime ||
      seed == SeedKind::Constant) {
    return SecurityClass::Weak;
  }
  return SecurityClass::Statistical;
}

GeneratorHandle::GeneratorHandle(Algorithm algorithm, SeedSource source,
                                 std::optional<std::uint64_t> seed, Engine engine)
    : algorithm_(algorithm), source_(std::move(source)), seed_(seed), engine_(std::move(engine)) {}

GeneratorHandle::Engine GeneratorHandle::make_engine(Algorithm algorithm, std::uint64_t seed) {
  switch (algorithm) {
    case Algorithm::MT19937: return Mt19937(seed);
    case Algorithm::PhiloxCounter: return PhiloxCounter(seed);
    case Algorithm::WeakLCG: return WeakLcg(seed);
    case Algorithm::CsprngCtr: break;
  }
  throw Error(Errc::InsecureSeed, "CsprngCtr cannot be built from a concrete seed");
}

GeneratorHandle GeneratorHandle::create(Algorithm algorithm, const SeedSource& source,
                                        const SeedEnvironment& env) {
  validate(source);
  if (algorithm == Algorithm::CsprngCtr) {
    if (kind_of(source) != SeedKind::OsEntropy) {
      throw Error(Errc::InsecureSeed, "CsprngCtr requires an OS entropy seed, got " +
                                          std::string(to_string(kind_of(source))));
    }
    return GeneratorHandle(algorithm, source, std::nullopt, CsprngCtr(env));
  }
  const std::uint64_t seed = seed_from_source(source, env);
  return GeneratorHandle(algorithm, source, seed, make_engine(algorithm, seed));
}

GeneratorHandle GeneratorHandle::from_seed(Algorithm algorithm, std::uint64_t seed,
                                           std::optional<SeedSource> provenance) {
  SeedSource source = provenance.value_or(UserProvided{seed});
  validate(source);
  if (algorithm == Algorithm::CsprngCtr) {
    throw Error(Errc::InsecureSeed, "CsprngCtr cannot be built from a concrete seed");
  }
  return GeneratorHandle(algorithm, std::move(source), seed, make_engine(algorithm, seed));
}

SecurityClass GeneratorHandle::security_class() const noexcept {
  return classify(algorithm_, kind_of(source_));
}

std::uint64_t GeneratorHandle::next_u64() {
  return std::visit(
      [this](auto& engine) -> std::uint64_t {
        using T = std::decay_t<decltype(engine)>;
        if constexpr (std::is_same_v<T, Mt19937>) {
          const std::uint64_t lo = engine.next();
          const std::uint64_t hi = engine.next();
          draws_ += 2;
          return (hi << 32) | lo;
        } else {
          ++draws_;
          return engine.next();
        }
      },
      engine_);
}

void GeneratorHandle::reseed(const SeedSource& source, const SeedEnvironment& env) {
  *this = create(algorithm_, source, env);
}

namespace {

template <typename EngineT>
EngineT& expect_engine(std::variant<Mt19937, PhiloxCounter, WeakLcg, CsprngCtr>& engine,
                       Algorithm actual, Algorithm wanted) {
  if (actual != wanted) {
    throw Error(Errc::InvalidArgument, "handle runs " + std::string(to_string(actual)) +
                                           ", not " + std::string(to_string(wanted)));
  }
  return std::get<EngineT>(engine);
}

}  // namespace

std::uint32_t mt19937_next(GeneratorHandle& handle) {
  auto& e = expect_engine<Mt19937>(handle.engine_, handle.algorithm_, Algorithm::MT19937);
  ++handle.draws_;
  return e.next();
}

std::uint64_t philox_next(GeneratorHandle& handle) {
  auto& e = expect_engine<PhiloxCounter>(handle.engine_, handle.algorithm_,
                                         Algorithm::PhiloxCounter);
  ++handle.draws_;
  return e.next();
}

std::uint64_t csprng_next(GeneratorHandle& handle) {
  auto& e = expect_engine<CsprngCtr>(handle.engine_, handle.algorithm_, Algorithm::CsprngCtr);
  ++handle.draws_;
  return e.next();
}

std::uint64_t weak_lcg_next(GeneratorHandle& handle) {
  auto& e = expect_engine<WeakLcg>(handle.engine_, handle.algorithm_, Algorithm::WeakLCG);
  ++handle.draws_;
  return e.next();
}

}  // namespace rngsentinel
