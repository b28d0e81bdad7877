#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace rngsentinel {

// ---------------------------------------------------------------------------
// Seed provenance
// ---------------------------------------------------------------------------

struct OsEntropy {
  bool operator==(const OsEntropy&) const = default;
};

struct SystemTime {
  std::int64_t resolution_us = 1;
  bool operator==(const SystemTime&) const = default;
};

struct ConstantSeed {
  std::uint64_t value = 0;
  bool operator==(const ConstantSeed&) const = default;
};

/// Seed drawn uniformly from [lo, hi).
struct BoundedRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  bool operator==(const BoundedRange&) const = default;
};

struct UserProvided {
  std::uint64_t value = 0;
  bool operator==(const UserProvided&) const = default;
};

using SeedSource = std::variant<OsEntropy, SystemTime, ConstantSeed, BoundedRange, UserProvided>;

enum class SeedKind { OsEntropy, SystemTime, Constant, BoundedRange, UserProvided };

SeedKind kind_of(const SeedSource& source) noexcept;
std::string_view to_string(SeedKind kind) noexcept;

/// Throws InvalidRange for an empty BoundedRange and InvalidArgument for a
/// non-positive SystemTime resolution.
void validate(const SeedSource& source);

constexpr int kSeedWidthBits = 64;

/// Bits of uncertainty an observer has about the seed. For SystemTime this
/// depends on how precisely the observer can bound the clock, given as
/// `window_s`.
double effective_entropy_bits(const SeedSource& source, double window_s = 10.0);

/// Where seeds come from. Both hooks are replaceable so tests can pin the
/// clock or point the entropy device at something unreadable.
struct SeedEnvironment {
  std::filesystem::path entropy_device = "/dev/urandom";
  /// Microseconds since the Unix epoch. Empty means std::chrono::system_clock.
  std::function<std::int64_t()> clock_us;

  std::int64_t now_us() const;
};

/// Fills `out` from the entropy device. Throws OsEntropyUnavailable on any
/// open or short-read failure; there is no fallback.
void read_os_entropy(std::span<std::uint8_t> out, const SeedEnvironment& env = {});

std::uint64_t seed_from_source(const SeedSource& source, const SeedEnvironment& env = {});

// ---------------------------------------------------------------------------
// Engines
// ---------------------------------------------------------------------------

/// MT19937 with the reference init_genrand seeding. Only the low 32 bits of
/// a 64-bit seed are used, matching std::mt19937.
class Mt19937 {
 public:
  static constexpr std::size_t kStateSize = 624;
  static constexpr std::size_t kShift = 397;

  explicit Mt19937(std::uint64_t seed = 5489u);

  std::uint32_t next() {
    if (index_ >= kStateSize) twist();
    std::uint32_t y = mt_[index_++];
    y ^= y >> 11;
    y ^= (y << 7) & 0x9d2c5680U;
    y ^= (y << 15) & 0xefc60000U;
    return y ^ (y >> 18);
  }

 private:
  void twist();

  std::array<std::uint32_t, kStateSize> mt_{};
  std::size_t index_ = kStateSize;
};

/// Writes the first `out.size()` MT19937 outputs for `seed` without building
/// the whole state. Only valid for out.size() <= 227.
void mt19937_prefix(std::uint64_t seed, std::span<std::uint32_t> out);

/// Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

/// Counter-based generator over Philox4x32-10. Word c is a pure function of
/// (key, c): block c/2 of the cipher, lanes 0|1 for even c and 2|3 for odd c,
/// the lower-numbered lane in the low half.
class PhiloxCounter {
 public:
  explicit PhiloxCounter(std::uint64_t key) : key_(key) {}

  static std::uint64_t at(std::uint64_t key, std::uint64_t counter) noexcept;

  std::uint64_t next();
  std::uint64_t counter() const noexcept { return counter_; }
  void seek(std::uint64_t counter) noexcept { counter_ = counter; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<std::uint32_t, 4> block_{};
};

/// Textbook 64-bit LCG (Knuth's MMIX constants); returns the full state.
class WeakLcg {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit WeakLcg(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() noexcept {
    state_ = state_ * kMultiplier + kIncrement;
    return state_;
  }

 private:
  std::uint64_t state_;
};

using AesKey = std::array<std::uint8_t, 16>;
using AesBlock = std::array<std::uint8_t, 16>;

/// AES-128 in counter mode. The counter block is a 128-bit big-endian integer.
class AesCtrKeystream {
 public:
  explicit AesCtrKeystream(const AesKey& key, const AesBlock& initial_counter = {});
  ~AesCtrKeystream();
  AesCtrKeystream(AesCtrKeystream&&) noexcept;
  AesCtrKeystream& operator=(AesCtrKeystream&&) noexcept;
  AesCtrKeystream(const AesCtrKeystream&) = delete;
  AesCtrKeystream& operator=(const AesCtrKeystream&) = delete;

  void fill(std::span<std::uint8_t> out);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline constexpr std::uint64_t kCsprngReseedInterval = std::uint64_t{1} << 20;

/// AES-128-CTR keystream keyed from the OS entropy device and rekeyed every
/// kCsprngReseedInterval output words.
class CsprngCtr {
 public:
  explicit CsprngCtr(SeedEnvironment env = {});

  std::uint64_t next();
  void rekey();
  std::uint64_t rekey_count() const noexcept { return rekeys_; }

 private:
  static constexpr std::size_t kBufferWords = 256;

  void refill();

  SeedEnvironment env_;
  AesCtrKeystream stream_;
  std::array<std::uint64_t, kBufferWords> buffer_{};
  std::size_t pos_ = kBufferWords;
  std::uint64_t since_rekey_ = 0;
  std::uint64_t rekeys_ = 0;
};

// ---------------------------------------------------------------------------
// Generator handle
// ---------------------------------------------------------------------------

enum class Algorithm { MT19937, PhiloxCounter, WeakLCG, CsprngCtr };
enum class SecurityClass { Cryptographic, Statistical, Weak };

std::string_view to_string(Algorithm algorithm) noexcept;
std::string_view to_string(SecurityClass cls) noexcept;
std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept;

/// Cryptographic iff CsprngCtr seeded from OS entropy. Weak for the LCG and
/// for clock or constant seeds. Statistical otherwise.
SecurityClass classify(Algorithm algorithm, SeedKind seed) noexcept;

/// A stateful PRNG instance. Single owner: movable, not copyable, and not
/// safe for concurrent use.
class GeneratorHandle {
 public:
  /// Resolves `source` to a concrete seed and builds the engine. CsprngCtr
  /// accepts only OsEntropy and throws InsecureSeed otherwise.
  static GeneratorHandle create(Algorithm algorithm, const SeedSource& source,
                                const SeedEnvironment& env = {});

  /// Builds a deterministic engine from a concrete seed. `provenance` records
  /// where the seed came from; it defaults to UserProvided.
  static GeneratorHandle from_seed(Algorithm algorithm, std::uint64_t seed,
                                   std::optional<SeedSource> provenance = std::nullopt);

  Algorithm algorithm() const noexcept { return algorithm_; }
  const SeedSource& seed_source() const noexcept { return source_; }
  SecurityClass security_class() const noexcept;
  /// Concrete seed; empty for CsprngCtr, whose key never leaves the engine.
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }
  /// Raw engine words produced so far (32-bit words for MT19937).
  std::uint64_t draws_emitted() const noexcept { return draws_; }

  /// Canonical 64-bit draw. MT19937 consumes two words, low word first.
  std::uint64_t next_u64();

  /// Replaces the seed in place, keeping the algorithm.
  void reseed(const SeedSource& source, const SeedEnvironment& env = {});

  friend std::uint32_t mt19937_next(GeneratorHandle& handle);
  friend std::uint64_t philox_next(GeneratorHandle& handle);
  friend std::uint64_t csprng_next(GeneratorHandle& handle);
  friend std::uint64_t weak_lcg_next(GeneratorHandle& handle);

 private:
  using Engine = std::variant<Mt19937, PhiloxCounter, WeakLcg, CsprngCtr>;

  GeneratorHandle(Algorithm algorithm, SeedSource source, std::optional<std::uint64_t> seed,
                  Engine engine);

  static Engine make_engine(Algorithm algorithm, std::uint64_t seed);

  Algorithm algorithm_;
  SeedSource source_;
  std::optional<std::uint64_t> seed_;
  Engine engine_;
  std::uint64_t draws_ = 0;
};

// Algorithm-specific draws; each throws InvalidArgument on a handle of a
// different algorithm.
std::uint32_t mt19937_next(GeneratorHandle& handle);
std::uint64_t philox_next(GeneratorHandle& handle);
std::uint64_t csprng_next(GeneratorHandle& handle);
std::uint64_t weak_lcg_next(GeneratorHandle& handle);

/// Maps a raw word onto [0, 1): word / 2^64 rounded toward zero to the
/// 53-bit double grid, so the result is always strictly below 1.
constexpr double raw_to_unit_interval(std::uint64_t word) noexcept {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace rngsentinel
