#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace apm {

/// Identifier recorded in every output. Bump it whenever any stream derivation
/// below changes, since it pins the bit-exact meaning of a seed.
inline constexpr std::string_view kGeneratorId = "splitmix64-ctr/1";

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t key, std::uint64_t value) noexcept {
  return mix64(key ^ mix64(value + kGolden));
}

/// 53-bit uniform in [0,1) from a 64-bit word; platform independent.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stream identity for one replica of one experiment.
///
/// The stream key is mix64(mix64(master) ^ mix64(replica + golden)); distinct
/// replica indices give unrelated keys and identical specs give identical keys.
struct SeedSpec {
  std::uint64_t master = 0;
  std::uint64_t replica = 0;
  std::string generator{kGeneratorId};

  [[nodiscard]] std::uint64_t stream_key() const noexcept {
    return hash_combine(mix64(master), replica);
  }
  /// Key for a named sub-stream (field values, pattern draw, ...) of this replica.
  [[nodiscard]] std::uint64_t substream(std::uint64_t tag) const noexcept {
    return hash_combine(stream_key(), tag);
  }
  [[nodiscard]] SeedSpec with_replica(std::uint64_t index) const {
    return SeedSpec{master, index, generator};
  }
  /// Derives an independent master seed for a nested experiment stage.
  [[nodiscard]] SeedSpec child(std::uint64_t tag) const {
    return SeedSpec{hash_combine(master ^ 0xA5A5A5A5A5A5A5A5ULL, tag), 0, generator};
  }
  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Sequential SplitMix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t key) noexcept : state_(key) {}

  std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }
  double uniform() noexcept { return to_unit(next()); }
  bool bernoulli(double p) noexcept { return uniform() < p; }
  /// Unit-rate exponential draw.
  double exponential() noexcept { return -std::log1p(-uniform()); }
  /// Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

}  // namespace apm
