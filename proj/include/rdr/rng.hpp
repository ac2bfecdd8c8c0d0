#pragma once

// Deterministic random streams.
//
// Every stochastic kernel draws from a RandomStream derived from the lineage
// (master_seed, question_id, view_index). Both the lineage hash and the
// generator are fixed algorithms implemented here, so a given lineage yields
// the same draw sequence on every platform, in every run, regardless of
// evaluation order.
//
// Lineage hash (64-bit): start from mix64(master_seed), absorb the id length,
// each id byte, and finally the view index, applying mix64 after each
// absorption. mix64 is the splitmix64 finalizer.
//
// Generator: xoshiro256++ (Blackman & Vigna), state initialized from the
// lineage hash via a splitmix64 chain.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>

namespace rdr {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct StreamLineage {
  std::uint64_t master_seed = 0;
  std::string question_id;
  std::uint32_t view_index = 0;

  bool operator==(const StreamLineage&) const = default;
};

constexpr std::uint64_t hash_lineage(std::uint64_t master_seed,
                                     std::string_view question_id,
                                     std::uint64_t view_index) noexcept {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ static_cast<std::uint64_t>(question_id.size()));
  for (char c : question_id) {
    h = mix64(h ^ static_cast<unsigned char>(c));
  }
  // Distinct constant keeps the view-index domain separate from id bytes.
  h = mix64(h ^ (view_index + 0xd1b54a32d192ed03ULL));
  return h;
}

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::string_view question_id,
               std::uint32_t view_index)
      : lineage_{master_seed, std::string(question_id), view_index} {
    seed_state(hash_lineage(master_seed, question_id, view_index));
  }

  static RandomStream from_raw_seed(std::uint64_t seed) {
    RandomStream s(seed, "", 0);
    s.seed_state(mix64(seed));
    return s;
  }

  const StreamLineage& lineage() const { return lineage_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_in(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform in [0, n), unbiased via rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool next_bool() { return (next_u64() >> 63) != 0; }

  // Two independent standard normal deviates (Box-Muller).
  std::pair<double, double> next_normal_pair() {
    double u1 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

 private:
  void seed_state(std::uint64_t h) {
    s_[0] = mix64(h);
    s_[1] = mix64(s_[0]);
    s_[2] = mix64(s_[1]);
    s_[3] = mix64(s_[2]);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  StreamLineage lineage_;
  std::uint64_t s_[4] = {};
};

inline RandomStream derive_stream(std::uint64_t master_seed,
                                  std::string_view question_id,
                                  std::uint32_t view_index) {
  return RandomStream(master_seed, question_id, view_index);
}

}  // namespace rdr
