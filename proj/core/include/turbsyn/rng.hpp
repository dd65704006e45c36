#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace turbsyn {

// Counter-based deterministic generator. Streams are keyed by mixing an
// arbitrary number of 64-bit words (seed, video id, frame, mode, purpose),
// so any (key...) tuple names a reproducible stream independent of call
// order elsewhere in the program. Same binary + same key = same bits.
class Rng {
 public:
  explicit Rng(uint64_t state) : state_(mix(state ^ 0x9e3779b97f4a7c15ull)) {}

  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  template <typename... Words>
  static uint64_t key(uint64_t first, Words... rest) {
    uint64_t h = mix(first);
    ((h = mix(h ^ mix(static_cast<uint64_t>(rest)))), ...);
    return h;
  }

  static uint64_t hash_string(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Picks an index in [0, n).
  uint64_t next_below(uint64_t n) {
    // Rejection sampling keeps the draw exactly uniform.
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; avoids library distributions so the
  // byte stream is identical across standard-library implementations.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Stream purposes; keeps independent uses of the same (seed, video, frame)
// triple from colliding.
enum class StreamTag : uint64_t {
  kSeedInit = 1,
  kSeedInnovation = 2,
  kDictionary = 3,
  kParamSampler = 4,
  kImageNoise = 5,
  kHoldout = 6,
};

inline Rng make_stream(uint64_t master_seed, uint64_t video_id, uint64_t frame,
                       uint64_t mode, StreamTag tag) {
  return Rng(Rng::key(master_seed, video_id, frame, mode,
                      static_cast<uint64_t>(tag)));
}

}  // namespace turbsyn
