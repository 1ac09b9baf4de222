#pragma once

// Deterministic random number generation. Every stochastic step in the
// project draws from Rng so that a run is a pure function of its seeds;
// std:: distributions are implementation-defined and are not used.

#include <cstdint>
#include <cstring>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace pnv {

inline uint64_t splitmix64_next(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Collapses a list of values (seed components) into a single stream seed.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t state = 0x6a09e667f3bcc908ULL;
  for (uint64_t p : parts) {
    state ^= splitmix64_next(state) ^ p;
    splitmix64_next(state);
  }
  return splitmix64_next(state);
}

inline uint64_t double_bits(double v) {
  uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  return u;
}

// xoshiro256** seeded through splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform in [0, n). Rejection keeps the draw unbiased.
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  int next_int(int n) { return static_cast<int>(next_below(static_cast<uint64_t>(n))); }

  // Standard normal via Box-Muller; the spare keeps draws paired and cheap.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream; child state does not advance this stream.
  Rng fork(uint64_t stream) const {
    return Rng(mix_seed({s_[0], s_[1], s_[2], s_[3], stream}));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = rng.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices from [0, n), order of first selection. Floyd's method.
inline std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k, Rng& rng) {
  if (k > n || k < 0) throw std::invalid_argument("sample_without_replacement: k out of range");
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(k));
  for (int64_t j = n - k; j < n; ++j) {
    const int64_t t = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(j) + 1));
    bool seen = false;
    for (int64_t x : out) {
      if (x == t) {
        seen = true;
        break;
      }
    }
    out.push_back(seen ? j : t);
  }
  return out;
}

}  // namespace pnv
