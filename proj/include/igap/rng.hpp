#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "igap/error.hpp"

namespace igap {

// Counter-based generator: out = mix(key, ctr). Every stochastic stage derives
// its own stream from (master key, purpose tag), so reordering stages cannot
// change the draws any stage sees.
class Rng {
public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix(key_, ctr_++); }

  // [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n);

  // standard normal, Box-Muller
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // New independent stream keyed by (this key, tag, a, b).
  Rng derive(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) const;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return ctr_; }

private:
  static std::uint64_t mix(std::uint64_t key, std::uint64_t ctr);

  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// First k elements of a seeded partial Fisher-Yates over [0, n).
std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n, std::uint32_t k);

}  // namespace igap
