#include "igap/rng.hpp"

#include <cmath>

namespace igap {

std::uint64_t Rng::mix(std::uint64_t key, std::uint64_t ctr) {
  // splitmix64 finalizer over key + ctr * golden ratio
  std::uint64_t z = key + 0x9E3779B97F4A7C15ull * (ctr + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below: n must be positive");
  const std::uint64_t limit = n * (UINT64_MAX / n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 6.283185307179586476925287 * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

Rng Rng::derive(std::string_view tag, std::uint64_t a, std::uint64_t b) const {
  std::uint64_t h = 0xcbf29ce484222325ull ^ key_;
  auto eat_byte = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ull;
  };
  for (char c : tag) eat_byte(static_cast<unsigned char>(c));
  for (int i = 0; i < 8; ++i) eat_byte(static_cast<unsigned char>((a >> (8 * i)) & 0xff));
  for (int i = 0; i < 8; ++i) eat_byte(static_cast<unsigned char>((b >> (8 * i)) & 0xff));
  return Rng(h);
}

std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n, std::uint32_t k) {
  if (k > n) throw ContractError("sample_without_replacement: k > n");
  std::vector<std::uint32_t> ids(n);
  for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

}  // namespace igap
