#pragma once

// Deterministic hashing and sampling primitives. Every random-looking choice
// in the toolkit is derived from these, so runs reproduce bit-exactly across
// platforms. Generator: splitmix64-v1 (Steele et al.), string hash: FNV-1a 64.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace freqrank {

inline constexpr const char* kGeneratorName = "splitmix64-v1";

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = 14695981039346656037ULL) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64_mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace detail {
constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return splitmix64_mix(h ^ v);
}
constexpr std::uint64_t absorb(std::uint64_t h, std::string_view s) {
  return splitmix64_mix(h ^ fnv1a64(s));
}
}  // namespace detail

// Order-sensitive combination of a seed with labeled parts. Labels keep
// independent decision streams (template choice, payload position, Bernoulli
// draws, ...) from colliding.
template <class... Parts>
constexpr std::uint64_t keyed_hash(std::uint64_t seed, const Parts&... parts) {
  std::uint64_t h = splitmix64_mix(seed);
  ((h = detail::absorb(h, parts)), ...);
  return h;
}

// Maps a hash to [0, 1) with 53 bits of precision.
constexpr double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Counter-based splitmix64 stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform draw from [0, n) via Lemire's multiply-shift. The slight bias for
  // astronomically large n is irrelevant here; determinism is the contract.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double unit() { return unit_interval(next()); }

 private:
  std::uint64_t state_;
};

// k distinct indices from [0, n), drawn by partial Fisher-Yates.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k,
                                               SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k < n ? k : n);
  return idx;
}

template <class T>
void deterministic_shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Lowercase base-36 token of fixed width, used for synthetic identifiers.
inline std::string base36_token(std::uint64_t h, int width) {
  static const char* digits = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string out(static_cast<std::size_t>(width), 'a');
  for (int i = 0; i < width; ++i) {
    out[static_cast<std::size_t>(i)] = digits[h % 36];
    h /= 36;
  }
  return out;
}

}  // namespace freqrank
