#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include <Eigen/Core>

namespace sgm::rng {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Folds an arbitrary list of integer tags into a single stream key.
constexpr std::uint64_t derive(std::uint64_t seed) noexcept { return mix64(seed + kGolden); }

template <typename... Tags>
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, Tags... rest) noexcept {
  return derive(mix64(seed ^ mix64(tag + kGolden)) + kGolden, static_cast<std::uint64_t>(rest)...);
}

inline std::uint64_t derive_named(std::uint64_t seed, std::string_view name) noexcept {
  return derive(seed, hash_name(name));
}

// Counter-based stream: the i-th output is a pure function of (key, i), so
// streams keyed by (seed, particle, step) can be consumed in any order and on
// any thread with identical results.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept {
    counter_ += 1;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  template <typename Out>
  void fill_normal(Out&& out) noexcept {
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal();
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sgm::rng
