#pragma once

// Counter-based random streams. A stream is keyed by a seed plus up to
// three stream identifiers (cell index, replicate index, ...); draws
// within a stream are sequential. Streams with distinct keys are
// independent for practical purposes, so Monte Carlo loops keyed by
// replicate index produce identical results for any worker count.

#include <cmath>
#include <cstdint>

namespace bgadj {

namespace detail {

inline std::uint64_t splitmix_fin(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t k1 = 0, std::uint64_t k2 = 0,
                     std::uint64_t k3 = 0) {
    std::uint64_t s = detail::splitmix_fin(seed + detail::kGolden);
    s = detail::splitmix_fin(s ^ (k1 + detail::kGolden));
    s = detail::splitmix_fin(s ^ (k2 + detail::kGolden));
    s = detail::splitmix_fin(s ^ (k3 + detail::kGolden));
    state_ = s;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::splitmix_fin(state_);
  }

  /// Uniform on (0,1].
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Pair of independent standard normals (Box-Muller).
  void normal_pair(double& a, double& b) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    a = r * std::cos(t);
    b = r * std::sin(t);
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double a, b;
    normal_pair(a, b);
    cached_ = b;
    have_cached_ = true;
    return a;
  }

  /// Fill `out` with `n` standard normals.
  void normals(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
  }

 private:
  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace bgadj
