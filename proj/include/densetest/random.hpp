#pragma once

#include <cstdint>
#include <random>

#include "densetest/numerics.hpp"

namespace densetest {

/// Per-stream generator. Stream r of a campaign is seeded with base_seed + r;
/// the 64-bit seed is expanded through seed_seq so adjacent seeds decorrelate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    engine_.seed(seq);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }  // [0, 1)
  std::uint64_t bits() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline Vector standard_normal_vector(std::size_t n, Rng& rng) {
  Vector out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

/// n iid rows from N(0, LLᵀ): row i = L g_i with g_i standard normal.
inline Matrix sample_gaussian_rows(const LowerTriangular& l, std::size_t n, Rng& rng) {
  const std::size_t p = l.dim();
  Matrix x(n, p);
  Vector g(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : g) v = rng.normal();
    auto xi = x.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      xi[j] = dot(l.matrix().row(j).first(j + 1), std::span<const double>(g).first(j + 1));
    }
  }
  return x;
}

}  // namespace densetest
