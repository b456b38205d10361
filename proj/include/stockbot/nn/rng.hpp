#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "stockbot/autodiff/tensor.hpp"

namespace stockbot::nn {

/// Seeded random stream. Draws are built from raw 64-bit engine output so
/// results do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection, n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  /// Independent child stream, e.g. one per epoch.
  Rng split(std::uint64_t salt) { return Rng(engine_() ^ (salt * 0x9E3779B97F4A7C15ULL)); }

 private:
  std::mt19937_64 engine_;
};

/// Glorot-uniform block: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline void glorot_fill(ad::Tensor& t, std::size_t row_begin, std::size_t row_end, std::size_t col_begin,
                        std::size_t col_end, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  const std::size_t cols = t.shape().back();
  for (std::size_t r = row_begin; r < row_end; ++r) {
    for (std::size_t c = col_begin; c < col_end; ++c) t[r * cols + c] = rng.uniform(-a, a);
  }
}

/// [rows x cols] matrix made of `blocks` column blocks, each Glorot-initialised
/// as an independent rows x (cols / blocks) matrix.
inline ad::Tensor glorot_blocks(std::size_t rows, std::size_t cols, std::size_t blocks, Rng& rng) {
  ad::Tensor t(ad::Shape{rows, cols});
  const std::size_t w = cols / blocks;
  for (std::size_t b = 0; b < blocks; ++b) glorot_fill(t, 0, rows, b * w, (b + 1) * w, rows, w, rng);
  return t;
}

inline ad::Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) { return glorot_blocks(rows, cols, 1, rng); }

}  // namespace stockbot::nn
