#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gemmlab {

// Dense row-major single-precision matrix. Element (i, j) lives at
// data()[i * cols() + j].
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  float operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  // Bitwise equality (distinguishes -0.0 from 0.0, NaN payloads compare by bits).
  bool bitwise_equal(const Matrix& other) const noexcept;

  // FNV-1a over dimensions and raw element bytes.
  std::uint64_t fingerprint() const noexcept;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<float> data_;
};

// SplitMix64 (Steele, Lea, Flood 2014):
//   state += 0x9E3779B97F4A7C15
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  // Top 24 bits scaled by 2^-24: exactly representable in float, in [0, 1).
  float next_unit_float() noexcept;

 private:
  std::uint64_t state_;
};

// n x n matrix filled row by row from SplitMix64(seed).
Matrix random_matrix(std::size_t n, std::uint64_t seed);
Matrix identity_matrix(std::size_t n);
Matrix zero_matrix(std::size_t n);

// Triple loop, inner sum over k ascending in float. This accumulation order
// is the reference every other backend is checked against.
Matrix matmul_sequential(const Matrix& a, const Matrix& b);

struct ComparisonReport {
  double max_abs_diff = 0.0;
  double max_rel_diff = 0.0;
  std::pair<std::size_t, std::size_t> worst_index{0, 0};
};

inline constexpr double kRelativeFloor = 1e-6;

// Relative difference uses |c1 - c2| / max(|c1|, kRelativeFloor).
// worst_index points at the element with the largest relative difference.
ComparisonReport compare(const Matrix& expected, const Matrix& actual);

}  // namespace gemmlab
