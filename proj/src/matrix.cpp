#include "gemmlab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "gemmlab/errors.hpp"

namespace gemmlab {

namespace {

void require_positive(std::size_t n, const char* what) {
  if (n == 0) throw InvalidDimension(std::string(what) + ": dimension must be >= 1");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : Matrix(rows, cols, std::vector<float>(rows * cols, 0.0f)) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_positive(rows, "Matrix rows");
  require_positive(cols, "Matrix cols");
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix data has " + std::to_string(data_.size()) + " elements, expected " +
                     std::to_string(rows * cols));
  }
}

bool Matrix::bitwise_equal(const Matrix& other) const noexcept {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::uint64_t Matrix::fingerprint() const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::uint64_t dims[2] = {rows_, cols_};
  mix(dims, sizeof(dims));
  mix(data_.data(), data_.size() * sizeof(float));
  return h;
}

std::uint64_t SplitMix64::next() noexcept {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

float SplitMix64::next_unit_float() noexcept {
  return static_cast<float>(next() >> 40) * 0x1.0p-24f;
}

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
  require_positive(n, "random_matrix");
  std::vector<float> values(n * n);
  SplitMix64 rng(seed);
  for (float& v : values) v = rng.next_unit_float();
  return Matrix(n, n, std::move(values));
}

Matrix identity_matrix(std::size_t n) {
  require_positive(n, "identity_matrix");
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

Matrix zero_matrix(std::size_t n) {
  require_positive(n, "zero_matrix");
  return Matrix(n, n);
}

Matrix matmul_sequential(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: A is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ", B is " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  const std::size_t rows = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t cols = b.cols();
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  Matrix c(rows, cols);
  float* pc = c.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      float sum = 0.0f;
      for (std::size_t k = 0; k < inner; ++k) sum += pa[i * inner + k] * pb[k * cols + j];
      pc[i * cols + j] = sum;
    }
  }
  return c;
}

ComparisonReport compare(const Matrix& expected, const Matrix& actual) {
  if (expected.rows() != actual.rows() || expected.cols() != actual.cols()) {
    throw ShapeError("compare: shapes differ");
  }
  ComparisonReport report;
  bool have_worst = false;
  const auto e = expected.data();
  const auto a = actual.data();
  for (std::size_t idx = 0; idx < e.size(); ++idx) {
    const double x = e[idx];
    const double y = a[idx];
    double abs_diff = std::fabs(x - y);
    double rel_diff = abs_diff / std::max(std::fabs(x), kRelativeFloor);
    // NaN anywhere must surface as a failure rather than be skipped by max().
    if (std::isnan(abs_diff)) abs_diff = rel_diff = std::numeric_limits<double>::infinity();
    report.max_abs_diff = std::max(report.max_abs_diff, abs_diff);
    if (!have_worst || rel_diff > report.max_rel_diff) {
      report.max_rel_diff = rel_diff;
      report.worst_index = {idx / expected.cols(), idx % expected.cols()};
      have_worst = true;
    }
  }
  return report;
}

}  // namespace gemmlab
