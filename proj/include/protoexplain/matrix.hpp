#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "protoexplain/error.hpp"

namespace protoexplain {

// Dense row-major matrix. Rows are exposed as spans so callers never touch
// raw offsets.
template <typename T>
class BasicMatrix {
 public:
  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorKind::Validation, "matrix data size does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;
using MatrixD = BasicMatrix<double>;

template <typename To, typename From>
BasicMatrix<To> matrix_cast(const BasicMatrix<From>& m) {
  std::vector<To> out(m.data().begin(), m.data().end());
  return BasicMatrix<To>(m.rows(), m.cols(), std::move(out));
}

// One spatial activation map laid out (height, width, channels), i.e. the
// per-sample slice of an exported (N, H, W, D) block tensor.
struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;

  FeatureGrid() = default;
  FeatureGrid(std::size_t h, std::size_t w, std::size_t d, float fill = 0.0f)
      : height(h), width(w), channels(d), values(h * w * d, fill) {}
  FeatureGrid(std::size_t h, std::size_t w, std::size_t d,
              std::vector<float> v)
      : height(h), width(w), channels(d), values(std::move(v)) {
    if (values.size() != h * w * d) {
      fail(ErrorKind::Validation, "feature grid data size does not match shape");
    }
  }

  std::size_t cells() const noexcept { return height * width; }

  std::span<float> pixel(std::size_t y, std::size_t x) {
    return {values.data() + (y * width + x) * channels, channels};
  }
  std::span<const float> pixel(std::size_t y, std::size_t x) const {
    return {values.data() + (y * width + x) * channels, channels};
  }
  std::span<const float> cell(std::size_t r) const {
    return {values.data() + r * channels, channels};
  }

  // Cells as rows of an (H*W) x D matrix.
  Matrix as_rows() const { return Matrix(cells(), channels, values); }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

double squared_distance(std::span<const float> a, std::span<const float> b);
double squared_distance(std::span<const float> a, std::span<const double> b);
double dot(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);

}  // namespace protoexplain
