// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace resact {

/// Raised when tensor shapes do not line up. The message names the offending
/// site (layer index, network, batch field) so failures are actionable.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a loss, gradient or parameter stops being finite.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Eigen's vectorized kernels peel loops according to buffer alignment, so
// storage must be aligned the same way every time or sums come out in a
// different order from run to run.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major array of doubles. Rank-1 tensors behave as a single row
/// when viewed as a matrix, so one code path serves vectors and batches.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != element_count(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape product " +
                       std::to_string(element_count(shape_)));
    }
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, 0.0); }

  [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
  [[nodiscard]] std::size_t rank() const { return shape_.size(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::size_t rows() const {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : shape_[0];
  }
  [[nodiscard]] std::size_t cols() const {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? shape_[0] : data_.size() / shape_[0];
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  [[nodiscard]] std::span<double> values() { return data_; }
  [[nodiscard]] std::span<const double> values() const { return data_; }

  [[nodiscard]] std::span<double> row(std::size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  [[nodiscard]] std::vector<double> row_vector(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }

  [[nodiscard]] MatrixMap mat() {
    return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }
  [[nodiscard]] ConstMatrixMap mat() const {
    return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
  }

  [[nodiscard]] bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  [[nodiscard]] bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += alpha * other
  void axpy(double alpha, const Tensor& other) {
    require_same_shape(other, "tensor axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
  }

  [[nodiscard]] double squared_norm() const {
    return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0);
  }

  void require_same_shape(const Tensor& other, const std::string& site) const {
    if (shape_ != other.shape_) {
      throw ShapeError(site + ": shape " + shape_string() + " vs " + other.shape_string());
    }
  }

  [[nodiscard]] std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return 0;
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive");
      n *= d;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  AlignedDoubles data_;
};

/// Horizontally stacks batches with matching row counts.
inline Tensor concat_cols(std::initializer_list<const Tensor*> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    if (rows == 0) rows = p->rows();
    if (p->rows() != rows) {
      throw ShapeError("concat_cols: row count " + std::to_string(p->rows()) + " vs " +
                       std::to_string(rows));
    }
    cols += p->cols();
  }
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const Tensor* p : parts) {
      auto src = p->row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += p->cols();
    }
  }
  return out;
}

/// Column slice [begin, begin + width) of a batch.
inline Tensor slice_cols(const Tensor& t, std::size_t begin, std::size_t width) {
  if (begin + width > t.cols()) throw ShapeError("slice_cols: range exceeds column count");
  Tensor out = Tensor::matrix(t.rows(), width);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto src = t.row(r).subspan(begin, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

/// Promotes a rank-1 tensor to a 1 x n batch; leaves matrices alone.
inline Tensor as_batch(const Tensor& t) {
  if (t.rank() == 2) return t;
  return Tensor::matrix(1, t.size(), std::vector<double>(t.values().begin(), t.values().end()));
}

inline Tensor from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ShapeError("from_rows: empty batch");
  const std::size_t cols = rows.front().size();
  Tensor out = Tensor::matrix(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ShapeError("from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), out.row(r).begin());
  }
  return out;
}

}  // namespace resact
