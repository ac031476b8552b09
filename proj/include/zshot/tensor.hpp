#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace zshot {

/// Dense row-major 2-D block of doubles. Row and column vectors are 1×q and
/// p×1 tensors; scalars are 1×1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  Tensor(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const;

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  /// Scalar value of a 1×1 tensor.
  double item() const;
  bool all_finite() const;
  void fill(double v);

  bool operator==(const Tensor& o) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Plain (non-recording) kernels shared by the tape ops and by inference code.
namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// aᵀ · b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Pairwise squared distances between rows, p×r.
Tensor sq_dists(const Tensor& a, const Tensor& b);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx);
Tensor softmax_rows(const Tensor& x, double scale);
/// Unit-L2 rows; zero rows stay zero.
Tensor normalize_rows(const Tensor& x, double eps = 1e-12);
Tensor mean_rows(const Tensor& x);
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

}  // namespace kernels

}  // namespace zshot
