#include "zshot/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "zshot/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace zshot {

namespace {

#if defined(__GLIBC__)
// Large activation buffers are freed and reallocated every step; keeping them
// on the heap avoids an mmap/munmap pair and fresh page faults each time.
const bool heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("tensor value count " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged tensor literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::string Tensor::shape_str() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) throw ContractError("item() on non-scalar tensor " + shape_str());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

namespace kernels {

namespace {

// o[0..r) += Σ_t a_t · b_t[0..r) over four rows at a time.
inline void axpy4(double* __restrict o, const double* __restrict b0, const double* __restrict b1,
                  const double* __restrict b2, const double* __restrict b3, double a0, double a1, double a2,
                  double a3, std::size_t r) {
  for (std::size_t j = 0; j < r; ++j) o[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
}

inline void axpy1(double* __restrict o, const double* __restrict b, double a, std::size_t r) {
  for (std::size_t j = 0; j < r; ++j) o[j] += a * b[j];
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
  }
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  Tensor out(p, r);
  const double* bd = b.data();
  for (std::size_t i = 0; i < p; ++i) {
    double* o = out.data() + i * r;
    const double* ar = a.data() + i * q;
    std::size_t k = 0;
    for (; k + 4 <= q; k += 4)
      axpy4(o, bd + k * r, bd + (k + 1) * r, bd + (k + 2) * r, bd + (k + 3) * r, ar[k], ar[k + 1], ar[k + 2],
            ar[k + 3], r);
    for (; k < q; ++k) axpy1(o, bd + k * r, ar[k], r);
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt shape mismatch: " + a.shape_str() + " x " + b.shape_str() + "^T");
  }
  const std::size_t p = a.rows(), q = a.cols(), r = b.rows();
  Tensor out(p, r);
  for (std::size_t i = 0; i < p; ++i) {
    const double* arow = a.data() + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double* brow = b.data() + j * q;
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) s += arow[k] * brow[k];
      out(i, j) = s;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn shape mismatch: " + a.shape_str() + "^T x " + b.shape_str());
  }
  const std::size_t n = a.rows(), p = a.cols(), r = b.cols();
  Tensor out(p, r);
  const double* ad = a.data();
  const double* bd = b.data();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    for (std::size_t i = 0; i < p; ++i)
      axpy4(out.data() + i * r, bd + k * r, bd + (k + 1) * r, bd + (k + 2) * r, bd + (k + 3) * r, ad[k * p + i],
            ad[(k + 1) * p + i], ad[(k + 2) * p + i], ad[(k + 3) * p + i], r);
  }
  for (; k < n; ++k)
    for (std::size_t i = 0; i < p; ++i) axpy1(out.data() + i * r, bd + k * r, ad[k * p + i], r);
  return out;
}

Tensor sq_dists(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw DimensionError("sq_dists: " + a.shape_str() + " vs " + b.shape_str());
  // ‖a_i‖² + ‖b_j‖² − 2 a_i·b_j through the vectorisable matmul; clamped at 0
  // against cancellation.
  Tensor out = matmul(a, transpose(b));
  std::vector<double> nb(b.rows());
  for (std::size_t j = 0; j < b.rows(); ++j) nb[j] = dot(b.row(j), b.row(j));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double na = dot(a.row(i), a.row(i));
    double* o = out.data() + i * out.cols();
    for (std::size_t j = 0; j < out.cols(); ++j) o[j] = std::max(0.0, na + nb[j] - 2.0 * o[j]);
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> idx) {
  Tensor out(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows()) throw DimensionError("gather_rows index out of range");
    std::copy_n(a.data() + idx[i] * a.cols(), a.cols(), out.data() + i * a.cols());
  }
  return out;
}

Tensor softmax_rows(const Tensor& x, double scale) {
  if (!(scale > 0.0)) throw ContractError("softmax_rows: scale must be positive");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto in = x.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp((in[j] - mx) / scale);
      z += o[j];
    }
    for (auto& v : o) v /= z;
  }
  return out;
}

Tensor normalize_rows(const Tensor& x, double eps) {
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = out.row(i);
    const double n = norm(r);
    if (n > eps)
      for (auto& v : r) v /= n;
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  if (x.rows() > 0)
    for (auto& v : out.values()) v /= static_cast<double>(x.rows());
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace kernels

}  // namespace zshot
