#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "zshot/tensor.hpp"

namespace zshot {

/// A named learnable tensor. Gradients from Tape::backward accumulate into
/// `grad`; a frozen parameter enters the tape as a constant and never
/// receives a gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v);

  void zero_grad();
  bool has_grad() const { return !grad.empty(); }
};

class Tape;

/// Handle to a value recorded on a Tape. Valid until the tape is reset.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
};

/// Dynamic tape: every primitive op appends one node holding its output and
/// a closure that pushes the output gradient to its inputs. backward() walks
/// the nodes once, newest first, then resets the tape.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a parameter. Frozen parameters record as constants.
  Var param(Parameter& p);
  /// Appends an op node. `inputs` decide whether the node needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient buffer for `v` during backward, or nullptr if `v` needs none.
  Tensor* grad_if(Var v);

  /// Seeds d(loss)/d(loss) = 1, runs every recorded closure once in reverse
  /// order, accumulates leaf gradients into their Parameters, then resets.
  void backward(Var loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }
  /// Number of closures invoked by the most recent backward().
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    BackwardFn back;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::size_t last_visits_ = 0;
};

// ---- differentiable primitives -------------------------------------------

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

/// Elementwise with 2-D broadcasting: each dimension must match or be 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var leaky_relu(Var a, double slope = 0.2);

Var sum(Var a);
Var mean(Var a);
/// Column sums / means as a 1×q row.
Var sum_rows(Var a);
Var mean_rows(Var a);
/// Row sums as a p×1 column.
Var sum_cols(Var a);

/// Row-wise softmax of x / scale, stabilised by the row maximum.
Var softmax_rows(Var x, double scale = 1.0);
Var log_softmax_rows(Var x, double scale = 1.0);
Var normalize_rows(Var x, double eps = 1e-12);

Var gather_rows(Var a, std::span<const std::size_t> idx);
/// Row i of the output is the mean of rows groups[i] of `a`.
Var pool_rows(Var a, const std::vector<std::vector<std::size_t>>& groups);
/// Output p×1 with entry i = a(i, cols[i]).
Var pick(Var a, std::span<const std::size_t> cols);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
/// Repeats a 1×q row n times.
Var replicate_rows(Var a, std::size_t n);
/// Pairwise squared Euclidean distances, p×r for a: p×d, b: r×d.
Var sq_dists(Var a, Var b);
/// Elementwise mean over bandwidths b of exp(−x/b).
Var gaussian_kernel(Var sq_dist, std::span<const double> bandwidths);

/// Mean cross-entropy of row-wise softmax(logits) against integer labels.
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace zshot
