#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "zshot/autodiff.hpp"

namespace zshot {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 5.0;
};

/// Adaptive-moment optimizer over a fixed parameter list. Moments are
/// allocated on construction and stay shape-matched to their parameters.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  /// Applies one update from the accumulated Parameter::grad values, then
  /// zeroes them. Frozen parameters are skipped. Throws NumericalError naming
  /// the first parameter with a non-finite gradient.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  /// Norm of the gradient seen by the last step, before clipping.
  double last_grad_norm() const { return last_norm_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  double last_norm_ = 0.0;
};

/// Worst elementwise relative error between tape gradients and central
/// differences of `loss` with respect to every entry of `params`. The
/// denominator is max(|g|, |g_fd|, 1e-8). Each entry is differenced with
/// steps h, h/10 and h/100 and the best agreement counts, so a ReLU-style kink
/// inside one step does not register as a gradient error.
double finite_diff_check(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                         double h = 1e-5);

/// Single-input form: `f` maps a recorded tensor to a scalar.
double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h = 1e-5);

}  // namespace zshot
