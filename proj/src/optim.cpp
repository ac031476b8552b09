#include "zshot/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zshot/errors.hpp"

namespace zshot {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw ConfigError("Adam: learning rate must be positive");
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  double sq = 0.0;
  for (Parameter* p : params_) {
    if (p->frozen || !p->has_grad()) continue;
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + p->name + "'");
      sq += g * g;
    }
  }
  last_norm_ = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && last_norm_ > cfg_.clip_norm) ? cfg_.clip_norm / last_norm_ : 1.0;

  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.frozen || !p.has_grad()) continue;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.grad.fill(0.0);
  }
}

double finite_diff_check(const std::function<Var(Tape&)>& loss, const std::vector<Parameter*>& params,
                         double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: h must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    Tape tape;
    return loss(tape).value().item();
  };
  double worst = 0.0;
  for (Parameter* p : params) {
    if (p->frozen) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      const double g = p->grad[i];
      double err = std::numeric_limits<double>::infinity();
      for (double step : {h, h / 10.0, h / 100.0}) {
        p->value[i] = orig + step;
        const double fp = eval();
        p->value[i] = orig - step;
        const double fm = eval();
        p->value[i] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(g), std::abs(fd), 1e-8});
        err = std::min(err, std::abs(g - fd) / denom);
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h) {
  Parameter p("x", x);
  return finite_diff_check([&](Tape& t) { return f(t, t.param(p)); }, {&p}, h);
}

}  // namespace zshot
