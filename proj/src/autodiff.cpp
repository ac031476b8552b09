#include "zshot/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "zshot/errors.hpp"

namespace zshot {

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}

void Parameter::zero_grad() {
  if (grad.same_shape(value))
    grad.fill(0.0);
  else
    grad = Tensor(value.rows(), value.cols());
}

const Tensor& Var::value() const { return tape->value(*this); }
bool Var::requires_grad() const { return tape->requires_grad(*this); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericalError("non-finite constant recorded on tape");
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, nullptr});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  if (!p.value.all_finite()) throw NumericalError("parameter '" + p.name + "' holds non-finite values");
  const bool live = !p.frozen;
  nodes_.push_back(Node{p.value, {}, live, nullptr, live ? &p : nullptr});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op) {
  if (!value.all_finite()) throw NumericalError(std::string("non-finite output from op '") + op + "'");
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape != this) throw ContractError(std::string("op '") + op + "' mixes tapes");
    needs = needs || nodes_[v.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : nullptr, nullptr});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor* Tape::grad_if(Var v) {
  Node& n = nodes_[v.id];
  if (!n.needs_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + lv.shape_str());
  }
  if (!nodes_[loss.id].needs_grad) throw ContractError("backward: loss does not depend on any trainable parameter");
  nodes_[loss.id].grad = Tensor::scalar(1.0);
  last_visits_ = 0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.back) {
      n.back(*this, n.grad);
      ++last_visits_;
    } else if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
      for (std::size_t k = 0; k < n.grad.size(); ++k) p.grad[k] += n.grad[k];
    }
  }
  reset();
}

void Tape::reset() { nodes_.clear(); }

namespace {

Tensor& acc_target(Tensor* g) { return *g; }

// Sums `g` down to an r×c operand that was broadcast to g's shape.
void accumulate_reduced(Tensor& dst, const Tensor& g) {
  const std::size_t r = dst.rows(), c = dst.cols();
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) dst(r == 1 ? 0 : i, c == 1 ? 0 : j) += g(i, j);
}

std::size_t bdim(std::size_t x, std::size_t y, const char* op, const Tensor& a, const Tensor& b) {
  if (x == y || y == 1) return x;
  if (x == 1) return y;
  throw DimensionError(std::string(op) + " cannot broadcast " + a.shape_str() + " with " + b.shape_str());
}

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, const char* op, F f) {
  const std::size_t r = bdim(a.rows(), b.rows(), op, a, b);
  const std::size_t c = bdim(a.cols(), b.cols(), op, a, b);
  Tensor out(r, c);
  const bool ar = a.rows() == 1, ac = a.cols() == 1, br = b.rows() == 1, bc = b.cols() == 1;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out(i, j) = f(a(ar ? 0 : i, ac ? 0 : j), b(br ? 0 : i, bc ? 0 : j));
  return out;
}

template <class F>
Var unary(Var a, const char* op, F f, std::function<void(Tape&, const Tensor&, Var, Var)> back) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = f(v);
  Tape& t = *a.tape;
  // The output handle is only known after recording, so capture its id lazily.
  auto self = std::make_shared<Var>();
  Var o = t.record(std::move(out), {a},
                   [a, self, back](Tape& tp, const Tensor& g) { back(tp, g, a, *self); }, op);
  *self = o;
  return o;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tensor out = kernels::matmul(a.value(), b.value());
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (Tensor* ga = t.grad_if(a)) {
                            Tensor d = kernels::matmul_nt(g, b.value());
                            for (std::size_t k = 0; k < d.size(); ++k) (*ga)[k] += d[k];
                          }
                          if (Tensor* gb = t.grad_if(b)) {
                            Tensor d = kernels::matmul_tn(a.value(), g);
                            for (std::size_t k = 0; k < d.size(); ++k) (*gb)[k] += d[k];
                          }
                        },
                        "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tensor out = kernels::matmul_nt(a.value(), b.value());
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (Tensor* ga = t.grad_if(a)) {
                            Tensor d = kernels::matmul(g, b.value());
                            for (std::size_t k = 0; k < d.size(); ++k) (*ga)[k] += d[k];
                          }
                          if (Tensor* gb = t.grad_if(b)) {
                            Tensor d = kernels::matmul_tn(g, a.value());
                            for (std::size_t k = 0; k < d.size(); ++k) (*gb)[k] += d[k];
                          }
                        },
                        "matmul_nt");
}

Var transpose(Var a) {
  return a.tape->record(kernels::transpose(a.value()), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor& ga = acc_target(t.grad_if(a));
                          for (std::size_t i = 0; i < g.rows(); ++i)
                            for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
                        },
                        "transpose");
}

Var add(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "add", [](double x, double y) { return x + y; });
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (Tensor* ga = t.grad_if(a)) accumulate_reduced(*ga, g);
                          if (Tensor* gb = t.grad_if(b)) accumulate_reduced(*gb, g);
                        },
                        "add");
}

Var sub(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "sub", [](double x, double y) { return x - y; });
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          if (Tensor* ga = t.grad_if(a)) accumulate_reduced(*ga, g);
                          if (Tensor* gb = t.grad_if(b)) {
                            Tensor neg = g;
                            for (auto& v : neg.values()) v = -v;
                            accumulate_reduced(*gb, neg);
                          }
                        },
                        "sub");
}

Var mul(Var a, Var b) {
  Tensor out = broadcast_apply(a.value(), b.value(), "mul", [](double x, double y) { return x * y; });
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          const Tensor& av = a.value();
                          const Tensor& bv = b.value();
                          if (Tensor* ga = t.grad_if(a)) {
                            Tensor d = broadcast_apply(g, bv, "mul", [](double x, double y) { return x * y; });
                            accumulate_reduced(*ga, d);
                          }
                          if (Tensor* gb = t.grad_if(b)) {
                            Tensor d = broadcast_apply(g, av, "mul", [](double x, double y) { return x * y; });
                            accumulate_reduced(*gb, d);
                          }
                        },
                        "mul");
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return a.tape->record(std::move(out), {a},
                        [a, s](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t k = 0; k < g.size(); ++k) ga[k] += s * g[k];
                        },
                        "scale");
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                        },
                        "add_scalar");
}

Var exp(Var a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](Tape& t, const Tensor& g, Var in, Var out) {
                 Tensor& ga = *t.grad_if(in);
                 const Tensor& y = out.value();
                 for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * y[k];
               });
}

Var log(Var a) {
  for (double v : a.value().values())
    if (!(v > 0.0)) throw NumericalError("log of non-positive value");
  return unary(a, "log", [](double x) { return std::log(x); },
               [](Tape& t, const Tensor& g, Var in, Var) {
                 Tensor& ga = *t.grad_if(in);
                 const Tensor& x = in.value();
                 for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / x[k];
               });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; },
               [](Tape& t, const Tensor& g, Var in, Var) {
                 Tensor& ga = *t.grad_if(in);
                 const Tensor& x = in.value();
                 for (std::size_t k = 0; k < g.size(); ++k) ga[k] += 2.0 * x[k] * g[k];
               });
}

Var leaky_relu(Var a, double slope) {
  return unary(a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](Tape& t, const Tensor& g, Var in, Var) {
                 Tensor& ga = *t.grad_if(in);
                 const Tensor& x = in.value();
                 for (std::size_t k = 0; k < g.size(); ++k) ga[k] += x[k] > 0.0 ? g[k] : slope * g[k];
               });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          const double gv = g[0];
                          for (auto& v : ga.values()) v += gv;
                        },
                        "sum");
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_rows(Var a) {
  const Tensor& x = a.value();
  Tensor out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t i = 0; i < ga.rows(); ++i)
                            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
                        },
                        "sum_rows");
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ContractError("mean_rows of empty tensor");
  return scale(sum_rows(a), 1.0 / static_cast<double>(a.rows()));
}

Var sum_cols(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, 0) += x(i, j);
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t i = 0; i < ga.rows(); ++i)
                            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
                        },
                        "sum_cols");
}

Var softmax_rows(Var x, double scale_) {
  Tensor out = kernels::softmax_rows(x.value(), scale_);
  auto self = std::make_shared<Var>();
  Var o = x.tape->record(std::move(out), {x},
                         [x, self, scale_](Tape& t, const Tensor& g) {
                           Tensor& gx = *t.grad_if(x);
                           const Tensor& y = self->value();
                           for (std::size_t i = 0; i < y.rows(); ++i) {
                             const double gy = kernels::dot(g.row(i), y.row(i));
                             for (std::size_t j = 0; j < y.cols(); ++j)
                               gx(i, j) += y(i, j) * (g(i, j) - gy) / scale_;
                           }
                         },
                         "softmax_rows");
  *self = o;
  return o;
}

Var log_softmax_rows(Var x, double scale_) {
  if (!(scale_ > 0.0)) throw ContractError("log_softmax_rows: scale must be positive");
  const Tensor& in = x.value();
  Tensor out(in.rows(), in.cols());
  for (std::size_t i = 0; i < in.rows(); ++i) {
    auto r = in.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp((v - mx) / scale_);
    const double lz = std::log(z);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = (r[j] - mx) / scale_ - lz;
  }
  auto self = std::make_shared<Var>();
  Var o = x.tape->record(std::move(out), {x},
                         [x, self, scale_](Tape& t, const Tensor& g) {
                           Tensor& gx = *t.grad_if(x);
                           const Tensor& y = self->value();
                           for (std::size_t i = 0; i < y.rows(); ++i) {
                             double gs = 0.0;
                             for (double v : g.row(i)) gs += v;
                             for (std::size_t j = 0; j < y.cols(); ++j)
                               gx(i, j) += (g(i, j) - std::exp(y(i, j)) * gs) / scale_;
                           }
                         },
                         "log_softmax_rows");
  *self = o;
  return o;
}

Var normalize_rows(Var x, double eps) {
  const Tensor& in = x.value();
  std::vector<double> norms(in.rows());
  for (std::size_t i = 0; i < in.rows(); ++i) norms[i] = kernels::norm(in.row(i));
  Tensor out = kernels::normalize_rows(in, eps);
  auto self = std::make_shared<Var>();
  Var o = x.tape->record(std::move(out), {x},
                         [x, self, norms, eps](Tape& t, const Tensor& g) {
                           Tensor& gx = *t.grad_if(x);
                           const Tensor& y = self->value();
                           for (std::size_t i = 0; i < y.rows(); ++i) {
                             if (norms[i] <= eps) {
                               for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += g(i, j);
                               continue;
                             }
                             const double gy = kernels::dot(g.row(i), y.row(i));
                             for (std::size_t j = 0; j < y.cols(); ++j)
                               gx(i, j) += (g(i, j) - y(i, j) * gy) / norms[i];
                           }
                         },
                         "normalize_rows");
  *self = o;
  return o;
}

Var gather_rows(Var a, std::span<const std::size_t> idx) {
  std::vector<std::size_t> index(idx.begin(), idx.end());
  Tensor out = kernels::gather_rows(a.value(), index);
  return a.tape->record(std::move(out), {a},
                        [a, index = std::move(index)](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          const std::size_t c = ga.cols();
                          for (std::size_t i = 0; i < index.size(); ++i)
                            for (std::size_t j = 0; j < c; ++j) ga(index[i], j) += g(i, j);
                        },
                        "gather_rows");
}

Var pool_rows(Var a, const std::vector<std::vector<std::size_t>>& groups) {
  const Tensor& x = a.value();
  Tensor out(groups.size(), x.cols());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty()) throw ContractError("pool_rows: empty group");
    const double w = 1.0 / static_cast<double>(groups[i].size());
    for (std::size_t src : groups[i]) {
      if (src >= x.rows()) throw DimensionError("pool_rows index out of range");
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += w * x(src, j);
    }
  }
  return a.tape->record(std::move(out), {a},
                        [a, groups](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t i = 0; i < groups.size(); ++i) {
                            const double w = 1.0 / static_cast<double>(groups[i].size());
                            for (std::size_t src : groups[i])
                              for (std::size_t j = 0; j < ga.cols(); ++j) ga(src, j) += w * g(i, j);
                          }
                        },
                        "pool_rows");
}

Var pick(Var a, std::span<const std::size_t> cols) {
  const Tensor& x = a.value();
  if (cols.size() != x.rows()) throw DimensionError("pick: need one column index per row");
  std::vector<std::size_t> c(cols.begin(), cols.end());
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] >= x.cols()) throw DimensionError("pick: column index out of range");
    out(i, 0) = x(i, c[i]);
  }
  return a.tape->record(std::move(out), {a},
                        [a, c = std::move(c)](Tape& t, const Tensor& g) {
                          Tensor& ga = *t.grad_if(a);
                          for (std::size_t i = 0; i < c.size(); ++i) ga(i, c[i]) += g(i, 0);
                        },
                        "pick");
}

Var concat_cols(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rows() != y.rows()) throw DimensionError("concat_cols: " + x.shape_str() + " vs " + y.shape_str());
  Tensor out(x.rows(), x.cols() + y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::copy_n(x.data() + i * x.cols(), x.cols(), out.data() + i * out.cols());
    std::copy_n(y.data() + i * y.cols(), y.cols(), out.data() + i * out.cols() + x.cols());
  }
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          const std::size_t ca = a.cols();
                          if (Tensor* ga = t.grad_if(a))
                            for (std::size_t i = 0; i < g.rows(); ++i)
                              for (std::size_t j = 0; j < ca; ++j) (*ga)(i, j) += g(i, j);
                          if (Tensor* gb = t.grad_if(b))
                            for (std::size_t i = 0; i < g.rows(); ++i)
                              for (std::size_t j = 0; j < gb->cols(); ++j) (*gb)(i, j) += g(i, ca + j);
                        },
                        "concat_cols");
}

Var concat_rows(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.cols() != y.cols()) throw DimensionError("concat_rows: " + x.shape_str() + " vs " + y.shape_str());
  std::vector<double> v(x.values().begin(), x.values().end());
  v.insert(v.end(), y.values().begin(), y.values().end());
  return a.tape->record(Tensor(x.rows() + y.rows(), x.cols(), std::move(v)), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          const std::size_t na = a.value().size();
                          if (Tensor* ga = t.grad_if(a))
                            for (std::size_t k = 0; k < na; ++k) (*ga)[k] += g[k];
                          if (Tensor* gb = t.grad_if(b))
                            for (std::size_t k = 0; k < gb->size(); ++k) (*gb)[k] += g[na + k];
                        },
                        "concat_rows");
}

Var replicate_rows(Var a, std::size_t n) {
  const Tensor& x = a.value();
  if (x.rows() != 1) throw DimensionError("replicate_rows expects a 1xq row, got " + x.shape_str());
  Tensor out(n, x.cols());
  for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data(), x.cols(), out.data() + i * x.cols());
  return a.tape->record(std::move(out), {a},
                        [a](Tape& t, const Tensor& g) { accumulate_reduced(*t.grad_if(a), g); },
                        "replicate_rows");
}

Var sq_dists(Var a, Var b) {
  Tensor out = kernels::sq_dists(a.value(), b.value());
  return a.tape->record(std::move(out), {a, b},
                        [a, b](Tape& t, const Tensor& g) {
                          // d/dx_i = 2(Σ_j g_ij · x_i − Σ_j g_ij y_j), and symmetrically for y.
                          const Tensor& xv = a.value();
                          const Tensor& yv = b.value();
                          const std::size_t dd = xv.cols();
                          if (Tensor* ga = t.grad_if(a)) {
                            const Tensor gy = kernels::matmul(g, yv);
                            for (std::size_t i = 0; i < g.rows(); ++i) {
                              double rs = 0.0;
                              for (double v : g.row(i)) rs += v;
                              for (std::size_t k = 0; k < dd; ++k) (*ga)(i, k) += 2.0 * (rs * xv(i, k) - gy(i, k));
                            }
                          }
                          if (Tensor* gb = t.grad_if(b)) {
                            const Tensor gx = kernels::matmul_tn(g, xv);
                            std::vector<double> cs(g.cols(), 0.0);
                            for (std::size_t i = 0; i < g.rows(); ++i)
                              for (std::size_t j = 0; j < g.cols(); ++j) cs[j] += g(i, j);
                            for (std::size_t j = 0; j < g.cols(); ++j)
                              for (std::size_t k = 0; k < dd; ++k) (*gb)(j, k) += 2.0 * (cs[j] * yv(j, k) - gx(j, k));
                          }
                        },
                        "sq_dists");
}

Var gaussian_kernel(Var sq_dist, std::span<const double> bandwidths) {
  if (bandwidths.empty()) throw ContractError("gaussian_kernel needs at least one bandwidth");
  const double inv_n = 1.0 / static_cast<double>(bandwidths.size());
  std::vector<double> bw(bandwidths.begin(), bandwidths.end());
  std::sort(bw.begin(), bw.end(), std::greater<>());
  // exp(−x/b) for b half the previous bandwidth is the square of the previous
  // term, so the usual doubling ladders cost a single exp per entry.
  std::vector<char> halves(bw.size(), 0);
  for (std::size_t i = 1; i < bw.size(); ++i) halves[i] = bw[i - 1] == 2.0 * bw[i];
  const Tensor& d = sq_dist.value();
  Tensor out(d.rows(), d.cols());
  auto deriv = std::make_shared<Tensor>(d.rows(), d.cols());
  for (std::size_t k = 0; k < d.size(); ++k) {
    double s = 0.0, ds = 0.0, e = 0.0;
    for (std::size_t i = 0; i < bw.size(); ++i) {
      e = halves[i] ? e * e : std::exp(-d[k] / bw[i]);
      s += e;
      ds -= e / bw[i];
    }
    out[k] = s * inv_n;
    (*deriv)[k] = ds * inv_n;
  }
  return sq_dist.tape->record(std::move(out), {sq_dist},
                              [sq_dist, deriv](Tape& t, const Tensor& g) {
                                Tensor& gd = *t.grad_if(sq_dist);
                                for (std::size_t k = 0; k < g.size(); ++k) gd[k] += g[k] * (*deriv)[k];
                              },
                              "gaussian_kernel");
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  return -mean(pick(log_softmax_rows(logits), labels));
}

}  // namespace zshot
