#include "zshot/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zshot/errors.hpp"
#include "zshot/optim.hpp"

namespace zshot {

AlignParams::AlignParams(std::size_t d, double init_noise, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xa1));
  auto make = [&](const char* name) {
    Linear l;
    l.has_bias = false;
    Tensor w = gaussian(d, d, init_noise, rng);
    for (std::size_t i = 0; i < d; ++i) w(i, i) += 1.0;
    l.weight = Parameter(std::string("align.") + name, std::move(w));
    l.bias = Parameter(std::string("align.") + name + ".bias", Tensor(1, d));
    return l;
  };
  psi = make("psi");
  phi = make("phi");
  sigma = make("sigma");
  theta = make("theta");
}

std::vector<Parameter*> AlignParams::parameters() {
  std::vector<Parameter*> ps;
  psi.collect(ps);
  phi.collect(ps);
  sigma.collect(ps);
  theta.collect(ps);
  return ps;
}

void AlignParams::set_frozen(bool f) {
  for (Parameter* p : parameters()) p->frozen = f;
}

Var rerepresent(Tape& t, Var x, Var bank, Linear& a, Linear& b) {
  if (x.cols() != bank.cols() || a.in_dim() != x.cols()) {
    throw DimensionError("re-representation width mismatch: input " + x.value().shape_str() + ", bank " +
                         bank.value().shape_str());
  }
  return softmax_rows(matmul_nt(a.forward(t, x), b.forward(t, bank)), std::sqrt(static_cast<double>(bank.cols())));
}

Var rerepresent_visual(Tape& t, Var features, Var bank, AlignParams& p) {
  return rerepresent(t, features, bank, p.psi, p.phi);
}

Var rerepresent_semantic(Tape& t, Var semantics, Var bank, AlignParams& p) {
  return rerepresent(t, semantics, bank, p.sigma, p.theta);
}

Tensor rerepresent_visual(const Tensor& features, const LgpBank& bank, AlignParams& p) {
  Tape t;
  return rerepresent_visual(t, t.constant(features), t.constant(bank.g.value), p).value();
}

Tensor rerepresent_semantic(const Tensor& semantics, const LgpBank& bank, AlignParams& p) {
  Tape t;
  return rerepresent_semantic(t, t.constant(semantics), t.constant(bank.g.value), p).value();
}

Var alignment_loss(Var point_dists, Var class_dists, std::span<const std::size_t> labels, double tau2,
                   Similarity kind) {
  if (!(tau2 > 0.0)) throw ContractError("tau2 must be positive");
  if (labels.size() != point_dists.rows()) throw ContractError("alignment_loss: one label per point required");
  for (std::size_t y : labels) {
    if (y >= class_dists.rows()) {
      throw ContractError("alignment_loss: label " + std::to_string(y) + " has no semantic distribution");
    }
  }
  return cross_entropy(scale(similarity(point_dists, class_dists, kind), 1.0 / tau2), labels);
}

std::vector<std::size_t> argmax_rows(const Tensor& scores, const std::vector<std::size_t>& allowed) {
  std::vector<std::size_t> cols = allowed;
  if (cols.empty()) {
    cols.resize(scores.cols());
    std::iota(cols.begin(), cols.end(), 0);
  } else {
    std::sort(cols.begin(), cols.end());
  }
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = cols.front();
    for (std::size_t c : cols)
      if (scores(i, c) > scores(i, best)) best = c;
    out[i] = best;
  }
  return out;
}

std::vector<std::size_t> classify(const Tensor& point_dists, const Tensor& class_dists, Similarity kind,
                                  const std::vector<std::size_t>& allowed) {
  if (class_dists.rows() == 0) throw ContractError("classify needs at least one class");
  return argmax_rows(similarity(point_dists, class_dists, kind), allowed);
}

Tensor class_posteriors(const Tensor& point_dists, const Tensor& class_dists, double tau2, Similarity kind) {
  return kernels::softmax_rows(similarity(point_dists, class_dists, kind), tau2);
}

AlignResult train_alignment(const std::vector<FeatureSet>& real, const ClassSplit& split, const Tensor& semantics,
                            GeneratorParams& gen, LgpBank& bank, const SynthOptions& synth, const AlignConfig& cfg,
                            std::uint64_t seed) {
  split.validate();
  if (!gen.frozen()) throw ContractError("train_alignment requires a frozen generator");
  if (real.empty()) throw ConfigError("train_alignment needs training features");

  // Class rows that compete in the softmax, and each label's index into them.
  std::vector<std::size_t> classes = cfg.seen_only ? split.seen : std::vector<std::size_t>(split.n_classes());
  if (!cfg.seen_only) std::iota(classes.begin(), classes.end(), 0);
  std::vector<std::size_t> slot(split.n_classes(), classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) slot[classes[i]] = i;

  const Tensor t_hat = kernels::gather_rows(project_semantics(semantics, gen), classes);

  struct Batch {
    Tensor features;
    std::vector<std::size_t> targets;
  };
  std::vector<Batch> scenes;
  for (const auto& fs : real) {
    std::vector<std::size_t> rows;
    Batch b;
    for (std::size_t i = 0; i < fs.size(); ++i) {
      if (!split.is_seen(fs.labels[i])) continue;
      rows.push_back(i);
      b.targets.push_back(slot[fs.labels[i]]);
    }
    if (rows.empty()) continue;
    b.features = kernels::gather_rows(fs.features, rows);
    scenes.push_back(std::move(b));
  }
  if (scenes.empty()) throw ConfigError("train_alignment: no seen-class points in the training features");

  AlignResult res;
  res.params = AlignParams(bank.dim(), cfg.init_noise, seed);
  AlignParams& p = res.params;
  const bool bank_was_frozen = bank.g.frozen;
  bank.g.frozen = !cfg.bank_trainable;
  auto params = p.parameters();
  params.push_back(&bank.g);
  Adam opt(params, AdamConfig{.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  Rng rng(derive_seed(seed, 0xa2));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cosine_lr(cfg.lr, epoch, cfg.epochs));
    Batch unseen;
    if (!cfg.seen_only) {
      std::vector<double> values;
      for (std::size_t c : split.unseen) {
        const FeatureSet fs = synthesize(c, cfg.n_c, semantics, bank, gen, synth, derive_seed(seed, 0xa300 + epoch));
        values.insert(values.end(), fs.features.values().begin(), fs.features.values().end());
        unseen.targets.insert(unseen.targets.end(), cfg.n_c, slot[c]);
      }
      unseen.features = Tensor(unseen.targets.size(), bank.dim(), std::move(values));
    }
    const auto order = sample_without_replacement(scenes.size(), scenes.size(), rng);
    double total = 0.0;
    for (std::size_t s : order) {
      Tape t;
      Var g = t.param(bank.g);
      Var f = t.constant(scenes[s].features);
      std::vector<std::size_t> targets = scenes[s].targets;
      if (!unseen.targets.empty()) {
        f = concat_rows(f, t.constant(unseen.features));
        targets.insert(targets.end(), unseen.targets.begin(), unseen.targets.end());
      }
      Var loss = alignment_loss(rerepresent_visual(t, f, g, p), rerepresent_semantic(t, t.constant(t_hat), g, p),
                                targets, cfg.tau2, cfg.similarity);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) throw NumericalError("alignment loss is not finite in epoch " + std::to_string(epoch));
      total += lv;
      t.backward(loss);
      opt.step();
    }
    res.epoch_loss.push_back(total / static_cast<double>(scenes.size()));
  }
  p.set_frozen(true);
  bank.g.frozen = bank_was_frozen;
  return res;
}

}  // namespace zshot
