#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "zshot/generator.hpp"

namespace zshot {

struct AlignConfig {
  double tau2 = 0.2;
  Similarity similarity = Similarity::Cosine;
  /// Std of the Gaussian perturbation added to the identity initialisation.
  double init_noise = 0.01;
  double lr = 1e-2;
  std::size_t epochs = 15;
  /// Synthetic points per unseen class, redrawn every epoch.
  std::size_t n_c = 256;
  bool bank_trainable = true;
  double clip_norm = 5.0;
  /// ZSL-trivial: train and classify over seen classes only.
  bool seen_only = false;
};

/// ψ, φ (visual) and σ, θ (semantic): bias-free d×d projections.
struct AlignParams {
  Linear psi, phi, sigma, theta;

  AlignParams() = default;
  AlignParams(std::size_t d, double init_noise, std::uint64_t seed);

  std::vector<Parameter*> parameters();
  void set_frozen(bool f);
};

/// softmax_j(a(x_i)·b(g_j)ᵀ/√d): one distribution over the bank per row.
Var rerepresent(Tape& t, Var x, Var bank, Linear& a, Linear& b);
Var rerepresent_visual(Tape& t, Var features, Var bank, AlignParams& p);
Var rerepresent_semantic(Tape& t, Var semantics, Var bank, AlignParams& p);
Tensor rerepresent_visual(const Tensor& features, const LgpBank& bank, AlignParams& p);
Tensor rerepresent_semantic(const Tensor& semantics, const LgpBank& bank, AlignParams& p);

/// Mean over points of −log softmax_c(D(t̃_c, f̃_i)/τ2) at the true class.
Var alignment_loss(Var point_dists, Var class_dists, std::span<const std::size_t> labels, double tau2,
                   Similarity kind);

/// Row-wise argmax with lowest-index ties. With `allowed` non-empty only those
/// columns compete.
std::vector<std::size_t> argmax_rows(const Tensor& scores, const std::vector<std::size_t>& allowed = {});

/// Eq. (2): the class whose semantic distribution is most similar.
std::vector<std::size_t> classify(const Tensor& point_dists, const Tensor& class_dists, Similarity kind,
                                  const std::vector<std::size_t>& allowed = {});

/// τ2-tempered softmax over classes, the confidence attached to classify().
Tensor class_posteriors(const Tensor& point_dists, const Tensor& class_dists, double tau2, Similarity kind);

struct AlignResult {
  AlignParams params;
  std::vector<double> epoch_loss;
};

/// Step 3. `real` are per-scene backbone features; unseen-labelled points in
/// them are masked. Unseen classes are represented by fresh generator samples
/// every epoch. The generator must be frozen; the bank is updated in place
/// when cfg.bank_trainable is set.
AlignResult train_alignment(const std::vector<FeatureSet>& real, const ClassSplit& split, const Tensor& semantics,
                            GeneratorParams& gen, LgpBank& bank, const SynthOptions& synth, const AlignConfig& cfg,
                            std::uint64_t seed);

}  // namespace zshot
