#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "zshot/backbone.hpp"
#include "zshot/lgp.hpp"
#include "zshot/similarity.hpp"

namespace zshot {

/// Real features grouped by class label.
using ClassFeatures = std::map<std::size_t, Tensor>;

struct GenLossConfig {
  double tau1 = 0.5;
  double lambda1 = 1.0;
  /// Subsample size for L^self; 0 means ⌈N_c/2⌉.
  std::size_t n_k = 0;
  /// Multiples of the median pairwise squared distance of the real batch.
  std::vector<double> bandwidth_factors{1.0, 2.0, 4.0, 8.0, 16.0};
  Similarity similarity = Similarity::Cosine;
  bool use_self = true;
};

struct GeneratorConfig {
  std::size_t hidden = 64;  // h_g
  std::size_t n_c = 256;
  std::size_t real_batch = 256;
  double noise_scale = 1.0;
  bool single_z = false;
  bool use_lgp = true;
  bool bank_trainable = true;
  double lr = 1e-2;
  std::size_t epochs = 300;
  double clip_norm = 5.0;
  GenLossConfig loss;
};

/// Semantic projection (d_t → d), LGP cross-attention and G_gen (d → h_g → d).
struct GeneratorParams {
  Linear proj;
  CrossAttention attn;
  Linear gen1, gen2;

  GeneratorParams() = default;
  GeneratorParams(std::size_t d_t, std::size_t d, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const { return proj.out_dim(); }
  std::size_t semantic_dim() const { return proj.in_dim(); }
  std::vector<Parameter*> parameters();
  void set_frozen(bool f);
  bool frozen() const { return proj.weight.frozen; }
};

/// t̂ for every row of `semantics` (k×d_t → k×d).
Var project_semantics(Tape& t, Var semantics, GeneratorParams& p);
Tensor project_semantics(const Tensor& semantics, GeneratorParams& p);

Tensor sample_noise(std::size_t n, std::size_t d, double scale, bool single_z, Rng& rng);

/// G_gen(t̂′ + t̂ + z) for one class row `t_row` (1×d_t) and per-point noise
/// `noise` (n×d). Without LGPs the input is t̂ + z.
Var generate(Tape& t, Var t_row, Var bank, GeneratorParams& p, const Tensor& noise, bool use_lgp);

struct SynthOptions {
  double noise_scale = 1.0;
  bool single_z = false;
  bool use_lgp = true;
};

/// N_c synthetic features for class `c`, all labelled c.
FeatureSet synthesize(std::size_t c, std::size_t n_c, const Tensor& semantics, const LgpBank& bank,
                      GeneratorParams& p, const SynthOptions& opt, std::uint64_t seed);

/// Biased MMD² with size-normalised kernel sums; the kernel is the mean of
/// exp(−‖x − y‖²/b) over `bandwidths`.
Var mmd_loss(Var real, Var fake, const std::vector<double>& bandwidths);
double mmd_value(const Tensor& real, const Tensor& fake, const std::vector<double>& bandwidths);

/// factors × median pairwise squared distance among rows of `real`.
std::vector<double> median_bandwidths(const Tensor& real, const std::vector<double>& factors);

/// −log softmax of [D(a, b), D(a, neg_1), …]/τ1 at the positive pair.
Var self_consistency_from_subsets(Var a, Var b, const std::vector<Var>& negatives, double tau1, Similarity kind);

/// Draws two independent N_k-subsets of `fake` and scores them against
/// `negatives` (real feature sets from other classes).
Var self_consistency_loss(Var fake, const std::vector<Var>& negatives, const GenLossConfig& cfg, std::size_t n_k,
                          Rng& rng);

struct ClassLoss {
  std::size_t cls;
  Var mmd;
  Var self;  // ignored when λ1 = 0
};

/// Σ_c MMD_c + λ1·self_c over exactly the seen classes.
Var generator_loss(const std::vector<ClassLoss>& terms, const std::vector<std::size_t>& seen, double lambda1);

struct GenLogRow {
  std::size_t epoch;
  double mmd, self, total;
};

struct GeneratorResult {
  GeneratorParams params;
  std::vector<GenLogRow> log;
  /// Unseen-class real feature rows that reached a loss. Zero by contract.
  std::size_t unseen_touched = 0;
};

/// Step 2. `real` holds seen-class training features only; the bank is
/// updated in place when cfg.bank_trainable is set. Returned parameters are
/// frozen.
GeneratorResult train_generator(const ClassFeatures& real, const Tensor& semantics, const ClassSplit& split,
                                LgpBank& bank, const GeneratorConfig& cfg, std::uint64_t seed);

/// Mean over the classes in `real` of MMD between the real set and a fresh
/// synthetic set of the same size.
double mean_class_mmd(const ClassFeatures& real, const Tensor& semantics, const LgpBank& bank, GeneratorParams& p,
                      const GeneratorConfig& cfg, std::uint64_t seed);

void write_gen_log(const std::vector<GenLogRow>& log, const std::filesystem::path& path);

/// Groups every point of `sets` by label, optionally keeping only `keep`.
ClassFeatures group_by_class(const std::vector<FeatureSet>& sets, const std::vector<std::size_t>& keep);

}  // namespace zshot
