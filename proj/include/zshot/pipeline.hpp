#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "zshot/alignment.hpp"
#include "zshot/config.hpp"
#include "zshot/metrics.hpp"

namespace zshot {

/// Synthesises the corpus described by `cfg`, or reads it from
/// cfg.corpus_dir. Word-vector files, when configured, replace the stored
/// semantics.
Corpus build_corpus(const ExperimentConfig& cfg);
/// Semantic table for `cfg` over the corpus classes.
SemanticTable resolve_semantics(const ExperimentConfig& cfg, const Corpus& corpus);

struct FeatureCache {
  std::vector<FeatureSet> train, test;
};
FeatureCache encode_corpus(const Corpus& corpus, BackboneParams& backbone);

struct Model {
  BackboneParams backbone;
  GeneratorParams generator;
  LgpBank bank;
  AlignParams align;

  std::vector<const Parameter*> backbone_tensors() const;
  std::vector<const Parameter*> generator_tensors() const;
  /// Alignment projections plus the bank.
  std::vector<const Parameter*> alignment_tensors() const;
};

/// Bitwise snapshot of a parameter list; counts tensors that changed since.
class FreezeGuard {
 public:
  explicit FreezeGuard(const std::vector<const Parameter*>& params);
  std::size_t violations() const;

 private:
  std::vector<const Parameter*> params_;
  std::vector<Tensor> saved_;
};

struct Evaluation {
  EvalReport report;
  Tensor visual_means;    // |C|×M mean point distribution per true class
  Tensor semantic_dists;  // |C|×M
};

/// Inference over `test` features: re-represent, classify (Eq. 2), score.
Evaluation evaluate(Model& model, const ExperimentConfig& cfg, const Corpus& corpus, const SemanticTable& semantics,
                    const std::vector<FeatureSet>& test);

struct StageTimes {
  double pretrain = 0.0, generator = 0.0, alignment = 0.0, evaluate = 0.0;
};

struct RunResult {
  Model model;
  LgpBank bank_after_generator;
  Evaluation eval;
  double seen_accuracy = 0.0;
  std::vector<double> pretrain_loss;
  std::vector<GenLogRow> gen_log;
  std::vector<double> align_loss;
  std::size_t unseen_in_loss = 0;
  std::size_t freeze_violations = 0;
  double mmd_initial = 0.0, mmd_final = 0.0;
  StageTimes times;
};

/// Step 1 only.
PretrainResult run_pretrain(const Corpus& corpus, const ExperimentConfig& cfg);

/// Step 2 on top of a frozen backbone and its cached features. Also reports
/// held-out MMD before and after training.
struct GeneratorStage {
  GeneratorParams params;
  LgpBank bank;
  std::vector<GenLogRow> log;
  double mmd_initial = 0.0, mmd_final = 0.0;
  std::size_t unseen_touched = 0;
};
GeneratorStage run_generator(const Corpus& corpus, const SemanticTable& semantics, const FeatureCache& feats,
                             const ExperimentConfig& cfg);
AlignResult run_alignment(const Corpus& corpus, const SemanticTable& semantics, const FeatureCache& feats,
                          const ExperimentConfig& cfg, GeneratorParams& gen, LgpBank& bank);

/// All three stages plus evaluation.
RunResult run_all(const ExperimentConfig& cfg, const Corpus& corpus);

/// Writes checkpoints, logs, reports and LGP exports of a finished run into
/// `dir`. Returns the written paths.
std::vector<std::filesystem::path> write_run_outputs(const RunResult& run, const Corpus& corpus,
                                                     const std::filesystem::path& dir);

/// Rebuilds a model from the checkpoints in `dir` written by stages
/// 1..`stages`. generator.ckpt carries the bank after step 2 and
/// alignment.ckpt the bank after step 3. A missing file raises LoadError
/// naming the stage that produces it.
Model load_model(const ExperimentConfig& cfg, const Corpus& corpus, const std::filesystem::path& dir, int stages);

std::vector<std::filesystem::path> write_eval_outputs(const Evaluation& eval, const Corpus& corpus,
                                                      const std::filesystem::path& dir);

struct Variant {
  std::string name;
  std::vector<std::string> overrides;  // key=value
};

struct VariantRun {
  std::string variant;
  std::uint64_t seed;
  EvalReport report;
  std::string error;  // non-empty when the run failed
};

/// Runs every variant for every seed. Step 1 is shared across variants of a
/// seed and step 2 across variants with identical generator settings.
std::vector<VariantRun> run_variants(const ExperimentConfig& base, const Corpus& corpus,
                                     const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants,
                                     const std::function<void(const VariantRun&)>& progress = {});

/// FNV-1a over every scene's points and labels and the semantic table.
std::uint64_t corpus_hash(const Corpus& corpus);

struct RunManifest {
  std::string config;
  std::uint64_t seed = 0;
  std::string input_hash;
  std::vector<std::filesystem::path> artifacts;
  std::vector<std::pair<std::string, double>> timings;

  /// manifest.txt; call after every other artifact is written.
  std::filesystem::path write(const std::filesystem::path& dir) const;
};

}  // namespace zshot
