#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zshot/alignment.hpp"
#include "zshot/backbone.hpp"
#include "zshot/generator.hpp"

namespace zshot {

/// Every knob of one experiment. Loaded from flat `key = value` text; the
/// same keys are accepted as `--set key=value` overrides.
struct ExperimentConfig {
  // corpus
  std::uint64_t corpus_seed = 1;
  std::uint64_t split_seed = 0;
  std::size_t unseen = 2;
  std::size_t train_scenes = 40;
  std::size_t test_scenes = 10;
  std::size_t points = 512;
  std::size_t d_t = 32;
  double semantic_noise = 0.05;
  /// Empty for synthetic embeddings, else word-vector files joined by ';'.
  std::string word_vectors;
  std::string corpus_dir;

  // model
  std::size_t d = 32;
  std::size_t h = 64;
  std::size_t k = 16;
  std::size_t m = 16;
  std::size_t h_g = 64;
  double tau1 = 0.5;
  double tau2 = 0.2;
  double lambda1 = 1.0;
  std::size_t n_c = 256;
  std::size_t n_k = 0;

  // optimisation
  double pretrain_lr = 1e-2;
  std::size_t pretrain_epochs = 10;
  double gen_lr = 1e-2;
  std::size_t gen_epochs = 300;
  double align_lr = 1e-2;
  std::size_t align_epochs = 15;
  double clip_norm = 5.0;

  std::uint64_t seed = 0;

  // ablation flags
  bool no_lgp_in_generator = false;
  bool no_self_loss = false;
  bool no_alignment = false;
  bool lgp_trainable_step2 = true;
  bool single_z_mode = false;
  bool zsl_trivial = false;
  Similarity similarity_kind = Similarity::Cosine;
  bool miou_empty_as_zero = false;

  /// Throws ConfigError on an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  /// Resolved `key = value` lines in a fixed order.
  std::string to_text() const;

  BackboneConfig backbone() const;
  GeneratorConfig generator() const;
  AlignConfig alignment() const;
  SynthOptions synth() const;
  std::vector<std::filesystem::path> word_vector_files() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies `key=value`.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

}  // namespace zshot
