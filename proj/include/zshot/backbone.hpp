#pragma once

#include <cstdint>
#include <vector>

#include "zshot/autodiff.hpp"
#include "zshot/data.hpp"
#include "zshot/nn.hpp"

namespace zshot {

enum class FeatureOrigin { Real, Synthetic };

/// Per-point visual features with their class labels.
struct FeatureSet {
  Tensor features;  // N×d
  std::vector<std::size_t> labels;
  FeatureOrigin origin = FeatureOrigin::Real;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
};

struct BackboneConfig {
  std::size_t hidden = 64;  // h
  std::size_t k = 16;       // neighbours pooled per point
  std::size_t dim = 32;     // d, equals the LGP dimension
  double offset_scale = 5.0;
  double lr = 1e-2;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
};

/// Parameter-free geometry of one scene: the per-point MLP inputs for the
/// point itself and for each pooled neighbour.
///
/// Neighbourhoods are the k nearest *distinct positions* (ties broken by the
/// lowest index, coincident points count once), so duplicating every point of
/// a cloud leaves each neighbourhood's pooled mean unchanged.
struct SceneGeometry {
  Tensor self_input;  // N×4: (0, 0, 0, z)
  Tensor edge_input;  // E×4: (s·(p_j − p_i), z_j) for each pooled neighbour j of i
  std::vector<std::vector<std::size_t>> groups;  // point i -> rows of edge_input

  std::size_t size() const { return self_input.rows(); }
};

SceneGeometry scene_geometry(const Tensor& points, std::size_t k, double offset_scale);

/// Point MLP (4 → h → h), neighbourhood mean, post-pool layer (2h → d) and the
/// step-1 seen-class classifier (d → |C^s|).
struct BackboneParams {
  BackboneConfig config;
  Linear point1, point2, post, classifier;

  BackboneParams() = default;
  BackboneParams(const BackboneConfig& cfg, std::size_t n_seen, std::uint64_t seed);

  std::vector<Parameter*> parameters();
  void set_frozen(bool frozen);
  bool frozen() const { return point1.weight.frozen; }
};

/// Records the per-point features (N×d) for one scene on `t`.
Var encode_features(Tape& t, const SceneGeometry& geom, BackboneParams& params);

/// Frozen-path encoder: features for every point of `scene`.
FeatureSet encode(const SceneSample& scene, BackboneParams& params);

/// Cosine decay from `base` to 0.1·base over `epochs`.
double cosine_lr(double base, std::size_t epoch, std::size_t epochs);

struct PretrainResult {
  BackboneParams params;
  double seen_accuracy = 0.0;
  std::vector<double> epoch_loss;
  /// Labels of unseen classes that reached the loss. Always zero unless the
  /// masking contract is broken.
  std::size_t unseen_in_loss = 0;
};

/// Step 1: cross-entropy over seen classes with unseen points masked out of
/// the loss. Returned parameters are frozen. On a non-finite loss the last
/// finished epoch's parameters are written to `last_stable` (when given) and
/// NumericalError is thrown.
PretrainResult pretrain(const std::vector<SceneSample>& train, const ClassSplit& split, const BackboneConfig& cfg,
                        std::uint64_t seed, BackboneParams* last_stable = nullptr);

/// Seen-class point accuracy of the step-1 classifier.
double seen_accuracy(const std::vector<SceneSample>& scenes, const ClassSplit& split, BackboneParams& params);

}  // namespace zshot
