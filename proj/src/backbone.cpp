#include "zshot/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zshot/errors.hpp"
#include "zshot/optim.hpp"

namespace zshot {

SceneGeometry scene_geometry(const Tensor& points, std::size_t k, double offset_scale) {
  const std::size_t n = points.rows();
  if (points.cols() != 3) throw DimensionError("scene points must be Nx3, got " + points.shape_str());
  if (k == 0) throw ContractError("neighbourhood size k must be positive");
  if (n < k) {
    throw ContractError("encode needs N >= k (N = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");
  }
  SceneGeometry g;
  g.self_input = Tensor(n, 4);
  g.groups.resize(n);
  std::vector<double> edges;
  edges.reserve(n * k * 4);

  std::vector<std::pair<double, std::size_t>> order(n);
  auto same_pos = [&](std::size_t a, std::size_t b) {
    return points(a, 0) == points(b, 0) && points(a, 1) == points(b, 1) && points(a, 2) == points(b, 2);
  };
  std::size_t row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    g.self_input(i, 3) = points(i, 2);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = points(i, c) - points(j, c);
        s += d * d;
      }
      order[j] = {s, j};
    }
    // Sorting whole (distance, index) pairs gives lowest-index tie-breaking.
    std::size_t window = std::min(n, 2 * k + 8);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(window), order.end());
    std::vector<std::size_t> picked;
    for (std::size_t pos = 0; picked.size() < k && pos < n; ++pos) {
      if (pos == window) {
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(window), order.end());
        window = n;
      }
      const std::size_t j = order[pos].second;
      const bool dup = std::any_of(picked.begin(), picked.end(), [&](std::size_t q) { return same_pos(q, j); });
      if (dup) continue;
      picked.push_back(j);
      for (int c = 0; c < 3; ++c) edges.push_back(offset_scale * (points(j, c) - points(i, c)));
      edges.push_back(points(j, 2));
      g.groups[i].push_back(row++);
    }
  }
  g.edge_input = Tensor(row, 4, std::move(edges));
  return g;
}

BackboneParams::BackboneParams(const BackboneConfig& cfg, std::size_t n_seen, std::uint64_t seed) : config(cfg) {
  if (cfg.hidden == 0 || cfg.dim == 0) throw ConfigError("backbone widths must be positive");
  if (n_seen == 0) throw ConfigError("backbone classifier needs at least one seen class");
  Rng rng(derive_seed(seed, 0xbb));
  point1 = Linear("backbone.point1", 4, cfg.hidden, true, rng);
  point2 = Linear("backbone.point2", cfg.hidden, cfg.hidden, true, rng);
  post = Linear("backbone.post", 2 * cfg.hidden, cfg.dim, true, rng);
  classifier = Linear("backbone.classifier", cfg.dim, n_seen, true, rng);
}

std::vector<Parameter*> BackboneParams::parameters() {
  std::vector<Parameter*> ps;
  point1.collect(ps);
  point2.collect(ps);
  post.collect(ps);
  classifier.collect(ps);
  return ps;
}

void BackboneParams::set_frozen(bool f) {
  for (Parameter* p : parameters()) p->frozen = f;
}

Var encode_features(Tape& t, const SceneGeometry& geom, BackboneParams& p) {
  const double slope = 0.2;
  Var own = p.point2.forward(t, leaky_relu(p.point1.forward(t, t.constant(geom.self_input)), slope));
  // point2 is affine, so applying it after the mean equals the mean of the
  // neighbours' full MLP outputs.
  Var edge_hidden = leaky_relu(p.point1.forward(t, t.constant(geom.edge_input)), slope);
  Var pooled = p.point2.forward(t, pool_rows(edge_hidden, geom.groups));
  return p.post.forward(t, leaky_relu(concat_cols(own, pooled), slope));
}

FeatureSet encode(const SceneSample& scene, BackboneParams& params) {
  const SceneGeometry geom = scene_geometry(scene.points, params.config.k, params.config.offset_scale);
  Tape t;
  FeatureSet fs;
  fs.features = encode_features(t, geom, params).value();
  fs.labels = scene.labels;
  fs.origin = FeatureOrigin::Real;
  return fs;
}

namespace {

struct MaskedBatch {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> targets;  // index into split.seen
};

MaskedBatch seen_rows(const std::vector<std::size_t>& labels, const ClassSplit& split) {
  MaskedBatch b;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::lower_bound(split.seen.begin(), split.seen.end(), labels[i]);
    if (it == split.seen.end() || *it != labels[i]) continue;
    b.rows.push_back(i);
    b.targets.push_back(static_cast<std::size_t>(it - split.seen.begin()));
  }
  return b;
}

}  // namespace

double cosine_lr(double base, std::size_t epoch, std::size_t epochs) {
  if (epochs <= 1) return base;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return base * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(3.141592653589793 * t)));
}

PretrainResult pretrain(const std::vector<SceneSample>& train, const ClassSplit& split, const BackboneConfig& cfg,
                        std::uint64_t seed, BackboneParams* last_stable) {
  split.validate();
  if (train.empty()) throw ConfigError("pretrain needs at least one training scene");
  PretrainResult res;
  res.params = BackboneParams(cfg, split.seen.size(), seed);
  BackboneParams& p = res.params;

  std::vector<SceneGeometry> geoms;
  std::vector<MaskedBatch> batches;
  for (const auto& s : train) {
    geoms.push_back(scene_geometry(s.points, cfg.k, cfg.offset_scale));
    batches.push_back(seen_rows(s.labels, split));
  }

  Adam opt(p.parameters(), AdamConfig{.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  Rng rng(derive_seed(seed, 0xb1));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  BackboneParams stable = p;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cosine_lr(cfg.lr, epoch, cfg.epochs));
    const auto perm = sample_without_replacement(order.size(), order.size(), rng);
    double total = 0.0;
    std::size_t used = 0;
    try {
      for (std::size_t s : perm) {
        const MaskedBatch& b = batches[s];
        if (b.rows.empty()) continue;
        for (std::size_t r : b.rows)
          if (split.is_unseen(train[s].labels[r])) ++res.unseen_in_loss;
        Tape t;
        Var feats = encode_features(t, geoms[s], p);
        Var logits = p.classifier.forward(t, gather_rows(feats, b.rows));
        Var loss = cross_entropy(logits, b.targets);
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) throw NumericalError("pretrain loss is not finite");
        total += lv;
        ++used;
        t.backward(loss);
        opt.step();
      }
    } catch (const NumericalError& e) {
      if (last_stable) *last_stable = stable;
      throw NumericalError("pretrain diverged in epoch " + std::to_string(epoch) + ": " + e.what());
    }
    res.epoch_loss.push_back(used ? total / static_cast<double>(used) : 0.0);
    stable = p;
  }
  p.set_frozen(true);
  res.seen_accuracy = seen_accuracy(train, split, p);
  return res;
}

double seen_accuracy(const std::vector<SceneSample>& scenes, const ClassSplit& split, BackboneParams& params) {
  std::size_t correct = 0, total = 0;
  for (const auto& s : scenes) {
    const MaskedBatch b = seen_rows(s.labels, split);
    if (b.rows.empty()) continue;
    const SceneGeometry geom = scene_geometry(s.points, params.config.k, params.config.offset_scale);
    Tape t;
    const Tensor logits = params.classifier.forward(t, gather_rows(encode_features(t, geom, params), b.rows)).value();
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
      auto r = logits.row(i);
      const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
      correct += best == b.targets[i];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace zshot
