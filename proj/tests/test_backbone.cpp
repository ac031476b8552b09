#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zshot/backbone.hpp"
#include "zshot/errors.hpp"
#include "zshot/generator.hpp"
#include "zshot/optim.hpp"
#include "zshot/pipeline.hpp"

using namespace zshot;

namespace {

SceneSample small_scene(std::uint64_t seed, std::size_t n = 96) {
  return make_scene(default_class_defs(), static_cast<std::int64_t>(seed), n, seed);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST_CASE("encode output shape follows the config") {
  for (std::size_t d : {8, 32}) {
    BackboneConfig cfg;
    cfg.dim = d;
    cfg.hidden = 16;
    BackboneParams p(cfg, 6, 1);
    SceneSample s = small_scene(1);
    FeatureSet fs = encode(s, p);
    CHECK(fs.features.rows() == s.points.rows());
    CHECK(fs.features.cols() == d);
    CHECK(fs.labels == s.labels);
    CHECK(fs.features.all_finite());
  }
}

TEST_CASE("encode is permutation equivariant") {
  BackboneConfig cfg;
  cfg.hidden = 16;
  BackboneParams p(cfg, 6, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSample s = small_scene(seed);
    std::vector<std::size_t> perm(s.points.rows());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    SceneSample t = s;
    t.points = kernels::gather_rows(s.points, perm);
    for (std::size_t i = 0; i < perm.size(); ++i) t.labels[i] = s.labels[perm[i]];
    const Tensor a = encode(s, p).features;
    const Tensor b = encode(t, p).features;
    CHECK(max_abs_diff(kernels::gather_rows(a, perm), b) < 1e-12);
  }
}

TEST_CASE("duplicating every point leaves features unchanged") {
  BackboneConfig cfg;
  cfg.hidden = 16;
  BackboneParams p(cfg, 6, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneSample s = small_scene(seed + 10);
    SceneSample dup = s;
    const std::size_t n = s.points.rows();
    dup.points = Tensor(2 * n, 3);
    dup.labels.resize(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) dup.points(i, j) = s.points(i % n, j);
      dup.labels[i] = s.labels[i % n];
    }
    const Tensor a = encode(s, p).features;
    const Tensor b = encode(dup, p).features;
    std::vector<std::size_t> first(n);
    std::iota(first.begin(), first.end(), 0);
    std::vector<std::size_t> second(n);
    std::iota(second.begin(), second.end(), n);
    CHECK(max_abs_diff(a, kernels::gather_rows(b, first)) < 1e-9);
    CHECK(max_abs_diff(a, kernels::gather_rows(b, second)) < 1e-9);
  }
}

TEST_CASE("encode needs at least k points") {
  BackboneConfig cfg;
  BackboneParams p(cfg, 6, 1);
  SceneSample s = small_scene(1, 64);
  s.points = kernels::gather_rows(s.points, std::vector<std::size_t>{0, 1, 2, 3, 4});
  s.labels.resize(5);
  CHECK_THROWS_AS(encode(s, p), ContractError);
}

TEST_CASE("pretraining loss has the right gradient") {
  BackboneConfig cfg;
  cfg.hidden = 5;
  cfg.dim = 4;
  cfg.k = 4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BackboneParams p(cfg, 3, seed);
    SceneSample s = small_scene(seed, 64);
    std::vector<std::size_t> keep(24);
    std::iota(keep.begin(), keep.end(), 0);
    const SceneGeometry geom = scene_geometry(kernels::gather_rows(s.points, keep), cfg.k, cfg.offset_scale);
    s.labels.resize(keep.size());
    std::vector<std::size_t> labels(s.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = s.labels[i] % 3;
    const double err = finite_diff_check(
        [&](Tape& t) { return cross_entropy(p.classifier.forward(t, encode_features(t, geom, p)), labels); },
        p.parameters());
    INFO("seed " << seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("frozen parameters receive no gradient") {
  BackboneConfig cfg;
  cfg.hidden = 8;
  BackboneParams p(cfg, 6, 4);
  p.set_frozen(true);
  SceneSample s = small_scene(4);
  const SceneGeometry geom = scene_geometry(s.points, cfg.k, cfg.offset_scale);
  Tape t;
  Var f = encode_features(t, geom, p);
  CHECK_FALSE(t.requires_grad(f));
  // A downstream trainable head still gets gradients while the encoder stays untouched.
  Parameter head("head", Tensor(cfg.dim, 1, 0.1));
  Var loss = sum(square(matmul(f, t.param(head))));
  t.backward(loss);
  CHECK(head.has_grad());
  for (Parameter* q : p.parameters()) CHECK_FALSE(q->has_grad());
}

TEST_CASE("pretraining on the default corpus") {
  ExperimentConfig cfg;
  Corpus corpus = build_corpus(cfg);
  PretrainResult r = pretrain(corpus.train, corpus.split, cfg.backbone(), 0);
  MESSAGE("seen accuracy " << r.seen_accuracy);
  CHECK(r.seen_accuracy > 0.85);
  CHECK(r.unseen_in_loss == 0);
  CHECK(r.params.frozen());
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());

  // A short generator run on top of the frozen encoder leaves it bitwise unchanged.
  Model m;
  m.backbone = r.params;
  FreezeGuard guard(m.backbone_tensors());
  FeatureCache feats = encode_corpus(corpus, m.backbone);
  LgpBank bank = init_bank(cfg.m, cfg.d, 0);
  GeneratorConfig gc = cfg.generator();
  gc.epochs = 2;
  train_generator(group_by_class(feats.train, corpus.split.seen), corpus.semantics.vectors, corpus.split, bank, gc,
                  0);
  CHECK(encode(corpus.test.front(), m.backbone).features == feats.test.front().features);
  CHECK(guard.violations() == 0);
}
