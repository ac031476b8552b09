#include "zshot/pipeline.hpp"

#include <map>
#include <numeric>

#include "zshot/checkpoint.hpp"
#include "zshot/errors.hpp"
#include "zshot/io.hpp"

namespace zshot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::uint64_t stage) { return derive_seed(cfg.seed, stage); }

std::vector<std::string> class_names(const Corpus& c) {
  std::vector<std::string> out;
  for (const auto& d : c.classes) out.push_back(d.name);
  return out;
}

void write_matrix_csv(const Tensor& m, const std::vector<std::string>& names, const std::filesystem::path& path) {
  std::string out = "class";
  for (std::size_t j = 0; j < m.cols(); ++j) out += ",w" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += i < names.size() ? names[i] : std::to_string(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out += ',' + io::fmt(m(i, j));
    out += '\n';
  }
  io::write_text(path, out);
}

void write_series_csv(const std::vector<double>& v, const std::filesystem::path& path) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < v.size(); ++i) out += std::to_string(i) + ',' + io::fmt(v[i]) + '\n';
  io::write_text(path, out);
}

}  // namespace

SemanticTable resolve_semantics(const ExperimentConfig& cfg, const Corpus& corpus) {
  const auto files = cfg.word_vector_files();
  if (!files.empty()) return load_word_vectors(files, class_names(corpus));
  const bool have_defs = !corpus.classes.empty() && !corpus.classes[0].parts.empty();
  if (have_defs) return synth_semantic_embeddings(corpus.classes, cfg.d_t, cfg.semantic_noise, cfg.corpus_seed);
  return corpus.semantics;
}

Corpus build_corpus(const ExperimentConfig& cfg) {
  Corpus c;
  if (!cfg.corpus_dir.empty()) {
    c = read_corpus(cfg.corpus_dir);
  } else {
    c.classes = default_class_defs();
    c.split = split_classes(c.classes.size(), cfg.unseen, cfg.split_seed);
    c.train = compose_corpus(c.classes, cfg.train_scenes, cfg.points, cfg.corpus_seed);
    c.test = compose_corpus(c.classes, cfg.test_scenes, cfg.points, cfg.corpus_seed,
                            static_cast<std::int64_t>(cfg.train_scenes));
  }
  c.semantics = resolve_semantics(cfg, c);
  if (c.semantics.n_classes() != c.classes.size()) {
    throw ConfigError("semantic table has " + std::to_string(c.semantics.n_classes()) + " rows for " +
                      std::to_string(c.classes.size()) + " classes");
  }
  return c;
}

FeatureCache encode_corpus(const Corpus& corpus, BackboneParams& backbone) {
  FeatureCache fc;
  for (const auto& s : corpus.train) fc.train.push_back(encode(s, backbone));
  for (const auto& s : corpus.test) fc.test.push_back(encode(s, backbone));
  return fc;
}

std::vector<const Parameter*> Model::backbone_tensors() const {
  auto ps = const_cast<BackboneParams&>(backbone).parameters();
  return {ps.begin(), ps.end()};
}

std::vector<const Parameter*> Model::generator_tensors() const {
  auto ps = const_cast<GeneratorParams&>(generator).parameters();
  return {ps.begin(), ps.end()};
}

std::vector<const Parameter*> Model::alignment_tensors() const {
  auto ps = const_cast<AlignParams&>(align).parameters();
  std::vector<const Parameter*> out(ps.begin(), ps.end());
  out.push_back(&bank.g);
  return out;
}

FreezeGuard::FreezeGuard(const std::vector<const Parameter*>& params) : params_(params) {
  for (const Parameter* p : params) saved_.push_back(p->value);
}

std::size_t FreezeGuard::violations() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.size(); ++i) n += !(params_[i]->value == saved_[i]);
  return n;
}

PretrainResult run_pretrain(const Corpus& corpus, const ExperimentConfig& cfg) {
  return pretrain(corpus.train, corpus.split, cfg.backbone(), stage_seed(cfg, 0));
}

GeneratorStage run_generator(const Corpus& corpus, const SemanticTable& semantics, const FeatureCache& feats,
                             const ExperimentConfig& cfg) {
  GeneratorStage out;
  out.bank = init_bank(cfg.m, cfg.d, stage_seed(cfg, 1));
  const GeneratorConfig gcfg = cfg.generator();
  const ClassFeatures train = group_by_class(feats.train, corpus.split.seen);
  const ClassFeatures held_out = group_by_class(feats.test, corpus.split.seen);
  const std::uint64_t gseed = stage_seed(cfg, 2);

  GeneratorParams initial(semantics.dim(), cfg.d, cfg.h_g, gseed);
  if (!held_out.empty()) out.mmd_initial = mean_class_mmd(held_out, semantics.vectors, out.bank, initial, gcfg, gseed);

  GeneratorResult r = train_generator(train, semantics.vectors, corpus.split, out.bank, gcfg, gseed);
  out.params = std::move(r.params);
  out.log = std::move(r.log);
  out.unseen_touched = r.unseen_touched;
  if (!held_out.empty()) out.mmd_final = mean_class_mmd(held_out, semantics.vectors, out.bank, out.params, gcfg, gseed);
  return out;
}

AlignResult run_alignment(const Corpus& corpus, const SemanticTable& semantics, const FeatureCache& feats,
                          const ExperimentConfig& cfg, GeneratorParams& gen, LgpBank& bank) {
  return train_alignment(feats.train, corpus.split, semantics.vectors, gen, bank, cfg.synth(), cfg.alignment(),
                         stage_seed(cfg, 3));
}

Evaluation evaluate(Model& model, const ExperimentConfig& cfg, const Corpus& corpus, const SemanticTable& semantics,
                    const std::vector<FeatureSet>& test) {
  const std::size_t k = corpus.split.n_classes();
  const std::vector<std::size_t> allowed = cfg.zsl_trivial ? corpus.split.seen : std::vector<std::size_t>{};
  const Tensor t_hat = project_semantics(semantics.vectors, model.generator);

  Evaluation ev;
  IouResult iou;
  iou.n_classes = k;
  iou.confusion.assign(k * k, 0);
  std::vector<std::size_t> all_labels;
  double entropy_sum = 0.0;
  std::size_t points = 0;
  const std::size_t m = model.bank.size();
  ev.visual_means = Tensor(k, m);
  std::vector<double> per_class(k, 0.0);

  if (!cfg.no_alignment) ev.semantic_dists = rerepresent_semantic(t_hat, model.bank, model.align);
  for (const auto& fs : test) {
    std::vector<std::size_t> pred;
    if (cfg.no_alignment) {
      pred = classify(fs.features, t_hat, Similarity::Cosine, allowed);
    } else {
      const Tensor dists = rerepresent_visual(fs.features, model.bank, model.align);
      pred = classify(dists, ev.semantic_dists, cfg.similarity_kind, allowed);
      entropy_sum += lgp_entropy(dists) * static_cast<double>(dists.rows());
      for (std::size_t i = 0; i < dists.rows(); ++i) {
        per_class[fs.labels[i]] += 1.0;
        for (std::size_t j = 0; j < m; ++j) ev.visual_means(fs.labels[i], j) += dists(i, j);
      }
    }
    points += fs.size();
    accumulate(iou, pred, fs.labels);
    all_labels.insert(all_labels.end(), fs.labels.begin(), fs.labels.end());
  }
  for (std::size_t c = 0; c < k; ++c)
    if (per_class[c] > 0.0)
      for (std::size_t j = 0; j < m; ++j) ev.visual_means(c, j) /= per_class[c];

  ev.report = make_report(iou, corpus.split, cfg.miou_empty_as_zero);
  ev.report.random_unseen = random_baseline_miou(all_labels, k, corpus.split.unseen);
  if (!cfg.no_alignment) {
    ev.report.entropy_visual = points ? entropy_sum / static_cast<double>(points) : 0.0;
    ev.report.entropy_semantic = lgp_entropy(ev.semantic_dists);
  }
  return ev;
}

RunResult run_all(const ExperimentConfig& cfg, const Corpus& corpus) {
  cfg.validate();
  RunResult run;
  const SemanticTable& semantics = corpus.semantics;

  auto t0 = Clock::now();
  PretrainResult pre = run_pretrain(corpus, cfg);
  run.model.backbone = std::move(pre.params);
  run.seen_accuracy = pre.seen_accuracy;
  run.pretrain_loss = std::move(pre.epoch_loss);
  run.unseen_in_loss = pre.unseen_in_loss;
  run.times.pretrain = seconds_since(t0);

  FreezeGuard backbone_guard(run.model.backbone_tensors());
  const FeatureCache feats = encode_corpus(corpus, run.model.backbone);

  t0 = Clock::now();
  GeneratorStage gen = run_generator(corpus, semantics, feats, cfg);
  run.model.generator = std::move(gen.params);
  run.model.bank = std::move(gen.bank);
  run.bank_after_generator = run.model.bank;
  run.gen_log = std::move(gen.log);
  run.mmd_initial = gen.mmd_initial;
  run.mmd_final = gen.mmd_final;
  run.unseen_in_loss += gen.unseen_touched;
  run.times.generator = seconds_since(t0);

  FreezeGuard generator_guard(run.model.generator_tensors());
  t0 = Clock::now();
  if (cfg.no_alignment) {
    run.model.align = AlignParams(cfg.d, 0.0, stage_seed(cfg, 3));
  } else {
    AlignResult al = run_alignment(corpus, semantics, feats, cfg, run.model.generator, run.model.bank);
    run.model.align = std::move(al.params);
    run.align_loss = std::move(al.epoch_loss);
  }
  run.times.alignment = seconds_since(t0);

  t0 = Clock::now();
  run.eval = evaluate(run.model, cfg, corpus, semantics, feats.test);
  run.times.evaluate = seconds_since(t0);
  run.freeze_violations = backbone_guard.violations() + generator_guard.violations();
  return run;
}

Model load_model(const ExperimentConfig& cfg, const Corpus& corpus, const std::filesystem::path& dir, int stages) {
  auto need = [&](const char* file, const char* stage) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) {
      throw LoadError(std::string("missing ") + path.string() + "; run the " + stage + " stage first");
    }
    return path;
  };
  Model m;
  m.backbone = BackboneParams(cfg.backbone(), corpus.split.seen.size(), 0);
  auto bb = m.backbone.parameters();
  load_checkpoint(need("backbone.ckpt", "pretrain"), bb);
  m.backbone.set_frozen(true);
  m.generator = GeneratorParams(corpus.semantics.dim(), cfg.d, cfg.h_g, 0);
  m.bank = init_bank(cfg.m, cfg.d, 0);
  m.align = AlignParams(cfg.d, 0.0, stage_seed(cfg, 3));
  if (stages >= 2) {
    auto gen = m.generator.parameters();
    gen.push_back(&m.bank.g);
    load_checkpoint(need("generator.ckpt", "generator"), gen);
    m.generator.set_frozen(true);
  }
  if (stages >= 3 && !cfg.no_alignment) {
    auto al = m.align.parameters();
    al.push_back(&m.bank.g);
    load_checkpoint(need("alignment.ckpt", "alignment"), al);
  }
  m.align.set_frozen(true);
  return m;
}

std::vector<std::filesystem::path> write_eval_outputs(const Evaluation& eval, const Corpus& corpus,
                                                      const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out{dir / "report.csv", dir / "report.json", dir / "confusion.csv"};
  write_report_csv(eval.report, out[0]);
  write_report_json(eval.report, class_names(corpus), out[1]);
  write_confusion_csv(eval.report.iou, out[2]);
  if (!eval.semantic_dists.empty()) {
    out.push_back(dir / "lgp_weights_visual.csv");
    write_matrix_csv(eval.visual_means, class_names(corpus), out.back());
    out.push_back(dir / "lgp_weights_semantic.csv");
    write_matrix_csv(eval.semantic_dists, class_names(corpus), out.back());
  }
  return out;
}

std::vector<std::filesystem::path> write_run_outputs(const RunResult& run, const Corpus& corpus,
                                                     const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  out.push_back(dir / "pretrain.csv");
  write_series_csv(run.pretrain_loss, out.back());
  out.push_back(dir / "gen_train.csv");
  write_gen_log(run.gen_log, out.back());
  out.push_back(dir / "align_train.csv");
  write_series_csv(run.align_loss, out.back());
  out.push_back(dir / "backbone.ckpt");
  save_checkpoint(out.back(), run.model.backbone_tensors());
  out.push_back(dir / "generator.ckpt");
  auto gen = run.model.generator_tensors();
  gen.push_back(&run.bank_after_generator.g);
  save_checkpoint(out.back(), gen);
  if (!run.align_loss.empty()) {
    out.push_back(dir / "alignment.ckpt");
    save_checkpoint(out.back(), run.model.alignment_tensors());
  }
  out.push_back(dir / "lgp_bank.csv");
  write_bank_csv(run.model.bank, out.back());
  const auto ev = write_eval_outputs(run.eval, corpus, dir);
  out.insert(out.end(), ev.begin(), ev.end());
  return out;
}

std::vector<VariantRun> run_variants(const ExperimentConfig& base, const Corpus& corpus,
                                     const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants,
                                     const std::function<void(const VariantRun&)>& progress) {
  std::vector<VariantRun> out;
  for (std::uint64_t seed : seeds) {
    std::map<std::string, std::pair<BackboneParams, FeatureCache>> backbones;
    std::map<std::string, GeneratorStage> generators;
    for (const Variant& v : variants) {
      VariantRun vr{v.name, seed, {}, {}};
      try {
        ExperimentConfig cfg = base;
        for (const auto& o : v.overrides) apply_override(cfg, o);
        cfg.seed = seed;
        cfg.validate();
        const SemanticTable semantics = resolve_semantics(cfg, corpus);

        ExperimentConfig bkey;
        bkey.seed = seed;
        bkey.h = cfg.h;
        bkey.k = cfg.k;
        bkey.d = cfg.d;
        bkey.pretrain_lr = cfg.pretrain_lr;
        bkey.pretrain_epochs = cfg.pretrain_epochs;
        bkey.clip_norm = cfg.clip_norm;
        auto bit = backbones.find(bkey.to_text());
        if (bit == backbones.end()) {
          PretrainResult pre = run_pretrain(corpus, cfg);
          FeatureCache fc = encode_corpus(corpus, pre.params);
          bit = backbones.emplace(bkey.to_text(), std::make_pair(std::move(pre.params), std::move(fc))).first;
        }
        const FeatureCache& feats = bit->second.second;

        ExperimentConfig gkey = cfg;
        gkey.tau2 = ExperimentConfig{}.tau2;
        gkey.align_lr = ExperimentConfig{}.align_lr;
        gkey.align_epochs = ExperimentConfig{}.align_epochs;
        gkey.no_alignment = gkey.zsl_trivial = gkey.miou_empty_as_zero = false;
        gkey.similarity_kind = cfg.generator().loss.similarity;
        const std::string gk = gkey.to_text() + bkey.to_text();
        auto git = generators.find(gk);
        if (git == generators.end()) git = generators.emplace(gk, run_generator(corpus, semantics, feats, cfg)).first;

        Model model;
        model.backbone = bit->second.first;
        model.generator = git->second.params;
        model.bank = git->second.bank;
        if (cfg.no_alignment) {
          model.align = AlignParams(cfg.d, 0.0, stage_seed(cfg, 3));
        } else {
          model.align = run_alignment(corpus, semantics, feats, cfg, model.generator, model.bank).params;
        }
        vr.report = evaluate(model, cfg, corpus, semantics, feats.test).report;
      } catch (const std::exception& e) {
        vr.error = e.what();
      }
      if (progress) progress(vr);
      out.push_back(std::move(vr));
    }
  }
  return out;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::uint64_t h = io::fnv1a("");
  auto bytes = [&](const void* p, std::size_t n) {
    h = io::fnv1a(std::string_view(static_cast<const char*>(p), n), h);
  };
  for (const auto* set : {&corpus.train, &corpus.test}) {
    for (const auto& s : *set) {
      bytes(s.points.data(), s.points.size() * sizeof(double));
      for (std::size_t y : s.labels) {
        const std::uint64_t v = y;
        bytes(&v, sizeof v);
      }
    }
  }
  bytes(corpus.semantics.vectors.data(), corpus.semantics.vectors.size() * sizeof(double));
  return h;
}

std::filesystem::path RunManifest::write(const std::filesystem::path& dir) const {
  std::string out = "seed = " + std::to_string(seed) + '\n';
  out += "input_hash = " + input_hash + '\n';
  for (const auto& [stage, secs] : timings) out += "time_" + stage + " = " + io::fmt(secs) + '\n';
  out += "[config]\n" + config;
  out += "[artifacts]\n";
  for (const auto& p : artifacts) out += p.string() + '\n';
  const auto path = dir / "manifest.txt";
  io::write_text(path, out);
  return path;
}

}  // namespace zshot
