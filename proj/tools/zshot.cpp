// zshot: corpus synthesis, three-stage training, evaluation and ablations.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "plots.hpp"
#include "zshot/checkpoint.hpp"
#include "zshot/errors.hpp"
#include "zshot/io.hpp"
#include "zshot/pipeline.hpp"

namespace fs = std::filesystem;
using namespace zshot;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kContract = 3, kNumerical = 4 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> unseen;
  std::string out;
  bool force = false;
  std::vector<std::string> overrides;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path out_root() {
  const char* env = std::getenv("ZSHOT_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path out_dir(const Common& c, const std::string& fallback) {
  return c.out.empty() ? out_root() / fallback : fs::path(c.out);
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError(dir.string() + " exists and is not empty; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

// --config wins; otherwise a config.txt left in the run directory by an
// earlier stage; otherwise defaults. --set, --unseen and --seed apply on top.
ExperimentConfig resolve_config(const Common& c, const fs::path& dir, bool seed_is_corpus = false) {
  ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = load_config(c.config);
  } else if (!dir.empty() && fs::exists(dir / "config.txt")) {
    cfg = load_config(dir / "config.txt");
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.unseen) cfg.unseen = *c.unseen;
  if (c.seed) (seed_is_corpus ? cfg.corpus_seed : cfg.seed) = *c.seed;
  cfg.validate();
  return cfg;
}

RunManifest manifest_for(const ExperimentConfig& cfg, const Corpus& corpus) {
  RunManifest m;
  m.config = cfg.to_text();
  m.seed = cfg.seed;
  m.input_hash = io::hex64(io::fnv1a(m.config, corpus_hash(corpus)));
  return m;
}

std::vector<std::string> names_of(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& d : corpus.classes) out.push_back(d.name);
  return out;
}

std::vector<fs::path> write_plots(const Evaluation& ev, const Corpus& corpus, const fs::path& dir) {
  std::vector<bool> unseen(corpus.classes.size());
  for (std::size_t c : corpus.split.unseen) unseen[c] = true;
  std::vector<fs::path> out{dir / "iou.svg"};
  io::write_text(out[0], plots::iou_bars(names_of(corpus), ev.report.iou.iou, unseen));
  if (!ev.semantic_dists.empty()) {
    out.push_back(dir / "lgp_distributions.svg");
    io::write_text(out.back(), plots::lgp_heatmaps(names_of(corpus), ev.visual_means, ev.semantic_dists));
  }
  return out;
}

void print_report(const EvalReport& r) {
  std::printf("mIoU seen %.1f  unseen %.1f  all %.1f  HmIoU %.1f  (random unseen %.1f)\n", 100 * r.miou_seen,
              100 * r.miou_unseen, 100 * r.miou_all, 100 * r.hmiou, 100 * r.random_unseen);
}

// ---- commands ----------------------------------------------------------------

int cmd_synth(const Common& c) {
  const fs::path dir = out_dir(c, "corpus");
  ExperimentConfig cfg = resolve_config(c, {}, true);
  cfg.corpus_dir.clear();
  prepare_dir(dir, c.force);
  const Corpus corpus = build_corpus(cfg);
  RunManifest m = manifest_for(cfg, corpus);
  const auto t0 = Clock::now();
  m.artifacts = write_corpus(corpus, dir);
  m.timings.emplace_back("write", since(t0));
  m.write(dir);
  std::printf("wrote %zu train + %zu test scenes to %s\n", corpus.train.size(), corpus.test.size(),
              dir.string().c_str());
  return kOk;
}

void write_series(const std::vector<double>& v, const fs::path& path) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < v.size(); ++i) out += std::to_string(i) + ',' + io::fmt(v[i]) + '\n';
  io::write_text(path, out);
}

int cmd_train(const Common& c, const std::string& stage) {
  const fs::path dir = out_dir(c, "run");
  const bool fresh = stage == "all" || stage == "pretrain";
  ExperimentConfig cfg = resolve_config(c, fresh ? fs::path{} : dir);
  if (fresh) prepare_dir(dir, c.force);
  const Corpus corpus = build_corpus(cfg);
  RunManifest m = manifest_for(cfg, corpus);
  m.artifacts.push_back(dir / "config.txt");
  io::write_text(m.artifacts.back(), cfg.to_text());

  if (stage == "all") {
    RunResult run = run_all(cfg, corpus);
    if (run.freeze_violations != 0 || run.unseen_in_loss != 0) {
      throw ContractError("freeze or masking contract broken: " + std::to_string(run.freeze_violations) +
                          " frozen tensors changed, " + std::to_string(run.unseen_in_loss) + " unseen rows in losses");
    }
    const auto files = write_run_outputs(run, corpus, dir);
    m.artifacts.insert(m.artifacts.end(), files.begin(), files.end());
    const auto svgs = write_plots(run.eval, corpus, dir);
    m.artifacts.insert(m.artifacts.end(), svgs.begin(), svgs.end());
    m.timings = {{"pretrain", run.times.pretrain},
                 {"generator", run.times.generator},
                 {"alignment", run.times.alignment},
                 {"evaluate", run.times.evaluate}};
    std::printf("seen accuracy (step 1) %.3f, held-out MMD %.4f -> %.4f\n", run.seen_accuracy, run.mmd_initial,
                run.mmd_final);
    print_report(run.eval.report);
    m.write(dir);
    return kOk;
  }

  const auto t0 = Clock::now();
  if (stage == "pretrain") {
    PretrainResult pre = run_pretrain(corpus, cfg);
    Model model;
    model.backbone = pre.params;
    m.artifacts.push_back(dir / "backbone.ckpt");
    save_checkpoint(m.artifacts.back(), model.backbone_tensors());
    m.artifacts.push_back(dir / "pretrain.csv");
    write_series(pre.epoch_loss, m.artifacts.back());
    std::printf("seen accuracy %.3f\n", pre.seen_accuracy);
  } else if (stage == "generator") {
    Model model = load_model(cfg, corpus, dir, 1);
    FreezeGuard guard(model.backbone_tensors());
    const FeatureCache feats = encode_corpus(corpus, model.backbone);
    GeneratorStage g = run_generator(corpus, corpus.semantics, feats, cfg);
    if (guard.violations() != 0) throw ContractError("backbone changed during generator training");
    model.generator = g.params;
    auto tensors = model.generator_tensors();
    tensors.push_back(&g.bank.g);
    m.artifacts.push_back(dir / "generator.ckpt");
    save_checkpoint(m.artifacts.back(), tensors);
    m.artifacts.push_back(dir / "gen_train.csv");
    write_gen_log(g.log, m.artifacts.back());
    std::printf("held-out MMD %.4f -> %.4f\n", g.mmd_initial, g.mmd_final);
  } else if (stage == "alignment") {
    Model model = load_model(cfg, corpus, dir, 2);
    FreezeGuard guard(model.backbone_tensors());
    FreezeGuard gen_guard(model.generator_tensors());
    const FeatureCache feats = encode_corpus(corpus, model.backbone);
    AlignResult al = run_alignment(corpus, corpus.semantics, feats, cfg, model.generator, model.bank);
    if (guard.violations() + gen_guard.violations() != 0) {
      throw ContractError("backbone or generator changed during alignment training");
    }
    model.align = al.params;
    m.artifacts.push_back(dir / "alignment.ckpt");
    save_checkpoint(m.artifacts.back(), model.alignment_tensors());
    m.artifacts.push_back(dir / "align_train.csv");
    write_series(al.epoch_loss, m.artifacts.back());
    m.artifacts.push_back(dir / "lgp_bank.csv");
    write_bank_csv(model.bank, m.artifacts.back());
  } else {
    throw ConfigError("unknown stage '" + stage + "' (pretrain, generator, alignment, all)");
  }
  m.timings.emplace_back(stage, since(t0));
  m.write(dir);
  return kOk;
}

int cmd_eval(const Common& c) {
  const fs::path dir = out_dir(c, "run");
  ExperimentConfig cfg = resolve_config(c, dir);
  const Corpus corpus = build_corpus(cfg);
  RunManifest m = manifest_for(cfg, corpus);
  const auto t0 = Clock::now();
  Model model = load_model(cfg, corpus, dir, 3);
  const FeatureCache feats = encode_corpus(corpus, model.backbone);
  const Evaluation ev = evaluate(model, cfg, corpus, corpus.semantics, feats.test);
  m.artifacts = write_eval_outputs(ev, corpus, dir);
  const auto svgs = write_plots(ev, corpus, dir);
  m.artifacts.insert(m.artifacts.end(), svgs.begin(), svgs.end());
  m.timings.emplace_back("evaluate", since(t0));
  print_report(ev.report);
  std::printf("LGP entropy: visual %.3f, semantic %.3f nats\n", ev.report.entropy_visual, ev.report.entropy_semantic);
  m.write(dir);
  return kOk;
}

std::vector<Variant> suite_variants(const std::string& suite, const ExperimentConfig& cfg) {
  if (suite == "lgp") return {{"full", {}}, {"no_lgp_in_generator", {"no_lgp_in_generator=true"}}};
  if (suite == "self_loss") return {{"full", {}}, {"no_self_loss", {"no_self_loss=true"}}};
  if (suite == "alignment") return {{"full", {}}, {"no_alignment", {"no_alignment=true"}}};
  if (suite == "m_sweep") {
    std::vector<Variant> v;
    for (int m : {8, 16, 32, 64}) v.push_back({"M=" + std::to_string(m), {"m=" + std::to_string(m)}});
    return v;
  }
  if (suite == "embeddings") {
    const auto files = cfg.word_vector_files();
    if (files.empty()) throw ConfigError("the embeddings suite needs word_vectors=<file>[;<file>...]");
    std::vector<Variant> v{{"synthetic", {"word_vectors="}}};
    for (const auto& f : files) v.push_back({f.filename().string(), {"word_vectors=" + f.string()}});
    if (files.size() > 1) v.push_back({"concatenated", {"word_vectors=" + cfg.word_vectors}});
    return v;
  }
  throw ConfigError("unknown suite '" + suite + "' (lgp, self_loss, alignment, m_sweep, embeddings)");
}

struct Stat {
  double mean = 0.0, sd = 0.0;
};

Stat stat(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(s.sd / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

std::string pm(const Stat& s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100 * s.mean, 100 * s.sd);
  return buf;
}

int cmd_ablate(const Common& c, const std::string& suite, std::size_t n_seeds) {
  const fs::path dir = out_dir(c, "ablate_" + suite);
  ExperimentConfig cfg = resolve_config(c, {});
  if (n_seeds < 1) throw ConfigError("--seeds must be at least 1");
  const auto variants = suite_variants(suite, cfg);
  prepare_dir(dir, c.force);
  const Corpus corpus = build_corpus(cfg);
  RunManifest m = manifest_for(cfg, corpus);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + i);

  const auto t0 = Clock::now();
  const auto runs = run_variants(cfg, corpus, seeds, variants, [](const VariantRun& r) {
    if (r.error.empty()) {
      std::fprintf(stderr, "%-22s seed %-3llu unseen %.1f  hmiou %.1f\n", r.variant.c_str(),
                   static_cast<unsigned long long>(r.seed), 100 * r.report.miou_unseen, 100 * r.report.hmiou);
    } else {
      std::fprintf(stderr, "%-22s seed %-3llu FAILED: %s\n", r.variant.c_str(),
                   static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
  });
  m.timings.emplace_back("ablate", since(t0));

  std::string csv = "variant,seed,miou_seen,miou_unseen,miou_all,hmiou,entropy_visual,entropy_semantic,error\n";
  bool failed = false;
  for (const auto& r : runs) {
    failed |= !r.error.empty();
    const auto& e = r.report;
    csv += r.variant + ',' + std::to_string(r.seed) + ',' + io::fmt(e.miou_seen) + ',' + io::fmt(e.miou_unseen) +
           ',' + io::fmt(e.miou_all) + ',' + io::fmt(e.hmiou) + ',' + io::fmt(e.entropy_visual) + ',' +
           io::fmt(e.entropy_semantic) + ",\"" + r.error + "\"\n";
  }
  m.artifacts.push_back(dir / ("ablation_" + suite + ".csv"));
  io::write_text(m.artifacts.back(), csv);

  std::string table = "| variant | seeds | mIoU seen | mIoU unseen | HmIoU |\n|---|---|---|---|---|\n";
  for (const auto& v : variants) {
    std::vector<double> s, u, h;
    for (const auto& r : runs) {
      if (r.variant != v.name || !r.error.empty()) continue;
      s.push_back(r.report.miou_seen);
      u.push_back(r.report.miou_unseen);
      h.push_back(r.report.hmiou);
    }
    table += "| " + v.name + " | " + std::to_string(s.size()) + " | " + pm(stat(s)) + " | " + pm(stat(u)) + " | " +
             pm(stat(h)) + " |\n";
  }
  m.artifacts.push_back(dir / ("ablation_" + suite + ".md"));
  io::write_text(m.artifacts.back(), table);
  std::cout << table;
  m.write(dir);
  return failed ? kFailure : kOk;
}

int cmd_report(const Common& c) {
  const fs::path dir = out_dir(c, "run");
  bool any = false;
  if (fs::exists(dir / "report.csv")) {
    any = true;
    std::map<std::string, std::string> kv;
    for (const auto& line : io::read_lines(dir / "report.csv")) {
      const auto parts = io::split(line, ',');
      if (parts.size() == 2) kv[parts[0]] = parts[1];
    }
    auto pct = [&](const char* k) { return kv.count(k) ? io::parse_double(kv[k]) : std::nan(""); };
    std::printf("%-12s %8s %8s %8s %8s\n", "run", "seen", "unseen", "all", "HmIoU");
    std::printf("%-12s %8.1f %8.1f %8.1f %8.1f\n", dir.filename().string().c_str(), pct("miou_seen"),
                pct("miou_unseen"), pct("miou_all"), pct("hmiou"));
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("ablation_", 0) == 0 && e.path().extension() == ".md") {
      any = true;
      std::cout << "\n" << name << "\n" << io::read_text(e.path());
    }
  }
  if (!any) throw LoadError("no report.csv or ablation tables in " + dir.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot point-cloud segmentation with latent geometric prototypes"};
  app.require_subcommand(1);
  Common common;
  std::string stage = "all", suite;
  std::size_t n_seeds = 5;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "flat key = value config file");
    sub->add_option("--seed", common.seed, "training seed (corpus seed for synth)");
    sub->add_option("--unseen", common.unseen, "number of unseen classes");
    sub->add_option("--out", common.out, "output directory (default $ZSHOT_OUT_DIR/<command>)");
    sub->add_flag("--force", common.force, "overwrite a non-empty output directory");
    sub->add_option("--set", common.overrides, "key=value override, repeatable");
  };
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  add_common(synth);
  auto* train = app.add_subcommand("train", "run training stages");
  add_common(train);
  train->add_option("--stage", stage, "pretrain | generator | alignment | all")
      ->check(CLI::IsMember({"pretrain", "generator", "alignment", "all"}));
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints in --out");
  add_common(eval);
  auto* ablate = app.add_subcommand("ablate", "run an ablation suite over seeds");
  add_common(ablate);
  ablate->add_option("--suite", suite, "lgp | self_loss | alignment | m_sweep | embeddings")->required();
  ablate->add_option("--seeds", n_seeds, "number of seeds (starting at --seed)");
  auto* report = app.add_subcommand("report", "print the reports found in --out");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*train) return cmd_train(common, stage);
    if (*eval) return cmd_eval(common);
    if (*ablate) return cmd_ablate(common, suite, n_seeds);
    if (*report) return cmd_report(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kContract;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
