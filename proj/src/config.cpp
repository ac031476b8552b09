#include "zshot/config.hpp"

#include <functional>
#include <map>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"

namespace zshot {

namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
  long long x = 0;
  try {
    x = io::parse_int(v);
  } catch (const FormatError&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
  if (x < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v);
  } catch (const FormatError&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + v + "'");
}

std::string b(bool v) { return v ? "true" : "false"; }

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(const std::string&)>;
  auto sz = [&](std::size_t& f) { return Setter([&f, key](const std::string& v) { f = to_size(key, v); }); };
  auto u64 = [&](std::uint64_t& f) { return Setter([&f, key](const std::string& v) { f = to_size(key, v); }); };
  auto real = [&](double& f) { return Setter([&f, key](const std::string& v) { f = to_real(key, v); }); };
  auto flag = [&](bool& f) { return Setter([&f, key](const std::string& v) { f = to_bool(key, v); }); };
  auto str = [&](std::string& f) { return Setter([&f](const std::string& v) { f = v; }); };

  const std::map<std::string, Setter> table{
      {"corpus_seed", u64(corpus_seed)},
      {"split_seed", u64(split_seed)},
      {"unseen", sz(unseen)},
      {"train_scenes", sz(train_scenes)},
      {"test_scenes", sz(test_scenes)},
      {"points", sz(points)},
      {"d_t", sz(d_t)},
      {"semantic_noise", real(semantic_noise)},
      {"word_vectors", str(word_vectors)},
      {"corpus_dir", str(corpus_dir)},
      {"d", sz(d)},
      {"h", sz(h)},
      {"k", sz(k)},
      {"m", sz(m)},
      {"h_g", sz(h_g)},
      {"tau1", real(tau1)},
      {"tau2", real(tau2)},
      {"lambda1", real(lambda1)},
      {"n_c", sz(n_c)},
      {"n_k", sz(n_k)},
      {"pretrain_lr", real(pretrain_lr)},
      {"pretrain_epochs", sz(pretrain_epochs)},
      {"gen_lr", real(gen_lr)},
      {"gen_epochs", sz(gen_epochs)},
      {"align_lr", real(align_lr)},
      {"align_epochs", sz(align_epochs)},
      {"clip_norm", real(clip_norm)},
      {"seed", u64(seed)},
      {"no_lgp_in_generator", flag(no_lgp_in_generator)},
      {"no_self_loss", flag(no_self_loss)},
      {"no_alignment", flag(no_alignment)},
      {"lgp_trainable_step2", flag(lgp_trainable_step2)},
      {"single_z_mode", flag(single_z_mode)},
      {"zsl_trivial", flag(zsl_trivial)},
      {"similarity_kind", [this](const std::string& v) { similarity_kind = similarity_from_string(v); }},
      {"miou_empty_as_zero", flag(miou_empty_as_zero)},
  };
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(value);
}

void ExperimentConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(tau1, "tau1");
  positive(tau2, "tau2");
  positive(pretrain_lr, "pretrain_lr");
  positive(gen_lr, "gen_lr");
  positive(align_lr, "align_lr");
  if (lambda1 < 0.0) throw ConfigError("lambda1 must be non-negative");
  if (semantic_noise < 0.0) throw ConfigError("semantic_noise must be non-negative");
  if (m < 2) throw ConfigError("m (LGP count) must be at least 2");
  if (d < 2 || h == 0 || h_g == 0 || k == 0 || n_c == 0) throw ConfigError("model widths must be positive");
  if (n_k > n_c) throw ConfigError("n_k must not exceed n_c");
  if (train_scenes == 0 || test_scenes == 0) throw ConfigError("scene counts must be positive");
  if (unseen == 0) throw ConfigError("at least one unseen class is required");
  if (no_alignment && zsl_trivial) throw ConfigError("no_alignment and zsl_trivial cannot be combined");
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + '\n'; };
  auto num = [&](const char* k, double v) { kv(k, io::fmt(v)); };
  auto n = [&](const char* k, std::uint64_t v) { kv(k, std::to_string(v)); };
  n("corpus_seed", corpus_seed);
  n("split_seed", split_seed);
  n("unseen", unseen);
  n("train_scenes", train_scenes);
  n("test_scenes", test_scenes);
  n("points", points);
  n("d_t", d_t);
  num("semantic_noise", semantic_noise);
  kv("word_vectors", word_vectors);
  kv("corpus_dir", corpus_dir);
  n("d", d);
  n("h", h);
  n("k", k);
  n("m", m);
  n("h_g", h_g);
  num("tau1", tau1);
  num("tau2", tau2);
  num("lambda1", lambda1);
  n("n_c", n_c);
  n("n_k", n_k);
  num("pretrain_lr", pretrain_lr);
  n("pretrain_epochs", pretrain_epochs);
  num("gen_lr", gen_lr);
  n("gen_epochs", gen_epochs);
  num("align_lr", align_lr);
  n("align_epochs", align_epochs);
  num("clip_norm", clip_norm);
  n("seed", seed);
  kv("no_lgp_in_generator", b(no_lgp_in_generator));
  kv("no_self_loss", b(no_self_loss));
  kv("no_alignment", b(no_alignment));
  kv("lgp_trainable_step2", b(lgp_trainable_step2));
  kv("single_z_mode", b(single_z_mode));
  kv("zsl_trivial", b(zsl_trivial));
  kv("similarity_kind", to_string(similarity_kind));
  kv("miou_empty_as_zero", b(miou_empty_as_zero));
  return out;
}

BackboneConfig ExperimentConfig::backbone() const {
  BackboneConfig c;
  c.hidden = h;
  c.k = k;
  c.dim = d;
  c.lr = pretrain_lr;
  c.epochs = pretrain_epochs;
  c.clip_norm = clip_norm;
  return c;
}

GeneratorConfig ExperimentConfig::generator() const {
  GeneratorConfig c;
  c.hidden = h_g;
  c.n_c = n_c;
  c.single_z = single_z_mode;
  c.use_lgp = !no_lgp_in_generator;
  c.bank_trainable = lgp_trainable_step2;
  c.lr = gen_lr;
  c.epochs = gen_epochs;
  c.clip_norm = clip_norm;
  c.loss.tau1 = tau1;
  c.loss.lambda1 = lambda1;
  c.loss.n_k = n_k;
  c.loss.use_self = !no_self_loss;
  c.loss.similarity = similarity_kind == Similarity::Bhattacharyya ? Similarity::Cosine : similarity_kind;
  return c;
}

AlignConfig ExperimentConfig::alignment() const {
  AlignConfig c;
  c.tau2 = tau2;
  c.similarity = similarity_kind;
  c.lr = align_lr;
  c.epochs = align_epochs;
  c.n_c = n_c;
  c.clip_norm = clip_norm;
  c.seen_only = zsl_trivial;
  return c;
}

SynthOptions ExperimentConfig::synth() const {
  return SynthOptions{1.0, single_z_mode, !no_lgp_in_generator};
}

std::vector<std::filesystem::path> ExperimentConfig::word_vector_files() const {
  std::vector<std::filesystem::path> out;
  for (const auto& p : io::split(word_vectors, ';')) {
    const std::string t = io::trim(p);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig cfg;
  std::vector<std::string> lines;
  try {
    lines = io::read_lines(path);
  } catch (const LoadError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(i + 1) + ": expected key = value");
    }
    cfg.set(io::trim(line.substr(0, eq)), io::trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  cfg.set(io::trim(assignment.substr(0, eq)), io::trim(assignment.substr(eq + 1)));
}

}  // namespace zshot
