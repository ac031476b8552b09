#include "zshot/generator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"
#include "zshot/optim.hpp"

namespace zshot {

GeneratorParams::GeneratorParams(std::size_t d_t, std::size_t d, std::size_t hidden, std::uint64_t seed) {
  if (d_t == 0 || d == 0 || hidden == 0) throw ConfigError("generator widths must be positive");
  Rng rng(derive_seed(seed, 0x6e));
  proj = Linear("gen.proj", d_t, d, true, rng);
  attn = CrossAttention(d, rng);
  gen1 = Linear("gen.g1", d, hidden, true, rng);
  gen2 = Linear("gen.g2", hidden, d, true, rng);
}

std::vector<Parameter*> GeneratorParams::parameters() {
  std::vector<Parameter*> ps;
  proj.collect(ps);
  attn.collect(ps);
  gen1.collect(ps);
  gen2.collect(ps);
  return ps;
}

void GeneratorParams::set_frozen(bool f) {
  for (Parameter* p : parameters()) p->frozen = f;
}

Var project_semantics(Tape& t, Var semantics, GeneratorParams& p) { return p.proj.forward(t, semantics); }

Tensor project_semantics(const Tensor& semantics, GeneratorParams& p) {
  Tape t;
  return project_semantics(t, t.constant(semantics), p).value();
}

Tensor sample_noise(std::size_t n, std::size_t d, double scale, bool single_z, Rng& rng) {
  if (!single_z) return gaussian(n, d, scale, rng);
  const Tensor z = gaussian(1, d, scale, rng);
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(z.data(), d, out.data() + i * d);
  return out;
}

Var generate(Tape& t, Var t_row, Var bank, GeneratorParams& p, const Tensor& noise, bool use_lgp) {
  if (t_row.rows() != 1) throw DimensionError("generate expects one semantic row, got " + t_row.value().shape_str());
  if (noise.cols() != p.dim()) throw DimensionError("noise width " + noise.shape_str() + " does not match d");
  // Every replicated row is identical up to the noise, so the projection and
  // attention run once and the sum is broadcast.
  Var t_hat = project_semantics(t, t_row, p);
  Var base = use_lgp ? add(t_hat, cross_attend(t, t_hat, bank, p.attn).out) : t_hat;
  Var h = add(replicate_rows(base, noise.rows()), t.constant(noise));
  return p.gen2.forward(t, leaky_relu(p.gen1.forward(t, h)));
}

FeatureSet synthesize(std::size_t c, std::size_t n_c, const Tensor& semantics, const LgpBank& bank,
                      GeneratorParams& p, const SynthOptions& opt, std::uint64_t seed) {
  if (c >= semantics.rows()) {
    throw LookupError("class " + std::to_string(c) + " has no semantic vector (table has " +
                      std::to_string(semantics.rows()) + " rows)");
  }
  if (n_c == 0) throw ContractError("synthesize needs N_c >= 1");
  Rng rng(derive_seed(seed, 0x5e00 + c));
  const Tensor noise = sample_noise(n_c, p.dim(), opt.noise_scale, opt.single_z, rng);
  Tape t;
  FeatureSet fs;
  fs.features = generate(t, t.constant(kernels::gather_rows(semantics, std::vector<std::size_t>{c})),
                         t.constant(bank.g.value), p, noise, opt.use_lgp)
                    .value();
  fs.labels.assign(n_c, c);
  fs.origin = FeatureOrigin::Synthetic;
  return fs;
}

namespace {

Var kernel_mean(Var a, Var b, const std::vector<double>& bandwidths) {
  return mean(gaussian_kernel(sq_dists(a, b), bandwidths));
}

}  // namespace

Var mmd_loss(Var real, Var fake, const std::vector<double>& bandwidths) {
  if (real.rows() == 0 || fake.rows() == 0) throw ContractError("mmd_loss needs non-empty feature sets");
  if (real.cols() != fake.cols()) {
    throw DimensionError("mmd_loss width mismatch: " + real.value().shape_str() + " vs " + fake.value().shape_str());
  }
  if (bandwidths.empty()) throw ContractError("mmd_loss needs at least one bandwidth");
  for (double b : bandwidths)
    if (!(b > 0.0)) throw ContractError("mmd_loss bandwidths must be positive");
  return sub(add(kernel_mean(real, real, bandwidths), kernel_mean(fake, fake, bandwidths)),
             scale(kernel_mean(real, fake, bandwidths), 2.0));
}

double mmd_value(const Tensor& real, const Tensor& fake, const std::vector<double>& bandwidths) {
  Tape t;
  return mmd_loss(t.constant(real), t.constant(fake), bandwidths).value().item();
}

std::vector<double> median_bandwidths(const Tensor& real, const std::vector<double>& factors) {
  const std::size_t n = real.rows();
  const Tensor all = kernels::sq_dists(real, real);
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(all(i, j));
  double med = 1.0;
  if (!d.empty()) {
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (*mid > 0.0) med = *mid;
  }
  std::vector<double> out;
  for (double f : factors) out.push_back(f * med);
  return out;
}

Var self_consistency_from_subsets(Var a, Var b, const std::vector<Var>& negatives, double tau1, Similarity kind) {
  if (!(tau1 > 0.0)) throw ContractError("tau1 must be positive");
  Var logits = set_similarity(a, b, kind);
  for (Var n : negatives) logits = concat_cols(logits, set_similarity(a, n, kind));
  const std::size_t zero = 0;
  return -sum(pick(log_softmax_rows(logits, tau1), std::span<const std::size_t>(&zero, 1)));
}

Var self_consistency_loss(Var fake, const std::vector<Var>& negatives, const GenLossConfig& cfg, std::size_t n_k,
                          Rng& rng) {
  const std::size_t n = fake.rows();
  if (n_k == 0 || n_k > n) {
    throw ContractError("self-consistency needs 1 <= N_k <= N_c (N_k = " + std::to_string(n_k) +
                        ", N_c = " + std::to_string(n) + ")");
  }
  const auto first = sample_without_replacement(n, n_k, rng);
  const auto second = sample_without_replacement(n, n_k, rng);
  return self_consistency_from_subsets(gather_rows(fake, first), gather_rows(fake, second), negatives, cfg.tau1,
                                       cfg.similarity);
}

Var generator_loss(const std::vector<ClassLoss>& terms, const std::vector<std::size_t>& seen, double lambda1) {
  if (terms.empty()) throw ContractError("generator_loss: no class terms");
  std::set<std::size_t> have;
  for (const auto& t : terms) {
    if (!std::binary_search(seen.begin(), seen.end(), t.cls)) {
      throw ContractError("generator_loss: class " + std::to_string(t.cls) + " is not a seen class");
    }
    if (!have.insert(t.cls).second) throw ContractError("generator_loss: duplicate term for class " + std::to_string(t.cls));
  }
  for (std::size_t c : seen)
    if (!have.count(c)) throw ContractError("generator_loss: missing term for seen class " + std::to_string(c));

  Var total = terms[0].mmd;
  if (lambda1 != 0.0) total = add(total, scale(terms[0].self, lambda1));
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = add(total, terms[i].mmd);
    if (lambda1 != 0.0) total = add(total, scale(terms[i].self, lambda1));
  }
  return total;
}

GeneratorResult train_generator(const ClassFeatures& real, const Tensor& semantics, const ClassSplit& split,
                                LgpBank& bank, const GeneratorConfig& cfg, std::uint64_t seed) {
  split.validate();
  for (const auto& [c, f] : real) {
    if (split.is_unseen(c)) throw ContractError("train_generator received real features of unseen class " + std::to_string(c));
  }
  for (std::size_t c : split.seen) {
    auto it = real.find(c);
    if (it == real.end() || it->second.rows() == 0) {
      throw ContractError("train_generator: no real features for seen class " + std::to_string(c));
    }
  }
  if (semantics.rows() != split.n_classes()) throw DimensionError("semantic table does not cover every class");
  const std::size_t n_k = cfg.loss.n_k ? cfg.loss.n_k : (cfg.n_c + 1) / 2;
  if (n_k > cfg.n_c) throw ContractError("N_k exceeds N_c");

  GeneratorResult res;
  res.params = GeneratorParams(semantics.cols(), bank.dim(), cfg.hidden, seed);
  GeneratorParams& p = res.params;
  const bool bank_was_frozen = bank.g.frozen;
  bank.g.frozen = !cfg.bank_trainable;
  auto params = p.parameters();
  params.push_back(&bank.g);
  Adam opt(params, AdamConfig{.lr = cfg.lr, .clip_norm = cfg.clip_norm});
  const double lambda1 = cfg.loss.use_self ? cfg.loss.lambda1 : 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cosine_lr(cfg.lr, epoch, cfg.epochs));
    Rng rng(derive_seed(seed, 0x6e000 + epoch));
    Tape t;
    Var g = t.param(bank.g);
    std::map<std::size_t, Var> batch;
    for (std::size_t c : split.seen) {
      const Tensor& f = real.at(c);
      const auto rows = sample_without_replacement(f.rows(), std::min(cfg.real_batch, f.rows()), rng);
      res.unseen_touched += split.is_unseen(c) ? rows.size() : 0;
      batch[c] = t.constant(kernels::gather_rows(f, rows));
    }
    std::vector<ClassLoss> terms;
    double mmd_sum = 0.0, self_sum = 0.0;
    for (std::size_t c : split.seen) {
      const Tensor noise = sample_noise(cfg.n_c, p.dim(), cfg.noise_scale, cfg.single_z, rng);
      Var fake = generate(t, t.constant(kernels::gather_rows(semantics, std::vector<std::size_t>{c})), g, p, noise,
                          cfg.use_lgp);
      Var mmd = mmd_loss(batch[c], fake, median_bandwidths(batch[c].value(), cfg.loss.bandwidth_factors));
      Var self = t.constant(Tensor(1, 1));
      if (lambda1 != 0.0) {
        std::vector<Var> negs;
        for (std::size_t o : split.seen) {
          if (o == c) continue;
          const std::size_t rows = batch[o].rows();
          negs.push_back(gather_rows(batch[o], sample_without_replacement(rows, std::min(n_k, rows), rng)));
        }
        self = self_consistency_loss(fake, negs, cfg.loss, n_k, rng);
      }
      mmd_sum += mmd.value().item();
      self_sum += self.value().item();
      terms.push_back({c, mmd, self});
    }
    Var loss = generator_loss(terms, split.seen, lambda1);
    const double total = loss.value().item();
    if (!std::isfinite(total)) throw NumericalError("generator loss is not finite in epoch " + std::to_string(epoch));
    t.backward(loss);
    opt.step();
    res.log.push_back({epoch, mmd_sum, self_sum, total});
  }
  p.set_frozen(true);
  bank.g.frozen = bank_was_frozen;
  return res;
}

double mean_class_mmd(const ClassFeatures& real, const Tensor& semantics, const LgpBank& bank, GeneratorParams& p,
                      const GeneratorConfig& cfg, std::uint64_t seed) {
  if (real.empty()) throw ContractError("mean_class_mmd: no classes");
  Rng rng(derive_seed(seed, 0x3d));
  double total = 0.0;
  for (const auto& [c, f] : real) {
    const std::size_t n = std::min<std::size_t>(f.rows(), 2 * cfg.real_batch);
    const Tensor r = kernels::gather_rows(f, sample_without_replacement(f.rows(), n, rng));
    const FeatureSet fake =
        synthesize(c, n, semantics, bank, p, {cfg.noise_scale, cfg.single_z, cfg.use_lgp}, derive_seed(seed, c));
    total += mmd_value(r, fake.features, median_bandwidths(r, cfg.loss.bandwidth_factors));
  }
  return total / static_cast<double>(real.size());
}

void write_gen_log(const std::vector<GenLogRow>& log, const std::filesystem::path& path) {
  std::string out = "epoch,mmd,self,total\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch) + ',' + io::fmt(r.mmd) + ',' + io::fmt(r.self) + ',' + io::fmt(r.total) + '\n';
  }
  io::write_text(path, out);
}

ClassFeatures group_by_class(const std::vector<FeatureSet>& sets, const std::vector<std::size_t>& keep) {
  std::map<std::size_t, std::vector<double>> rows;
  std::size_t d = 0;
  for (const auto& s : sets) {
    d = s.dim();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t c = s.labels[i];
      if (!keep.empty() && !std::binary_search(keep.begin(), keep.end(), c)) continue;
      auto r = s.features.row(i);
      rows[c].insert(rows[c].end(), r.begin(), r.end());
    }
  }
  ClassFeatures out;
  for (auto& [c, v] : rows) {
    const std::size_t n = v.size() / d;
    out.emplace(c, Tensor(n, d, std::move(v)));
  }
  return out;
}

}  // namespace zshot
