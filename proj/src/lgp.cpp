#include "zshot/lgp.hpp"

#include <cmath>
#include <string>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"

namespace zshot {

LgpBank init_bank(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m < 2 || d < 2) {
    throw ConfigError("LGP bank needs M >= 2 and d >= 2 (got M = " + std::to_string(m) + ", d = " + std::to_string(d) +
                      ")");
  }
  Rng rng(derive_seed(seed, 0x19b));
  return LgpBank{Parameter("lgp.bank", gaussian(m, d, 1.0 / std::sqrt(static_cast<double>(d)), rng))};
}

void write_bank_csv(const LgpBank& bank, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t j = 0; j < bank.dim(); ++j) out += (j ? ",g" : "g") + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t j = 0; j < bank.dim(); ++j) {
      if (j) out += ',';
      out += io::fmt(bank.g.value(i, j));
    }
    out += '\n';
  }
  io::write_text(path, out);
}

CrossAttention::CrossAttention(std::size_t d, Rng& rng)
    : wq("attn.wq", d, d, false, rng),
      wk("attn.wk", d, d, false, rng),
      wv("attn.wv", d, d, false, rng),
      wo("attn.wo", d, d, false, rng) {}

void CrossAttention::collect(std::vector<Parameter*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
}

void CrossAttention::set_frozen(bool f) {
  wq.set_frozen(f);
  wk.set_frozen(f);
  wv.set_frozen(f);
  wo.set_frozen(f);
}

Attended cross_attend(Tape& t, Var semantics, Var bank, CrossAttention& attn) {
  const std::size_t d = attn.dim();
  if (semantics.cols() != d || bank.cols() != d) {
    throw DimensionError("cross_attend expects width " + std::to_string(d) + ", got semantics " +
                         semantics.value().shape_str() + " and bank " + bank.value().shape_str());
  }
  Var q = attn.wq.forward(t, semantics);
  Var k = attn.wk.forward(t, bank);
  Var v = attn.wv.forward(t, bank);
  Var w = softmax_rows(matmul_nt(q, k), std::sqrt(static_cast<double>(d)));
  return Attended{attn.wo.forward(t, matmul(w, v)), w};
}

}  // namespace zshot
