#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "zshot/autodiff.hpp"
#include "zshot/nn.hpp"

namespace zshot {

/// Learnable M×d prototype matrix shared by the generator and alignment.
struct LgpBank {
  Parameter g;

  std::size_t size() const { return g.value.rows(); }
  std::size_t dim() const { return g.value.cols(); }
};

/// Rows i.i.d. N(0, 1/d).
LgpBank init_bank(std::size_t m, std::size_t d, std::uint64_t seed);

void write_bank_csv(const LgpBank& bank, const std::filesystem::path& path);

/// Single-head scaled dot-product attention from semantic queries to the
/// bank: softmax(Q·Kᵀ/√d)·V·W_O with Q = s·W_Q, K = G·W_K, V = G·W_V.
struct CrossAttention {
  Linear wq, wk, wv, wo;

  CrossAttention() = default;
  CrossAttention(std::size_t d, Rng& rng);

  std::size_t dim() const { return wq.in_dim(); }
  void collect(std::vector<Parameter*>& out);
  void set_frozen(bool f);
};

struct Attended {
  Var out;      // N×d
  Var weights;  // N×M, rows sum to 1
};

Attended cross_attend(Tape& t, Var semantics, Var bank, CrossAttention& attn);

}  // namespace zshot
