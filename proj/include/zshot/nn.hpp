#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zshot/autodiff.hpp"

namespace zshot {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream id (splitmix64 finaliser) so that derived
/// streams are decorrelated and independent of call order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng);
/// `count` distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng);

/// y = x·W (+ b). W is in×out.
struct Linear {
  Parameter weight;
  Parameter bias;
  bool has_bias = true;

  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, bool bias, Rng& rng);

  Var forward(Tape& t, Var x);
  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }
  void collect(std::vector<Parameter*>& out);
  void set_frozen(bool f);
};

}  // namespace zshot
