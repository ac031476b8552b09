#include "zshot/nn.hpp"

#include <cmath>
#include <numeric>

#include "zshot/errors.hpp"

namespace zshot {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
  if (count > n) throw ContractError("cannot sample " + std::to_string(count) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates; std::shuffle's draw pattern is library-specific.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, bool bias, Rng& rng)
    : weight(name + ".weight", gaussian(in, out, std::sqrt(2.0 / static_cast<double>(in + out)), rng)),
      bias(name + ".bias", Tensor(1, out)),
      has_bias(bias) {}

Var Linear::forward(Tape& t, Var x) {
  Var y = matmul(x, t.param(weight));
  return has_bias ? add(y, t.param(bias)) : y;
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

void Linear::set_frozen(bool f) {
  weight.frozen = f;
  bias.frozen = f;
}

}  // namespace zshot
