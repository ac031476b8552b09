#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "zshot/errors.hpp"
#include "zshot/lgp.hpp"
#include "zshot/optim.hpp"

using namespace zshot;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return gaussian(r, c, sd, rng);
}

}  // namespace

TEST_CASE("init_bank shape, scale and determinism") {
  LgpBank a = init_bank(16, 32, 3);
  LgpBank b = init_bank(16, 32, 3);
  LgpBank c = init_bank(16, 32, 4);
  CHECK(a.size() == 16);
  CHECK(a.dim() == 32);
  CHECK(a.g.value == b.g.value);
  CHECK_FALSE(a.g.value == c.g.value);
  CHECK(a.g.value.all_finite());

  LgpBank big = init_bank(128, 64, 1);
  double ss = 0.0;
  for (double v : big.g.value.values()) ss += v * v;
  const double var = ss / static_cast<double>(128 * 64);
  CHECK(var == doctest::Approx(1.0 / 64.0).epsilon(0.1));

  CHECK_THROWS_AS(init_bank(1, 8, 0), ConfigError);
  CHECK_THROWS_AS(init_bank(8, 1, 0), ConfigError);
}

TEST_CASE("single prototype: output is W_O(V row) for every query") {
  Rng rng(5);
  CrossAttention attn(4, rng);
  Tensor g = random_tensor(1, 4, 6);
  Tape t;
  Attended r = cross_attend(t, t.constant(random_tensor(3, 4, 7, 5.0)), t.constant(g), attn);
  Tensor expect = kernels::matmul(kernels::matmul(g, attn.wv.weight.value), attn.wo.weight.value);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.weights.value()(i, 0) == 1.0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(r.out.value()(i, j) == doctest::Approx(expect(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("attention rows are distributions") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CrossAttention attn(8, rng);
    Tape t;
    Attended r = cross_attend(t, t.constant(random_tensor(5, 8, seed + 100, 3.0)),
                              t.constant(random_tensor(16, 8, seed + 200)), attn);
    const Tensor& w = r.weights.value();
    for (std::size_t i = 0; i < w.rows(); ++i) {
      double z = 0.0;
      for (double v : w.row(i)) {
        CHECK(v >= 0.0);
        z += v;
      }
      CHECK(std::abs(z - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("cross_attend rejects width mismatch") {
  Rng rng(0);
  CrossAttention attn(4, rng);
  Tape t;
  CHECK_THROWS_AS(cross_attend(t, t.constant(Tensor(2, 3)), t.constant(Tensor(4, 4)), attn), DimensionError);
  CHECK_THROWS_AS(cross_attend(t, t.constant(Tensor(2, 4)), t.constant(Tensor(4, 5)), attn), DimensionError);
}

TEST_CASE("gradient with respect to the bank matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CrossAttention attn(4, rng);
    attn.set_frozen(true);
    Tensor s = random_tensor(3, 4, seed + 50);
    Tensor y = random_tensor(3, 4, seed + 60);
    const double err = finite_diff_check(
        [&](Tape& t, Var g) { return sum(mul(cross_attend(t, t.constant(s), g, attn).out, t.constant(y))); },
        random_tensor(6, 4, seed + 70));
    INFO("seed " << seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("attention parameters get gradients too") {
  Rng rng(9);
  CrossAttention attn(4, rng);
  LgpBank bank = init_bank(5, 4, 9);
  Tensor s = random_tensor(2, 4, 10);
  std::vector<Parameter*> ps;
  attn.collect(ps);
  ps.push_back(&bank.g);
  const double err = finite_diff_check(
      [&](Tape& t) { return sum(square(cross_attend(t, t.constant(s), t.param(bank.g), attn).out)); }, ps);
  CHECK(err < 1e-4);
}

TEST_CASE("scaling the bank matches the algebraic recomputation") {
  Rng rng(11);
  CrossAttention attn(4, rng);
  Tensor s = random_tensor(3, 4, 12);
  Tensor g = random_tensor(6, 4, 13);
  for (double c : {0.5, 2.0, -1.5}) {
    Tensor gc = g;
    for (double& v : gc.values()) v *= c;
    Tape t;
    Tensor out = cross_attend(t, t.constant(s), t.constant(gc), attn).out.value();

    Tensor q = kernels::matmul(s, attn.wq.weight.value);
    Tensor k = kernels::matmul(g, attn.wk.weight.value);
    Tensor v = kernels::matmul(g, attn.wv.weight.value);
    for (double& x : k.values()) x *= c;
    for (double& x : v.values()) x *= c;
    Tensor w = kernels::softmax_rows(kernels::matmul_nt(q, k), 2.0);
    Tensor expect = kernels::matmul(kernels::matmul(w, v), attn.wo.weight.value);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
  }
}
