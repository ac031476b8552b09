#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"
#include "zshot/metrics.hpp"

using namespace zshot;

TEST_CASE("perfect and disjoint predictions") {
  std::vector<std::size_t> labels{0, 1, 2, 2, 1};
  IouResult r = confusion_and_iou(labels, labels, 3);
  for (double v : r.iou) CHECK(v == 1.0);
  CHECK(r.total() == 5);

  IouResult d = confusion_and_iou({1, 0, 0, 0, 0}, labels, 3);
  CHECK(d.iou[2] == 0.0);
  CHECK(d.iou[1] == 0.0);
}

TEST_CASE("IoU matches the set-intersection oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + trial % 5;
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::vector<std::size_t> pred(100), labels(100);
    for (std::size_t i = 0; i < 100; ++i) {
      pred[i] = pick(rng);
      labels[i] = pick(rng);
    }
    IouResult r = confusion_and_iou(pred, labels, k);
    for (std::size_t c = 0; c < k; ++c) {
      std::set<std::size_t> a, b, inter, uni;
      for (std::size_t i = 0; i < 100; ++i) {
        if (pred[i] == c) a.insert(i);
        if (labels[i] == c) b.insert(i);
      }
      for (std::size_t i : a) (b.count(i) ? inter : uni).insert(i);
      uni.insert(a.begin(), a.end());
      uni.insert(b.begin(), b.end());
      const double expect = uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      CHECK(r.iou[c] == doctest::Approx(expect).epsilon(1e-15));
      CHECK(r.defined[c] == !uni.empty());
    }
  }
}

TEST_CASE("confusion contract errors") {
  CHECK_THROWS_AS(confusion_and_iou({0, 1}, {0}, 2), ContractError);
  CHECK_THROWS_AS(confusion_and_iou({0, 2}, {0, 1}, 2), ContractError);
}

TEST_CASE("accumulate equals one pass over the concatenation") {
  std::vector<std::size_t> p1{0, 1, 1}, l1{0, 0, 1}, p2{2, 2, 0}, l2{2, 1, 0};
  IouResult acc = confusion_and_iou(p1, l1, 3);
  accumulate(acc, p2, l2);
  std::vector<std::size_t> p{0, 1, 1, 2, 2, 0}, l{0, 0, 1, 2, 1, 0};
  IouResult whole = confusion_and_iou(p, l, 3);
  CHECK(acc.confusion == whole.confusion);
  CHECK(acc.iou == whole.iou);
}

TEST_CASE("classes with zero union are skipped unless asked otherwise") {
  IouResult r = confusion_and_iou({0, 0, 1}, {0, 1, 1}, 3);
  CHECK_FALSE(r.defined[2]);
  CHECK(mean_iou(r, {0, 1, 2}) == doctest::Approx((0.5 + 0.5) / 2.0));
  CHECK(mean_iou(r, {0, 1, 2}, true) == doctest::Approx((0.5 + 0.5) / 3.0));
  CHECK(mean_iou(r, {2}) == 0.0);
}

TEST_CASE("an absent class leaves the other IoUs unchanged") {
  std::vector<std::size_t> pred{0, 1, 1, 0, 2}, labels{0, 1, 0, 0, 2};
  IouResult small = confusion_and_iou(pred, labels, 3);
  IouResult wide = confusion_and_iou(pred, labels, 5);
  for (std::size_t c = 0; c < 3; ++c) CHECK(wide.iou[c] == small.iou[c]);
  CHECK(mean_iou(wide, {0, 1, 2, 3, 4}) == mean_iou(small, {0, 1, 2}));
}

TEST_CASE("hmiou examples") {
  CHECK(hmiou(68.3, 12.8) == doctest::Approx(21.56).epsilon(1e-3));
  CHECK(hmiou(53.1, 7.3) == doctest::Approx(12.83).epsilon(1e-3));
  CHECK(std::abs(hmiou(68.3, 12.8) - 21.5) <= 0.1);
  CHECK(std::abs(hmiou(53.1, 7.3) - 12.9) <= 0.1);
  for (double x : {0.0, 0.3, 55.0}) CHECK(hmiou(x, 0.0) == 0.0);
}

TEST_CASE("hmiou symmetry and bounds") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double s = u(rng), v = u(rng);
    const double h = hmiou(s, v);
    CHECK(h == hmiou(v, s));
    CHECK(h <= (s + v) / 2.0 + 1e-15);
    CHECK(h <= 2.0 * std::min(s, v) + 1e-15);
  }
}

TEST_CASE("entropy examples") {
  Tensor uniform(3, 8, 1.0 / 8.0);
  CHECK(lgp_entropy(uniform) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
  Tensor onehot(2, 4);
  onehot(0, 1) = 1.0;
  onehot(1, 3) = 1.0;
  CHECK(lgp_entropy(onehot) == 0.0);

  Tensor mixed{{0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}, {1.0, 0.0, 0.0}};
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (double w : mixed.row(i))
      if (w > 0.0) expect -= w * std::log(w);
  expect /= 3.0;
  CHECK(lgp_entropy(mixed) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("entropy lies in [0, log M]") {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> e(1.0);
  for (int i = 0; i < 200; ++i) {
    Tensor w(1, 6);
    double z = 0.0;
    for (double& v : w.values()) z += (v = e(rng));
    for (double& v : w.values()) v /= z;
    const double h = lgp_entropy(w);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(6.0) + 1e-12);
  }
}

TEST_CASE("random baseline closed form") {
  // n_c / (N + (K - 1) n_c)
  std::vector<std::size_t> labels{0, 0, 0, 1, 2, 2};
  const double b0 = 3.0 / (6.0 + 2.0 * 3.0);
  const double b2 = 2.0 / (6.0 + 2.0 * 2.0);
  CHECK(random_baseline_miou(labels, 3, {0, 2}) == doctest::Approx((b0 + b2) / 2.0).epsilon(1e-15));
  CHECK(random_baseline_miou(labels, 4, {3}) == 0.0);
}

TEST_CASE("random baseline agrees with simulated uniform guessing") {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 4; ++c) labels.insert(labels.end(), 500 * (c + 1), c);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, 3);
  double sum = 0.0;
  const int reps = 40;
  for (int r = 0; r < reps; ++r) {
    std::vector<std::size_t> pred(labels.size());
    for (auto& p : pred) p = pick(rng);
    sum += mean_iou(confusion_and_iou(pred, labels, 4), {1, 3});
  }
  CHECK(sum / reps == doctest::Approx(random_baseline_miou(labels, 4, {1, 3})).epsilon(0.02));
}

TEST_CASE("report fields are consistent") {
  ClassSplit split{{0, 1, 2}, {3}};
  IouResult r = confusion_and_iou({0, 1, 2, 3, 3, 0, 1}, {0, 1, 2, 3, 0, 0, 3}, 4);
  EvalReport rep = make_report(r, split);
  CHECK(rep.hmiou == hmiou(rep.miou_seen, rep.miou_unseen));
  CHECK(rep.miou_seen == mean_iou(r, split.seen));
  CHECK(rep.miou_unseen == mean_iou(r, split.unseen));
  CHECK(rep.miou_all == mean_iou(r, {0, 1, 2, 3}));
  CHECK(rep.hmiou <= 2.0 * std::min(rep.miou_seen, rep.miou_unseen) + 1e-15);
}

TEST_CASE("report.csv carries the schema keys") {
  ClassSplit split{{0, 1}, {2}};
  EvalReport rep = make_report(confusion_and_iou({0, 1, 2, 2}, {0, 1, 2, 1}, 3), split);
  const auto dir = std::filesystem::temp_directory_path() / "zshot_test_metrics";
  std::filesystem::create_directories(dir);
  write_report_csv(rep, dir / "report.csv");
  std::set<std::string> keys;
  for (const auto& line : io::read_lines(dir / "report.csv")) keys.insert(io::split(line, ',')[0]);
  for (const char* k : {"miou_seen", "miou_unseen", "miou_all", "hmiou"}) CHECK(keys.count(k) == 1);
  std::filesystem::remove_all(dir);
}
