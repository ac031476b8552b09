#include "zshot/metrics.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "zshot/errors.hpp"
#include "zshot/io.hpp"

namespace zshot {

namespace {

void recompute(IouResult& r) {
  const std::size_t k = r.n_classes;
  r.iou.assign(k, 0.0);
  r.defined.assign(k, false);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += r.at(c, j);
      col += r.at(j, c);
    }
    const std::uint64_t tp = r.at(c, c);
    const std::uint64_t uni = row + col - tp;
    if (uni == 0) continue;
    r.defined[c] = true;
    r.iou[c] = static_cast<double>(tp) / static_cast<double>(uni);
  }
}

}  // namespace

std::uint64_t IouResult::total() const { return std::accumulate(confusion.begin(), confusion.end(), std::uint64_t{0}); }

IouResult confusion_and_iou(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                            std::size_t n_classes) {
  IouResult r;
  r.n_classes = n_classes;
  r.confusion.assign(n_classes * n_classes, 0);
  accumulate(r, predictions, labels);
  return r;
}

void accumulate(IouResult& acc, const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  const std::size_t k = acc.n_classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k || predictions[i] >= k) throw ContractError("confusion: class index out of range");
    ++acc.confusion[labels[i] * k + predictions[i]];
  }
  recompute(acc);
}

double mean_iou(const IouResult& r, const std::vector<std::size_t>& classes, bool empty_as_zero) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t c : classes) {
    if (!r.defined[c] && !empty_as_zero) continue;
    s += r.iou[c];
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

double hmiou(double seen, double unseen) {
  const double s = seen + unseen;
  return s == 0.0 ? 0.0 : 2.0 * seen * unseen / s;
}

double lgp_entropy(const Tensor& dists) {
  if (dists.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < dists.rows(); ++i) {
    double h = 0.0;
    for (double w : dists.row(i))
      if (w > 0.0) h -= w * std::log(w);
    total += h;
  }
  return total / static_cast<double>(dists.rows());
}

double random_baseline_miou(const std::vector<std::size_t>& labels, std::size_t n_classes,
                            const std::vector<std::size_t>& classes) {
  std::vector<double> count(n_classes, 0.0);
  for (std::size_t y : labels) count.at(y) += 1.0;
  const double n = static_cast<double>(labels.size());
  const double k = static_cast<double>(n_classes);
  double s = 0.0;
  std::size_t m = 0;
  for (std::size_t c : classes) {
    if (count[c] == 0.0) continue;
    s += count[c] / (n + (k - 1.0) * count[c]);
    ++m;
  }
  return m ? s / static_cast<double>(m) : 0.0;
}

EvalReport make_report(const IouResult& iou, const ClassSplit& split, bool empty_as_zero) {
  EvalReport r;
  r.iou = iou;
  std::vector<std::size_t> all(iou.n_classes);
  std::iota(all.begin(), all.end(), 0);
  r.miou_seen = mean_iou(iou, split.seen, empty_as_zero);
  r.miou_unseen = mean_iou(iou, split.unseen, empty_as_zero);
  r.miou_all = mean_iou(iou, all, empty_as_zero);
  r.hmiou = hmiou(r.miou_seen, r.miou_unseen);
  return r;
}

void write_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::string out = "key,value\n";
  auto row = [&](const std::string& k, double v) { out += k + ',' + io::fmt(v) + '\n'; };
  row("miou_seen", 100.0 * r.miou_seen);
  row("miou_unseen", 100.0 * r.miou_unseen);
  row("miou_all", 100.0 * r.miou_all);
  row("hmiou", 100.0 * r.hmiou);
  row("entropy_visual", r.entropy_visual);
  row("entropy_semantic", r.entropy_semantic);
  row("random_unseen", 100.0 * r.random_unseen);
  for (std::size_t c = 0; c < r.iou.n_classes; ++c)
    if (r.iou.defined[c]) row("iou_" + std::to_string(c), 100.0 * r.iou.iou[c]);
  io::write_text(path, out);
}

void write_report_json(const EvalReport& r, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["miou_seen"] = 100.0 * r.miou_seen;
  j["miou_unseen"] = 100.0 * r.miou_unseen;
  j["miou_all"] = 100.0 * r.miou_all;
  j["hmiou"] = 100.0 * r.hmiou;
  j["entropy_visual"] = r.entropy_visual;
  j["entropy_semantic"] = r.entropy_semantic;
  j["random_unseen"] = 100.0 * r.random_unseen;
  j["points"] = r.iou.total();
  auto& classes = j["classes"];
  classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.iou.n_classes; ++c) {
    nlohmann::ordered_json e;
    e["id"] = c;
    e["name"] = c < class_names.size() ? class_names[c] : std::to_string(c);
    e["iou"] = r.iou.defined[c] ? nlohmann::ordered_json(100.0 * r.iou.iou[c]) : nlohmann::ordered_json(nullptr);
    classes.push_back(e);
  }
  io::write_text(path, j.dump(2) + '\n');
}

void write_confusion_csv(const IouResult& r, const std::filesystem::path& path) {
  std::string out = "true\\pred";
  for (std::size_t c = 0; c < r.n_classes; ++c) out += ',' + std::to_string(c);
  out += '\n';
  for (std::size_t i = 0; i < r.n_classes; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < r.n_classes; ++j) out += ',' + std::to_string(r.at(i, j));
    out += '\n';
  }
  io::write_text(path, out);
}

}  // namespace zshot
