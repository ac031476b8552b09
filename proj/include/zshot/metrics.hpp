#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "zshot/data.hpp"

namespace zshot {

struct IouResult {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> confusion;  // row = true class, column = prediction
  std::vector<double> iou;
  /// False for classes absent from both labels and predictions.
  std::vector<bool> defined;

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return confusion[truth * n_classes + pred]; }
  std::uint64_t total() const;
};

IouResult confusion_and_iou(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels,
                            std::size_t n_classes);
/// Adds another batch's counts and recomputes IoU.
void accumulate(IouResult& acc, const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels);

/// Mean IoU over `classes`. Undefined classes are skipped unless
/// `empty_as_zero` is set.
double mean_iou(const IouResult& r, const std::vector<std::size_t>& classes, bool empty_as_zero = false);

/// Harmonic mean 2su/(s+u), 0 when s + u = 0. Scale-agnostic.
double hmiou(double seen, double unseen);

/// Mean Shannon entropy (nats) of the rows of `dists`, with 0·log 0 = 0.
double lgp_entropy(const Tensor& dists);

/// Expected IoU of class c under uniform random assignment over K classes:
/// n_c / (N + (K − 1)·n_c), averaged over `classes` present in the labels.
double random_baseline_miou(const std::vector<std::size_t>& labels, std::size_t n_classes,
                            const std::vector<std::size_t>& classes);

struct EvalReport {
  IouResult iou;
  double miou_seen = 0.0, miou_unseen = 0.0, miou_all = 0.0, hmiou = 0.0;
  double entropy_visual = 0.0, entropy_semantic = 0.0;
  double random_unseen = 0.0;
};

EvalReport make_report(const IouResult& iou, const ClassSplit& split, bool empty_as_zero = false);

/// report.csv: key,value with metrics in percent at full precision.
void write_report_csv(const EvalReport& r, const std::filesystem::path& path);
void write_report_json(const EvalReport& r, const std::vector<std::string>& class_names,
                       const std::filesystem::path& path);
void write_confusion_csv(const IouResult& r, const std::filesystem::path& path);

}  // namespace zshot
