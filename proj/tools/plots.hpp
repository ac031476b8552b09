#pragma once

#include <string>
#include <vector>

#include "zshot/tensor.hpp"

namespace zshot::plots {

/// Per-class IoU bars; unseen classes drawn in a second colour. The data
/// table is repeated in an XML comment.
std::string iou_bars(const std::vector<std::string>& names, const std::vector<double>& iou,
                     const std::vector<bool>& unseen);

/// Two heat maps (class × prototype) side by side: mean visual distribution
/// per class and the semantic distribution per class.
std::string lgp_heatmaps(const std::vector<std::string>& names, const Tensor& visual, const Tensor& semantic);

}  // namespace zshot::plots
