#pragma once

#include <string>

#include "zshot/autodiff.hpp"

namespace zshot {

/// The set/vector similarity D used by both contrastive losses and by the
/// classifier.
enum class Similarity { Cosine, Dot, Bhattacharyya };

const char* to_string(Similarity s);
Similarity similarity_from_string(const std::string& s);

/// p×r matrix of D(a_i, b_j). Bhattacharyya expects positive rows.
Var similarity(Var a, Var b, Similarity kind);
Tensor similarity(const Tensor& a, const Tensor& b, Similarity kind);

/// D between two point sets: similarity of their mean-pooled rows (1×1).
Var set_similarity(Var a, Var b, Similarity kind);

}  // namespace zshot
