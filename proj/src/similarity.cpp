#include "zshot/similarity.hpp"

#include "zshot/errors.hpp"

namespace zshot {

const char* to_string(Similarity s) {
  switch (s) {
    case Similarity::Cosine: return "cosine";
    case Similarity::Dot: return "dot";
    case Similarity::Bhattacharyya: return "bhattacharyya";
  }
  return "?";
}

Similarity similarity_from_string(const std::string& s) {
  if (s == "cosine") return Similarity::Cosine;
  if (s == "dot") return Similarity::Dot;
  if (s == "bhattacharyya") return Similarity::Bhattacharyya;
  throw ConfigError("unknown similarity '" + s + "' (expected cosine, dot or bhattacharyya)");
}

Var similarity(Var a, Var b, Similarity kind) {
  if (a.cols() != b.cols()) {
    throw DimensionError("similarity width mismatch: " + a.value().shape_str() + " vs " + b.value().shape_str());
  }
  switch (kind) {
    case Similarity::Cosine: return matmul_nt(normalize_rows(a), normalize_rows(b));
    case Similarity::Dot: return matmul_nt(a, b);
    case Similarity::Bhattacharyya: return matmul_nt(exp(scale(log(a), 0.5)), exp(scale(log(b), 0.5)));
  }
  throw ContractError("unhandled similarity kind");
}

Tensor similarity(const Tensor& a, const Tensor& b, Similarity kind) {
  Tape t;
  return similarity(t.constant(a), t.constant(b), kind).value();
}

Var set_similarity(Var a, Var b, Similarity kind) { return similarity(mean_rows(a), mean_rows(b), kind); }

}  // namespace zshot
