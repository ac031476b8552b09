#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zshot/tensor.hpp"

namespace zshot {

enum class PrimitiveKind { Cone, Cylinder, Cuboid, Sphere, Plane };
inline constexpr std::size_t kPrimitiveKinds = 5;

const char* to_string(PrimitiveKind k);
PrimitiveKind primitive_from_string(const std::string& s);

/// Canonical-frame primitive. Dimension meaning per kind:
///   sphere   radius = x, centred at the origin
///   cylinder radius = x, height = z, open tube on z ∈ [0, height]
///   cone     base radius = x, height = z, open lateral surface, apex up
///   cuboid   extents x, y, z; centred in xy, z ∈ [0, z]
///   plane    extents x, y at z = 0
struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  /// Largest characteristic length; jitter is 2% of this.
  double scale() const;
  void validate() const;
};

inline constexpr double kJitterFraction = 0.02;

/// Samples `n_points` uniformly (area-weighted) on the primitive surface and
/// adds Gaussian jitter with σ = 0.02·scale, truncated at 3σ in norm.
Tensor make_primitive(const PrimitiveSpec& spec, std::size_t n_points, std::uint64_t seed);

struct PrimitivePart {
  PrimitiveSpec shape;
  std::array<double, 3> offset{0.0, 0.0, 0.0};
  /// Multiplier on the part's surface area when allotting points.
  double weight = 1.0;
};

struct ClassDef {
  std::string name;
  std::vector<PrimitivePart> parts;
};

/// Eight indoor-style object classes built from overlapping primitive sets.
std::vector<ClassDef> default_class_defs();

struct SceneSample {
  Tensor points;  // N×3
  std::vector<std::size_t> labels;
  std::int64_t scene_id = 0;
};

struct ClassSplit {
  std::vector<std::size_t> seen;
  std::vector<std::size_t> unseen;

  std::size_t n_classes() const { return seen.size() + unseen.size(); }
  bool is_seen(std::size_t c) const;
  bool is_unseen(std::size_t c) const { return !is_seen(c); }
  void validate() const;
};

ClassSplit split_classes(std::size_t n_classes, std::size_t n_unseen, std::uint64_t seed);

/// One scene per id; scene `id` uses its own derived seed, so any subset of
/// scenes can be regenerated independently.
SceneSample make_scene(const std::vector<ClassDef>& defs, std::int64_t scene_id, std::size_t points_per_scene,
                       std::uint64_t seed);

std::vector<SceneSample> compose_corpus(const std::vector<ClassDef>& defs, std::size_t scenes,
                                        std::size_t points_per_scene, std::uint64_t seed,
                                        std::int64_t first_scene_id = 0);

enum class SemanticSource { Synthetic, Loaded, Concatenated };
const char* to_string(SemanticSource s);

struct SemanticTable {
  Tensor vectors;  // |C|×d_t, unit rows
  SemanticSource source = SemanticSource::Synthetic;

  std::size_t n_classes() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
  void validate() const;
};

/// Class descriptor: primitive-kind mixture, geometric attribute mixture and
/// size statistics. Classes sharing primitives share descriptor mass.
std::vector<double> class_descriptor(const ClassDef& def);

SemanticTable synth_semantic_embeddings(const std::vector<ClassDef>& defs, std::size_t d_t, double noise,
                                        std::uint64_t seed);

/// Reads `word v0 … v{d-1}` text files; multiple files concatenate along the
/// feature axis. Class names split on '-', '_' and spaces; tokens average.
SemanticTable load_word_vectors(const std::vector<std::filesystem::path>& files,
                                const std::vector<std::string>& classes);

// ---- on-disk corpus ---------------------------------------------------------

struct Corpus {
  std::vector<ClassDef> classes;
  ClassSplit split;
  SemanticTable semantics;
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
};

/// scene_<id>.csv (x,y,z,label), scenes.csv (scene_id,subset),
/// classes.csv (id,name,seen), embeddings.csv (class_id,v0..).
/// Returns the written file paths.
std::vector<std::filesystem::path> write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
/// Primitive definitions are not stored on disk; returned ClassDefs carry
/// names only.
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace zshot
