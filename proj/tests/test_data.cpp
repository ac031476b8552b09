#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "zshot/data.hpp"
#include "zshot/errors.hpp"
#include "zshot/io.hpp"

using namespace zshot;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("zshot_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return kernels::dot(a, b) / (kernels::norm(a) * kernels::norm(b));
}

}  // namespace

TEST_CASE("sphere samples lie on the unit sphere within jitter") {
  PrimitiveSpec sphere{PrimitiveKind::Sphere, 1.0, 0, 0};
  const double sigma = kJitterFraction * 1.0;
  Tensor pts = make_primitive(sphere, 1000, 3);
  CHECK(pts.rows() == 1000);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const double n = kernels::norm(pts.row(i));
    CHECK(n >= 1.0 - 3 * sigma);
    CHECK(n <= 1.0 + 3 * sigma);
  }
}

TEST_CASE("plane jitter is unbiased") {
  PrimitiveSpec plane{PrimitiveKind::Plane, 2.0, 1.0, 0};
  const double sigma = kJitterFraction * plane.scale();
  Tensor pts = make_primitive(plane, 1000, 11);
  double mz = 0.0;
  for (std::size_t i = 0; i < pts.rows(); ++i) mz += pts(i, 2);
  mz /= 1000.0;
  CHECK(std::abs(mz) < 3 * sigma / std::sqrt(1000.0));
}

TEST_CASE("cylinder radial distance matches the closed-form surface") {
  PrimitiveSpec cyl{PrimitiveKind::Cylinder, 0.5, 0, 2.0};
  const double sigma = kJitterFraction * cyl.scale();
  Tensor pts = make_primitive(cyl, 800, 5);
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const double rho = std::hypot(pts(i, 0), pts(i, 1));
    CHECK(std::abs(rho - 0.5) <= 3 * sigma);
    CHECK(pts(i, 2) >= -3 * sigma);
    CHECK(pts(i, 2) <= 2.0 + 3 * sigma);
  }
}

TEST_CASE("cone and cuboid samples stay on their surfaces") {
  PrimitiveSpec cone{PrimitiveKind::Cone, 1.0, 0, 2.0};
  Tensor c = make_primitive(cone, 500, 1);
  const double sc = kJitterFraction * cone.scale();
  for (std::size_t i = 0; i < c.rows(); ++i) {
    // Surface: rho = r (1 - z/h). Distance to the slanted line is at most the jitter.
    const double rho = std::hypot(c(i, 0), c(i, 1));
    const double resid = (rho - 1.0 * (1.0 - c(i, 2) / 2.0)) * 2.0 / std::hypot(1.0, 2.0);
    CHECK(std::abs(resid) <= 3 * sc + 1e-12);
  }
  PrimitiveSpec box{PrimitiveKind::Cuboid, 1.0, 2.0, 3.0};
  Tensor b = make_primitive(box, 500, 2);
  const double sb = kJitterFraction * box.scale();
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const double dx = 0.5 - std::abs(b(i, 0)), dy = 1.0 - std::abs(b(i, 1));
    const double dz = std::min(std::abs(b(i, 2)), std::abs(3.0 - b(i, 2)));
    CHECK(std::min({std::abs(dx), std::abs(dy), dz}) <= 3 * sb + 1e-12);
  }
}

TEST_CASE("invalid primitives are rejected") {
  CHECK_THROWS_AS(make_primitive({PrimitiveKind::Sphere, -1.0, 0, 0}, 100, 0), GeometryError);
  CHECK_THROWS_AS(make_primitive({PrimitiveKind::Cylinder, 1.0, 0, 0.0}, 100, 0), GeometryError);
  CHECK_THROWS_AS(make_primitive({PrimitiveKind::Sphere, 1.0, 0, 0}, 7, 0), GeometryError);
  CHECK_THROWS_AS(primitive_from_string("pyramid"), GeometryError);
}

TEST_CASE("corpus: every class appears across 20 scenes") {
  const auto defs = default_class_defs();
  REQUIRE(defs.size() == 8);
  const auto scenes = compose_corpus(defs, 20, 512, 1234);
  std::set<std::size_t> seen;
  for (const auto& s : scenes) {
    CHECK(s.points.rows() == 512);
    CHECK(s.labels.size() == 512);
    std::set<std::size_t> in_scene(s.labels.begin(), s.labels.end());
    CHECK(in_scene.size() >= 3);
    seen.insert(in_scene.begin(), in_scene.end());
    CHECK(s.points.all_finite());
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("corpus: label histogram stays balanced on the default config") {
  const auto scenes = compose_corpus(default_class_defs(), 40, 512, 7);
  std::vector<double> hist(8, 0.0);
  double total = 0.0;
  for (const auto& s : scenes)
    for (auto l : s.labels) {
      hist[l] += 1.0;
      total += 1.0;
    }
  for (double h : hist) CHECK(h / total <= 0.6);
}

TEST_CASE("corpus: too few points per scene is a config error") {
  CHECK_THROWS_AS(compose_corpus(default_class_defs(), 2, 63, 1), ConfigError);
  CHECK_NOTHROW(compose_corpus(default_class_defs(), 1, 64, 1));
  std::vector<ClassDef> one{default_class_defs()[0]};
  CHECK_THROWS_AS(compose_corpus(one, 1, 512, 1), ConfigError);
}

TEST_CASE("corpus: scenes are order independent and files byte-identical per seed") {
  const auto defs = default_class_defs();
  const auto all = compose_corpus(defs, 6, 128, 99);
  const auto single = make_scene(defs, 4, 128, 99);
  CHECK(single.points == all[4].points);
  CHECK(single.labels == all[4].labels);

  auto make = [&](const fs::path& dir) {
    Corpus c;
    c.classes = defs;
    c.split = split_classes(8, 2, 3);
    c.semantics = synth_semantic_embeddings(defs, 16, 0.1, 3);
    c.train = compose_corpus(defs, 3, 128, 5);
    c.test = compose_corpus(defs, 2, 128, 5, 3);
    return write_corpus(c, dir);
  };
  const auto a = make(temp_dir("a"));
  const auto b = make(temp_dir("b"));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].filename() == b[i].filename());
    CHECK(io::read_text(a[i]) == io::read_text(b[i]));
  }
}

TEST_CASE("corpus round-trips through its on-disk format") {
  const auto defs = default_class_defs();
  Corpus c;
  c.classes = defs;
  c.split = split_classes(8, 2, 1);
  c.semantics = synth_semantic_embeddings(defs, 8, 0.0, 1);
  c.train = compose_corpus(defs, 2, 96, 2);
  c.test = compose_corpus(defs, 1, 96, 2, 2);
  const fs::path dir = temp_dir("roundtrip");
  write_corpus(c, dir);
  Corpus r = read_corpus(dir);
  CHECK(r.classes.size() == 8);
  CHECK(r.classes[3].name == defs[3].name);
  CHECK(r.split.seen == c.split.seen);
  CHECK(r.split.unseen == c.split.unseen);
  CHECK(r.semantics.vectors == c.semantics.vectors);
  REQUIRE(r.train.size() == 2);
  REQUIRE(r.test.size() == 1);
  CHECK(r.train[1].points == c.train[1].points);
  CHECK(r.test[0].labels == c.test[0].labels);
  CHECK(r.test[0].scene_id == 2);
  CHECK_THROWS_AS(read_corpus(dir / "missing"), LoadError);
}

TEST_CASE("synthetic embeddings") {
  auto defs = default_class_defs();
  SUBCASE("unit norm") {
    auto t = synth_semantic_embeddings(defs, 32, 0.2, 5);
    CHECK(t.dim() == 32);
    CHECK_NOTHROW(t.validate());
  }
  SUBCASE("identical descriptors give identical embeddings at zero noise") {
    defs.push_back(ClassDef{"pillar-twin", defs[0].parts});
    auto t = synth_semantic_embeddings(defs, 32, 0.0, 5);
    for (std::size_t j = 0; j < 32; ++j) CHECK(t.vectors(0, j) == t.vectors(8, j));
  }
  SUBCASE("descriptor geometry survives projection") {
    // tent = cone, pillar = cylinder, rug = plane
    auto t = synth_semantic_embeddings(defs, 32, 0.0, 5);
    CHECK(cosine(t.vectors.row(5), t.vectors.row(0)) > cosine(t.vectors.row(5), t.vectors.row(6)));
  }
  CHECK_THROWS_AS(synth_semantic_embeddings(defs, 3, 0.0, 1), ConfigError);
}

TEST_CASE("word vectors load, average multi-word names and concatenate") {
  const fs::path dir = temp_dir("wv");
  std::string a, b;
  for (const char* w : {"traffic", "sign", "sofa", "beam"}) {
    a += w;
    b += w;
    for (int j = 0; j < 300; ++j) {
      a += " " + io::fmt(std::sin(j + w[0]));
      b += " " + io::fmt(std::cos(j * 0.5 + w[1]));
    }
    a += "\n";
    b += "\n";
  }
  io::write_text(dir / "w2v.txt", a);
  io::write_text(dir / "glove.txt", b);

  auto t = load_word_vectors({dir / "w2v.txt", dir / "glove.txt"}, {"sofa", "traffic-sign"});
  CHECK(t.dim() == 600);
  CHECK(t.source == SemanticSource::Concatenated);
  CHECK_NOTHROW(t.validate());

  auto single = load_word_vectors({dir / "w2v.txt"}, {"traffic-sign", "traffic", "sign"});
  CHECK(single.source == SemanticSource::Loaded);
  // Average of the two token vectors, compared after normalisation.
  Tensor avg(1, 300);
  Tensor raw_t = load_word_vectors({dir / "w2v.txt"}, {"traffic"}).vectors;
  for (std::size_t j = 0; j < 300; ++j) {
    avg(0, j) = std::sin(j + 't') + std::sin(j + 's');
  }
  avg = kernels::normalize_rows(avg);
  for (std::size_t j = 0; j < 300; ++j) CHECK(single.vectors(0, j) == doctest::Approx(avg(0, j)).epsilon(1e-12));
  CHECK(raw_t.rows() == 1);

  auto empty = load_word_vectors({dir / "w2v.txt"}, {});
  CHECK(empty.n_classes() == 0);

  try {
    load_word_vectors({dir / "w2v.txt"}, {"bookshelf"});
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find("bookshelf") != std::string::npos);
  }

  io::write_text(dir / "ragged.txt", "a 1 2 3\nb 1 2\n");
  CHECK_THROWS_AS(load_word_vectors({dir / "ragged.txt"}, {"a"}), FormatError);
}

TEST_CASE("class splits") {
  auto s = split_classes(8, 2, 0);
  CHECK(s.seen.size() == 6);
  CHECK(s.unseen.size() == 2);
  CHECK_NOTHROW(s.validate());
  for (auto c : s.unseen) CHECK(s.is_unseen(c));

  auto four = split_classes(13, 4, 0);
  CHECK(four.unseen.size() == 4);
  CHECK(four.seen.size() == 9);

  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t seed = 0; seed < 10; ++seed) distinct.insert(split_classes(8, 2, seed).unseen);
  CHECK(distinct.size() >= 2);
  CHECK(split_classes(8, 2, 4).unseen == split_classes(8, 2, 4).unseen);

  CHECK_THROWS_AS(split_classes(8, 0, 0), ConfigError);
  CHECK_THROWS_AS(split_classes(8, 8, 0), ConfigError);
}
