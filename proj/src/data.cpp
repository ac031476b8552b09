#include "zshot/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"
#include "zshot/nn.hpp"

namespace zshot {

namespace fs = std::filesystem;

const char* to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Cone: return "cone";
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Cuboid: return "cuboid";
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Plane: return "plane";
  }
  return "?";
}

PrimitiveKind primitive_from_string(const std::string& s) {
  for (auto k : {PrimitiveKind::Cone, PrimitiveKind::Cylinder, PrimitiveKind::Cuboid, PrimitiveKind::Sphere,
                 PrimitiveKind::Plane})
    if (s == to_string(k)) return k;
  throw GeometryError("unknown primitive kind '" + s + "'");
}

double PrimitiveSpec::scale() const {
  switch (kind) {
    case PrimitiveKind::Sphere: return x;
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Cone: return std::max(x, z);
    case PrimitiveKind::Cuboid: return std::max({x, y, z});
    case PrimitiveKind::Plane: return std::max(x, y);
  }
  return x;
}

void PrimitiveSpec::validate() const {
  auto pos = [&](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw GeometryError(std::string(to_string(kind)) + ": " + what + " must be positive and finite");
  };
  switch (kind) {
    case PrimitiveKind::Sphere: pos(x, "radius"); break;
    case PrimitiveKind::Cylinder:
    case PrimitiveKind::Cone:
      pos(x, "radius");
      pos(z, "height");
      break;
    case PrimitiveKind::Cuboid:
      pos(x, "extent x");
      pos(y, "extent y");
      pos(z, "extent z");
      break;
    case PrimitiveKind::Plane:
      pos(x, "extent x");
      pos(y, "extent y");
      break;
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

double surface_area(const PrimitiveSpec& s) {
  switch (s.kind) {
    case PrimitiveKind::Sphere: return 4.0 * kPi * s.x * s.x;
    case PrimitiveKind::Cylinder: return 2.0 * kPi * s.x * s.z;
    case PrimitiveKind::Cone: return kPi * s.x * std::hypot(s.x, s.z);
    case PrimitiveKind::Cuboid: return 2.0 * (s.x * s.y + s.x * s.z + s.y * s.z);
    case PrimitiveKind::Plane: return s.x * s.y;
  }
  return 0.0;
}

std::array<double, 3> surface_point(const PrimitiveSpec& s, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (s.kind) {
    case PrimitiveKind::Sphere: {
      std::normal_distribution<double> nd(0.0, 1.0);
      double a, b, c, n;
      do {
        a = nd(rng);
        b = nd(rng);
        c = nd(rng);
        n = std::sqrt(a * a + b * b + c * c);
      } while (n < 1e-12);
      return {s.x * a / n, s.x * b / n, s.x * c / n};
    }
    case PrimitiveKind::Cylinder: {
      const double th = 2.0 * kPi * u(rng);
      return {s.x * std::cos(th), s.x * std::sin(th), s.z * u(rng)};
    }
    case PrimitiveKind::Cone: {
      // Lateral area grows linearly with distance from the apex.
      const double t = std::sqrt(u(rng));
      const double th = 2.0 * kPi * u(rng);
      return {s.x * t * std::cos(th), s.x * t * std::sin(th), s.z * (1.0 - t)};
    }
    case PrimitiveKind::Cuboid: {
      const double axy = s.x * s.y, axz = s.x * s.z, ayz = s.y * s.z;
      const double pick = u(rng) * 2.0 * (axy + axz + ayz);
      const double a = u(rng) - 0.5, b = u(rng) - 0.5, side = u(rng) < 0.5 ? -0.5 : 0.5;
      if (pick < 2.0 * axy) return {a * s.x, b * s.y, (side + 0.5) * s.z};
      if (pick < 2.0 * (axy + axz)) return {a * s.x, side * s.y, (b + 0.5) * s.z};
      return {side * s.x, a * s.y, (b + 0.5) * s.z};
    }
    case PrimitiveKind::Plane: return {(u(rng) - 0.5) * s.x, (u(rng) - 0.5) * s.y, 0.0};
  }
  return {0, 0, 0};
}

Tensor sample_surface(const PrimitiveSpec& spec, std::size_t n, Rng& rng) {
  const double sigma = kJitterFraction * spec.scale();
  std::normal_distribution<double> nd(0.0, sigma);
  Tensor pts(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = surface_point(spec, rng);
    double j[3];
    do {
      j[0] = nd(rng);
      j[1] = nd(rng);
      j[2] = nd(rng);
    } while (j[0] * j[0] + j[1] * j[1] + j[2] * j[2] > 9.0 * sigma * sigma);
    for (int k = 0; k < 3; ++k) pts(i, k) = p[k] + j[k];
  }
  return pts;
}

// Largest-remainder allocation of `total` over non-negative weights.
std::vector<std::size_t> allot(std::size_t total, const std::vector<double>& w) {
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> out(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = static_cast<double>(total) * w[i] / sw;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total; ++k, ++used) ++out[rem[k % rem.size()].second];
  return out;
}

}  // namespace

Tensor make_primitive(const PrimitiveSpec& spec, std::size_t n_points, std::uint64_t seed) {
  spec.validate();
  if (n_points < 8) throw GeometryError("make_primitive needs at least 8 points");
  Rng rng(seed);
  return sample_surface(spec, n_points, rng);
}

std::vector<ClassDef> default_class_defs() {
  using K = PrimitiveKind;
  auto part = [](K k, double x, double y, double z, double ox = 0, double oy = 0, double oz = 0) {
    return PrimitivePart{PrimitiveSpec{k, x, y, z}, {ox, oy, oz}, 1.0};
  };
  return {
      {"pillar", {part(K::Cylinder, 0.25, 0, 2.0)}},
      {"lamp", {part(K::Cone, 0.35, 0, 0.45, 0, 0, 1.2), part(K::Cylinder, 0.04, 0, 1.2)}},
      {"table", {part(K::Cuboid, 1.2, 0.8, 0.06, 0, 0, 0.7), part(K::Cylinder, 0.06, 0, 0.7)}},
      {"cabinet", {part(K::Cuboid, 0.8, 0.5, 1.2)}},
      {"ball", {part(K::Sphere, 0.35, 0, 0, 0, 0, 0.35)}},
      {"tent", {part(K::Cone, 0.9, 0, 1.2)}},
      {"rug", {part(K::Plane, 1.6, 1.0, 0, 0, 0, 0.01)}},
      {"globe",
       {part(K::Sphere, 0.3, 0, 0, 0, 0, 1.0), part(K::Cylinder, 0.04, 0, 0.7),
        part(K::Cuboid, 0.4, 0.4, 0.05)}},
  };
}

bool ClassSplit::is_seen(std::size_t c) const { return std::binary_search(seen.begin(), seen.end(), c); }

void ClassSplit::validate() const {
  if (unseen.empty()) throw ConfigError("class split needs at least one unseen class");
  std::set<std::size_t> all(seen.begin(), seen.end());
  for (std::size_t c : unseen)
    if (!all.insert(c).second) throw ConfigError("class " + std::to_string(c) + " is both seen and unseen");
  if (all.size() != n_classes() || *all.rbegin() != n_classes() - 1)
    throw ConfigError("class split does not cover classes 0..n-1");
  if (!std::is_sorted(seen.begin(), seen.end()) || !std::is_sorted(unseen.begin(), unseen.end()))
    throw ConfigError("class split must be sorted");
}

ClassSplit split_classes(std::size_t n_classes, std::size_t n_unseen, std::uint64_t seed) {
  if (n_unseen < 1 || n_unseen >= n_classes) {
    throw ConfigError("n_unseen must lie in [1, n_classes); got " + std::to_string(n_unseen) + " of " +
                      std::to_string(n_classes));
  }
  Rng rng(derive_seed(seed, 0x5d11));
  ClassSplit s;
  s.unseen = sample_without_replacement(n_classes, n_unseen, rng);
  std::sort(s.unseen.begin(), s.unseen.end());
  for (std::size_t c = 0; c < n_classes; ++c)
    if (!std::binary_search(s.unseen.begin(), s.unseen.end(), c)) s.seen.push_back(c);
  return s;
}

SceneSample make_scene(const std::vector<ClassDef>& defs, std::int64_t scene_id, std::size_t points_per_scene,
                       std::uint64_t seed) {
  const std::size_t n_classes = defs.size();
  if (n_classes < 2) throw ConfigError("corpus needs at least 2 classes");
  if (points_per_scene < n_classes * 8) {
    throw ConfigError("points_per_scene " + std::to_string(points_per_scene) + " is below class count x 8 = " +
                      std::to_string(n_classes * 8));
  }
  for (const auto& d : defs) {
    if (d.parts.empty() || d.parts.size() > 3)
      throw ConfigError("class '" + d.name + "' must be built from 1-3 primitives");
    for (const auto& p : d.parts) p.shape.validate();
  }

  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(scene_id)));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Scene `id` always contains class id mod |C|, so consecutive scenes cover
  // every class.
  const std::size_t min_k = std::min<std::size_t>(3, n_classes);
  const std::size_t max_k = std::min<std::size_t>(4, n_classes);
  const std::size_t k = min_k + static_cast<std::size_t>(u(rng) * static_cast<double>(max_k - min_k + 1));
  const std::size_t forced = static_cast<std::size_t>(scene_id) % n_classes;
  std::vector<std::size_t> chosen{forced};
  for (std::size_t c : sample_without_replacement(n_classes, n_classes, rng)) {
    if (chosen.size() == std::min(k, max_k)) break;
    if (c != forced) chosen.push_back(c);
  }

  // Objects occupy distinct cells of a 3x2 grid.
  constexpr double kSpacing = 3.0;
  const auto cells = sample_without_replacement(6, chosen.size(), rng);
  const auto per_object = allot(points_per_scene, std::vector<double>(chosen.size(), 1.0));

  SceneSample scene;
  scene.scene_id = scene_id;
  scene.points = Tensor(points_per_scene, 3);
  scene.labels.reserve(points_per_scene);
  std::size_t row = 0;
  for (std::size_t o = 0; o < chosen.size(); ++o) {
    const ClassDef& def = defs[chosen[o]];
    const double cx = kSpacing * static_cast<double>(cells[o] % 3) + 0.6 * (u(rng) - 0.5);
    const double cy = kSpacing * static_cast<double>(cells[o] / 3) + 0.6 * (u(rng) - 0.5);
    const double rot = 2.0 * kPi * u(rng);
    const double size = 0.9 + 0.2 * u(rng);
    const double cr = std::cos(rot), sr = std::sin(rot);

    std::vector<double> w;
    for (const auto& p : def.parts) w.push_back(surface_area(p.shape) * p.weight);
    const auto per_part = allot(per_object[o], w);
    for (std::size_t pi = 0; pi < def.parts.size(); ++pi) {
      const auto& part = def.parts[pi];
      Tensor pts = sample_surface(part.shape, per_part[pi], rng);
      for (std::size_t i = 0; i < pts.rows(); ++i, ++row) {
        const double px = size * (pts(i, 0) + part.offset[0]);
        const double py = size * (pts(i, 1) + part.offset[1]);
        const double pz = size * (pts(i, 2) + part.offset[2]);
        scene.points(row, 0) = cx + cr * px - sr * py;
        scene.points(row, 1) = cy + sr * px + cr * py;
        scene.points(row, 2) = pz;
        scene.labels.push_back(chosen[o]);
      }
    }
  }
  return scene;
}

std::vector<SceneSample> compose_corpus(const std::vector<ClassDef>& defs, std::size_t scenes,
                                        std::size_t points_per_scene, std::uint64_t seed,
                                        std::int64_t first_scene_id) {
  std::vector<SceneSample> out;
  out.reserve(scenes);
  for (std::size_t s = 0; s < scenes; ++s)
    out.push_back(make_scene(defs, first_scene_id + static_cast<std::int64_t>(s), points_per_scene, seed));
  return out;
}

const char* to_string(SemanticSource s) {
  switch (s) {
    case SemanticSource::Synthetic: return "synthetic";
    case SemanticSource::Loaded: return "loaded";
    case SemanticSource::Concatenated: return "concatenated";
  }
  return "?";
}

void SemanticTable::validate() const {
  if (!vectors.all_finite()) throw ContractError("semantic table holds non-finite values");
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    if (std::abs(kernels::norm(vectors.row(i)) - 1.0) > 1e-9)
      throw ContractError("semantic vector " + std::to_string(i) + " is not unit-norm");
  }
}

std::vector<double> class_descriptor(const ClassDef& def) {
  // Geometric attributes per primitive kind:
  // curved, flat, apex, round cross-section, sharp edges, closed surface.
  static const std::map<PrimitiveKind, std::array<double, 6>> kAttrs{
      {PrimitiveKind::Cone, {1, 0, 1, 1, 0, 0}},     {PrimitiveKind::Cylinder, {1, 0, 0, 1, 0, 0}},
      {PrimitiveKind::Sphere, {1, 0, 0, 1, 0, 1}},   {PrimitiveKind::Cuboid, {0, 1, 0, 0, 1, 1}},
      {PrimitiveKind::Plane, {0, 1, 0, 0, 0, 0}},
  };
  std::vector<double> mix(kPrimitiveKinds, 0.0);
  std::array<double, 6> attr{};
  double total = 0.0, top = 0.0, width = 0.0, mean_scale = 0.0;
  for (const auto& p : def.parts) total += surface_area(p.shape) * p.weight;
  for (const auto& p : def.parts) {
    const double w = surface_area(p.shape) * p.weight / total;
    mix[static_cast<std::size_t>(p.shape.kind)] += w;
    const auto& a = kAttrs.at(p.shape.kind);
    for (std::size_t i = 0; i < a.size(); ++i) attr[i] += w * a[i];
    double h = p.shape.z;
    if (p.shape.kind == PrimitiveKind::Sphere) h = p.shape.x;
    if (p.shape.kind == PrimitiveKind::Plane) h = 0.0;
    top = std::max(top, p.offset[2] + h);
    const double wx = p.shape.kind == PrimitiveKind::Cuboid || p.shape.kind == PrimitiveKind::Plane
                          ? std::max(p.shape.x, p.shape.y)
                          : 2.0 * p.shape.x;
    width = std::max(width, wx);
    mean_scale += w * p.shape.scale();
  }
  std::vector<double> d = mix;
  d.insert(d.end(), attr.begin(), attr.end());
  d.push_back(0.5 * top);
  d.push_back(0.5 * width);
  d.push_back(0.5 * mean_scale);
  return d;
}

SemanticTable synth_semantic_embeddings(const std::vector<ClassDef>& defs, std::size_t d_t, double noise,
                                        std::uint64_t seed) {
  if (d_t < 4) throw ConfigError("semantic dimension d_t must be at least 4");
  if (noise < 0.0) throw ConfigError("semantic noise must be non-negative");
  SemanticTable table;
  if (defs.empty()) {
    table.vectors = Tensor(0, d_t);
    return table;
  }
  const std::size_t desc_dim = class_descriptor(defs.front()).size();
  Rng proj_rng(derive_seed(seed, 0xe3b));
  const Tensor proj = gaussian(desc_dim, d_t, 1.0 / std::sqrt(static_cast<double>(d_t)), proj_rng);
  Rng noise_rng(derive_seed(seed, 0xe3c));
  std::normal_distribution<double> nd(0.0, 1.0);

  table.vectors = Tensor(defs.size(), d_t);
  for (std::size_t c = 0; c < defs.size(); ++c) {
    const auto desc = class_descriptor(defs[c]);
    auto row = table.vectors.row(c);
    for (std::size_t j = 0; j < d_t; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < desc_dim; ++k) s += desc[k] * proj(k, j);
      row[j] = s;
    }
    const double n = kernels::norm(row);
    for (std::size_t j = 0; j < d_t; ++j) row[j] = row[j] / n + noise * nd(noise_rng) / std::sqrt(double(d_t));
  }
  table.vectors = kernels::normalize_rows(table.vectors);
  table.source = SemanticSource::Synthetic;
  return table;
}

namespace {

std::vector<std::string> name_tokens(const std::string& name) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : name) {
    if (ch == '-' || ch == '_' || ch == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::map<std::string, std::vector<double>> read_vector_file(const fs::path& file, std::size_t& dim) {
  std::map<std::string, std::vector<double>> words;
  dim = 0;
  std::size_t line_no = 0;
  for (const std::string& line : io::read_lines(file)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> v;
    std::string tok;
    while (ss >> tok) v.push_back(io::parse_double(tok));
    if (dim == 0) dim = v.size();
    if (v.empty() || v.size() != dim) {
      throw FormatError(file.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, got " + std::to_string(v.size()));
    }
    words.emplace(word, std::move(v));
  }
  return words;
}

}  // namespace

SemanticTable load_word_vectors(const std::vector<fs::path>& files, const std::vector<std::string>& classes) {
  if (files.empty()) throw ConfigError("load_word_vectors needs at least one file");
  std::vector<Tensor> blocks;
  std::size_t total_dim = 0;
  for (const auto& f : files) {
    std::size_t dim = 0;
    const auto words = read_vector_file(f, dim);
    Tensor block(classes.size(), dim);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const auto tokens = name_tokens(classes[c]);
      if (tokens.empty()) throw LookupError("empty class name at index " + std::to_string(c));
      for (const auto& t : tokens) {
        auto it = words.find(t);
        if (it == words.end()) {
          throw LookupError("class '" + classes[c] + "': token '" + t + "' missing from " + f.string());
        }
        for (std::size_t j = 0; j < dim; ++j) block(c, j) += it->second[j] / static_cast<double>(tokens.size());
      }
    }
    total_dim += dim;
    blocks.push_back(std::move(block));
  }
  SemanticTable table;
  table.vectors = Tensor(classes.size(), total_dim);
  std::size_t off = 0;
  for (const auto& b : blocks) {
    for (std::size_t c = 0; c < b.rows(); ++c)
      for (std::size_t j = 0; j < b.cols(); ++j) table.vectors(c, off + j) = b(c, j);
    off += b.cols();
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (kernels::norm(table.vectors.row(c)) == 0.0)
      throw FormatError("class '" + classes[c] + "' has an all-zero word vector");
  table.vectors = kernels::normalize_rows(table.vectors);
  table.source = files.size() > 1 ? SemanticSource::Concatenated : SemanticSource::Loaded;
  return table;
}

std::vector<fs::path> write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto write_scene = [&](const SceneSample& s) {
    std::string out = "x,y,z,label\n";
    for (std::size_t i = 0; i < s.points.rows(); ++i) {
      out += io::fmt(s.points(i, 0)) + "," + io::fmt(s.points(i, 1)) + "," + io::fmt(s.points(i, 2)) + "," +
             std::to_string(s.labels[i]) + "\n";
    }
    const fs::path p = dir / ("scene_" + std::to_string(s.scene_id) + ".csv");
    io::write_text(p, out);
    written.push_back(p);
  };
  std::string index = "scene_id,subset\n";
  for (const auto& s : corpus.train) {
    write_scene(s);
    index += std::to_string(s.scene_id) + ",train\n";
  }
  for (const auto& s : corpus.test) {
    write_scene(s);
    index += std::to_string(s.scene_id) + ",test\n";
  }
  io::write_text(dir / "scenes.csv", index);
  written.push_back(dir / "scenes.csv");

  std::string classes = "id,name,seen\n";
  for (std::size_t c = 0; c < corpus.classes.size(); ++c)
    classes += std::to_string(c) + "," + corpus.classes[c].name + "," + (corpus.split.is_seen(c) ? "true" : "false") +
               "\n";
  io::write_text(dir / "classes.csv", classes);
  written.push_back(dir / "classes.csv");

  std::string emb = "class_id";
  for (std::size_t j = 0; j < corpus.semantics.dim(); ++j) emb += ",v" + std::to_string(j);
  emb += "\n";
  for (std::size_t c = 0; c < corpus.semantics.n_classes(); ++c) {
    emb += std::to_string(c);
    for (double v : corpus.semantics.vectors.row(c)) emb += "," + io::fmt(v);
    emb += "\n";
  }
  io::write_text(dir / "embeddings.csv", emb);
  written.push_back(dir / "embeddings.csv");
  return written;
}

Corpus read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("corpus directory not found: " + dir.string());
  Corpus corpus;

  const auto class_lines = io::read_lines(dir / "classes.csv");
  for (std::size_t i = 1; i < class_lines.size(); ++i) {
    if (class_lines[i].empty()) continue;
    const auto f = io::split(class_lines[i], ',');
    if (f.size() != 3) throw FormatError("classes.csv line " + std::to_string(i + 1) + ": expected id,name,seen");
    const auto id = static_cast<std::size_t>(io::parse_int(f[0]));
    if (id != corpus.classes.size()) throw FormatError("classes.csv ids must be 0..n-1 in order");
    corpus.classes.push_back(ClassDef{f[1], {}});
    (f[2] == "true" ? corpus.split.seen : corpus.split.unseen).push_back(id);
  }
  corpus.split.validate();

  const auto emb_lines = io::read_lines(dir / "embeddings.csv");
  if (emb_lines.empty()) throw FormatError("embeddings.csv is empty");
  const std::size_t d_t = io::split(emb_lines[0], ',').size() - 1;
  corpus.semantics.vectors = Tensor(corpus.classes.size(), d_t);
  std::size_t rows = 0;
  for (std::size_t i = 1; i < emb_lines.size(); ++i) {
    if (emb_lines[i].empty()) continue;
    const auto f = io::split(emb_lines[i], ',');
    if (f.size() != d_t + 1) throw FormatError("embeddings.csv line " + std::to_string(i + 1) + " is ragged");
    const auto c = static_cast<std::size_t>(io::parse_int(f[0]));
    if (c >= corpus.classes.size()) throw FormatError("embeddings.csv: unknown class id");
    for (std::size_t j = 0; j < d_t; ++j) corpus.semantics.vectors(c, j) = io::parse_double(f[j + 1]);
    ++rows;
  }
  if (rows != corpus.classes.size()) throw FormatError("embeddings.csv must hold one row per class");

  const auto index = io::read_lines(dir / "scenes.csv");
  for (std::size_t i = 1; i < index.size(); ++i) {
    if (index[i].empty()) continue;
    const auto f = io::split(index[i], ',');
    if (f.size() != 2) throw FormatError("scenes.csv line " + std::to_string(i + 1) + ": expected scene_id,subset");
    SceneSample s;
    s.scene_id = io::parse_int(f[0]);
    const auto lines = io::read_lines(dir / ("scene_" + f[0] + ".csv"));
    std::vector<double> vals;
    for (std::size_t k = 1; k < lines.size(); ++k) {
      if (lines[k].empty()) continue;
      const auto cols = io::split(lines[k], ',');
      if (cols.size() != 4) throw FormatError("scene_" + f[0] + ".csv line " + std::to_string(k + 1));
      for (int j = 0; j < 3; ++j) vals.push_back(io::parse_double(cols[j]));
      const auto lab = static_cast<std::size_t>(io::parse_int(cols[3]));
      if (lab >= corpus.classes.size()) throw FormatError("scene label out of range");
      s.labels.push_back(lab);
    }
    if (s.labels.empty()) throw FormatError("scene_" + f[0] + ".csv has no points");
    s.points = Tensor(s.labels.size(), 3, std::move(vals));
    (f[1] == "test" ? corpus.test : corpus.train).push_back(std::move(s));
  }
  return corpus;
}

}  // namespace zshot
