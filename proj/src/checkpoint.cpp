#include "zshot/checkpoint.hpp"

#include <map>

#include "zshot/errors.hpp"
#include "zshot/io.hpp"

namespace zshot {

namespace {
constexpr const char* kHeader = "zshot-checkpoint 1";
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<const Parameter*>& params) {
  std::string out = std::string(kHeader) + '\n';
  for (const Parameter* p : params) {
    const Tensor& v = p->value;
    out += p->name + ',' + std::to_string(v.rows()) + ',' + std::to_string(v.cols()) + '\n';
    for (std::size_t i = 0; i < v.rows(); ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (j) out += ',';
        out += io::fmt(v(i, j));
      }
      out += '\n';
    }
  }
  io::write_text(path, out);
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<Parameter*>& params) {
  if (!std::filesystem::exists(path)) throw LoadError("missing checkpoint " + path.string());
  const auto lines = io::read_lines(path);
  if (lines.empty() || io::trim(lines[0]) != kHeader) throw FormatError(path.string() + ": not a zshot checkpoint");
  std::map<std::string, Tensor> found;
  std::size_t i = 1;
  while (i < lines.size()) {
    if (io::trim(lines[i]).empty()) {
      ++i;
      continue;
    }
    const auto head = io::split(lines[i], ',');
    if (head.size() != 3) throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": expected name,rows,cols");
    const auto rows = static_cast<std::size_t>(io::parse_int(head[1]));
    const auto cols = static_cast<std::size_t>(io::parse_int(head[2]));
    Tensor t(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (i + 1 + r >= lines.size()) throw FormatError(path.string() + ": truncated tensor " + head[0]);
      const auto f = io::split(lines[i + 1 + r], ',');
      if (f.size() != cols) throw FormatError(path.string() + ": ragged row in tensor " + head[0]);
      for (std::size_t c = 0; c < cols; ++c) t(r, c) = io::parse_double(f[c]);
    }
    found[head[0]] = std::move(t);
    i += 1 + rows;
  }
  for (Parameter* p : params) {
    auto it = found.find(p->name);
    if (it == found.end()) throw LoadError(path.string() + " has no tensor '" + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw FormatError("checkpoint tensor '" + p->name + "' is " + it->second.shape_str() + ", expected " +
                        p->value.shape_str());
    }
    p->value = it->second;
  }
}

}  // namespace zshot
