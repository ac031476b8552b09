#include "plots.hpp"

#include <algorithm>
#include <cstdio>

#include "zshot/io.hpp"

namespace zshot::plots {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// Escapes text for element content and attribute values.
std::string xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// "--" may not appear inside an XML comment.
std::string comment_safe(std::string s) {
  for (std::size_t p = s.find("--"); p != std::string::npos; p = s.find("--", p)) s.replace(p, 2, "- ");
  return s;
}

std::string header(double w, double h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) +
         "\" height=\"" + num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + xml(s) + "</text>\n";
}

std::string rect(double x, double y, double w, double h, const std::string& fill) {
  return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" fill=\"" + fill + "\"/>\n";
}

std::string grey(double v) {
  const int c = static_cast<int>(255.0 * (1.0 - std::clamp(v, 0.0, 1.0)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c, c, 255);
  return buf;
}

}  // namespace

std::string iou_bars(const std::vector<std::string>& names, const std::vector<double>& iou,
                     const std::vector<bool>& unseen) {
  const double bar = 40, gap = 14, left = 50, top = 30, plot_h = 200;
  const double w = left + static_cast<double>(names.size()) * (bar + gap) + 20;
  const double h = top + plot_h + 50;
  std::string out = header(w, h);
  out += "<!-- data\nclass,iou,unseen\n";
  for (std::size_t i = 0; i < names.size(); ++i)
    out += comment_safe(names[i]) + ',' + io::fmt(iou[i]) + ',' + (unseen[i] ? "1" : "0") + '\n';
  out += "-->\n";
  out += text(w / 2, 18, "per-class IoU (%)");
  for (int t = 0; t <= 100; t += 25) {
    const double y = top + plot_h * (1.0 - t / 100.0);
    out += "<line x1=\"" + num(left - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(w - 10) + "\" y2=\"" + num(y) +
           "\" stroke=\"#dddddd\"/>\n";
    out += text(left - 8, y + 4, std::to_string(t), "end");
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double x = left + static_cast<double>(i) * (bar + gap);
    const double bh = plot_h * std::clamp(iou[i], 0.0, 1.0);
    out += rect(x, top + plot_h - bh, bar, bh, unseen[i] ? "#d95f02" : "#1b9e77");
    out += text(x + bar / 2, top + plot_h - bh - 4, num(100.0 * iou[i]));
    out += text(x + bar / 2, top + plot_h + 16, names[i] + (unseen[i] ? "*" : ""));
  }
  out += text(w / 2, h - 8, "* unseen");
  out += "</svg>\n";
  return out;
}

std::string lgp_heatmaps(const std::vector<std::string>& names, const Tensor& visual, const Tensor& semantic) {
  const double cell = 14, left = 70, top = 40, sep = 40;
  const double map_w = cell * static_cast<double>(visual.cols());
  const double w = left + 2 * map_w + sep + 20;
  const double h = top + cell * static_cast<double>(visual.rows()) + 30;
  std::string out = header(w, h);
  out += "<!-- data\nkind,class";
  for (std::size_t j = 0; j < visual.cols(); ++j) out += ",w" + std::to_string(j);
  out += '\n';
  for (const auto& [kind, m] : {std::pair{"visual", &visual}, std::pair{"semantic", &semantic}}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      out += std::string(kind) + ',' + comment_safe(i < names.size() ? names[i] : std::to_string(i));
      for (double v : m->row(i)) out += ',' + io::fmt(v);
      out += '\n';
    }
  }
  out += "-->\n";
  for (int k = 0; k < 2; ++k) {
    const Tensor& m = k == 0 ? visual : semantic;
    const double x0 = left + k * (map_w + sep);
    out += text(x0 + map_w / 2, top - 10, k == 0 ? "visual (class mean)" : "semantic");
    double mx = 0.0;
    for (double v : m.values()) mx = std::max(mx, v);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        out += rect(x0 + cell * static_cast<double>(j), top + cell * static_cast<double>(i), cell, cell,
                    grey(mx > 0 ? m(i, j) / mx : 0.0));
  }
  for (std::size_t i = 0; i < visual.rows() && i < names.size(); ++i)
    out += text(left - 6, top + cell * (static_cast<double>(i) + 0.75), names[i], "end");
  out += text(w / 2, h - 8, "columns: prototypes; shade scaled per map");
  out += "</svg>\n";
  return out;
}

}  // namespace zshot::plots
