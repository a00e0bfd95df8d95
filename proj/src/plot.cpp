#include "invml/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "invml/error.hpp"

namespace invml {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 56.0;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  void widen() {
    if (!(hi > lo)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

Range range_of(std::span<const double> v) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    r.lo = std::min(r.lo, x);
    r.hi = std::max(r.hi, x);
  }
  if (r.lo > r.hi) r = {0.0, 1.0};
  r.widen();
  return r;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string colour(int label) {
  if (label >= 0 && label < 10) return kPalette[label];
  // Deterministic hue for labels beyond the palette.
  std::ostringstream s;
  s << "hsl(" << (static_cast<unsigned>(label) * 47u) % 360u << ",65%,45%)";
  return s.str();
}

class Frame {
 public:
  Frame(Range x, Range y) : x_(x), y_(y) {}
  double px(double v) const { return kMargin + (v - x_.lo) / (x_.hi - x_.lo) * (kWidth - 2 * kMargin); }
  double py(double v) const {
    return kHeight - kMargin - (v - y_.lo) / (y_.hi - y_.lo) * (kHeight - 2 * kMargin);
  }

  void open(std::ostringstream& s, const std::string& title) const {
    s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << escape(title) << "</text>\n"
      << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
      << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = x_.lo + (x_.hi - x_.lo) * t / 4.0;
      const double fy = y_.lo + (y_.hi - y_.lo) * t / 4.0;
      s << "<text x=\"" << px(fx) << "\" y=\"" << kHeight - kMargin + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << std::setprecision(3) << fx << "</text>\n";
      s << "<text x=\"" << kMargin - 6 << "\" y=\"" << py(fy) + 3
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fy
        << "</text>\n";
    }
  }

 private:
  Range x_;
  Range y_;
};

}  // namespace

std::string scatter_svg(const Matrix& points, const std::optional<std::vector<int>>& labels,
                        const std::string& title) {
  if (points.cols() < 2) throw Error(ErrorCode::ShapeMismatch, "scatter needs two columns");
  if (labels && labels->size() != points.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "one label per point required");
  }
  std::vector<double> xs(points.rows());
  std::vector<double> ys(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    xs[i] = points(i, 0);
    ys[i] = points(i, 1);
  }
  const Frame f(range_of(xs), range_of(ys));
  std::ostringstream s;
  s << std::fixed;
  f.open(s, title);
  s << std::setprecision(2);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    s << "<circle cx=\"" << f.px(xs[i]) << "\" cy=\"" << f.py(ys[i]) << "\" r=\"2\" fill=\""
      << (labels ? colour((*labels)[i]) : std::string("#1f77b4")) << "\" fill-opacity=\"0.7\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string line_svg(std::span<const LineSeries> series, const std::string& title,
                     const std::string& x_label, const std::string& y_label) {
  std::vector<double> all_x;
  std::vector<double> all_y;
  for (const auto& l : series) {
    if (l.x.size() != l.y.size()) throw Error(ErrorCode::ShapeMismatch, "series x/y lengths differ");
    all_x.insert(all_x.end(), l.x.begin(), l.x.end());
    all_y.insert(all_y.end(), l.y.begin(), l.y.end());
  }
  const Frame f(range_of(all_x), range_of(all_y));
  std::ostringstream s;
  s << std::fixed;
  f.open(s, title);
  s << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(x_label)
    << "</text>\n";
  s << "<text x=\"14\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 14 " << kHeight / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
    << escape(y_label) << "</text>\n";
  s << std::setprecision(2);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& l = series[k];
    const std::string c = colour(static_cast<int>(k));
    s << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < l.x.size(); ++i) {
      if (!std::isfinite(l.y[i])) continue;
      s << f.px(l.x[i]) << ',' << f.py(l.y[i]) << ' ';
    }
    s << "\"/>\n";
    s << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 14 + 14.0 * k
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << c
      << "\">" << escape(l.name) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t width, std::size_t height) {
  if (pixels.size() != width * height) {
    throw Error(ErrorCode::ShapeMismatch, "pixel count differs from width x height");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  for (double v : pixels) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0))));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<double> image_strip(const Matrix& images, std::size_t width, std::size_t height) {
  if (images.cols() != width * height) {
    throw Error(ErrorCode::ShapeMismatch, "image rows must hold width x height pixels");
  }
  const std::size_t count = images.rows();
  std::vector<double> strip(count * width * height);
  for (std::size_t k = 0; k < count; ++k) {
    const auto img = images.row(k);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        strip[r * count * width + k * width + c] = img[r * width + c];
      }
    }
  }
  return strip;
}

}  // namespace invml
