#include "invml/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "invml/error.hpp"
#include "invml/linalg.hpp"
#include "invml/metrics.hpp"
#include "invml/random.hpp"

namespace invml {
namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw Error(ErrorCode::TruncatedFile, path.string() + ": header");
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<unsigned char, 4> b{static_cast<unsigned char>(v >> 24),
                                       static_cast<unsigned char>(v >> 16),
                                       static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b.data()), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : v) x = rng.normal();
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  }
  for (double& x : v) x /= norm;
  return v;
}

std::optional<std::vector<double>> parse_numbers(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto first = cell.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::nullopt;
    const auto last = cell.find_last_not_of(" \t\r");
    const std::string trimmed = cell.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(trimmed, &used);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (used != trimmed.size()) return std::nullopt;
    values.push_back(v);
  }
  return values;
}

}  // namespace

std::size_t Dataset::class_count() const {
  if (!labels || labels->empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels->begin(), labels->end())) + 1;
}

void Dataset::validate() const {
  if (labels) {
    if (labels->size() != x.rows()) {
      throw Error(ErrorCode::CountMismatch, "label count differs from sample count");
    }
    for (int l : *labels) {
      if (l < 0) throw Error(ErrorCode::InvalidArgument, "negative label");
    }
  }
}

double NeighborGraph::mean_distance() const {
  if (distances.empty()) return 0.0;
  return sum(distances) / static_cast<double>(distances.size());
}

std::vector<std::pair<std::size_t, std::size_t>> NeighborGraph::pairs(std::size_t k_used) const {
  if (k_used == 0 || k_used > k) k_used = k;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(size() * k_used);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t r = 0; r < k_used; ++r) out.emplace_back(i, neighbor(i, r));
  }
  return out;
}

Dataset gen_swiss_roll(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "swiss roll needs n >= 1");
  Rng rng(seed);
  Dataset ds;
  ds.name = "swissroll";
  ds.x = Matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * rng.uniform());
    const double y = 21.0 * rng.uniform();
    ds.x(i, 0) = t * std::cos(t);
    ds.x(i, 1) = y;
    ds.x(i, 2) = t * std::sin(t);
  }
  return ds;
}

Matrix sphere_centers(const SpheresOptions& options, std::uint64_t seed) {
  Rng rng(seed);
  const double stddev = 10.0 / std::sqrt(static_cast<double>(options.ambient_dim));
  return rng.gaussian(options.sphere_count, options.ambient_dim, stddev);
}

Dataset gen_spheres(const SpheresOptions& options, std::uint64_t seed) {
  const std::size_t m = options.ambient_dim;
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "spheres need ambient_dim >= 2");
  if (options.n == 0) throw Error(ErrorCode::InvalidArgument, "spheres need n >= 1");
  const std::size_t d = options.intrinsic_dim == 0 ? m - 1 : options.intrinsic_dim;
  if (d + 1 > m) throw Error(ErrorCode::InvalidArgument, "sphere dimension exceeds ambient space");

  const Matrix centers = sphere_centers(options, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  // Orthonormal frame (d+1 columns) placing the spheres in ambient space.
  Matrix frame;
  if (d + 1 == m) {
    frame = Matrix::identity(m);
  } else {
    frame = thin_qr(rng.gaussian(m, d + 1)).q;
  }

  const std::size_t n_small = options.n * options.sphere_count / (options.sphere_count + 1);
  Dataset ds;
  ds.name = options.half ? "halfspheres" : "spheres";
  ds.x = Matrix(options.n, m);
  ds.labels = std::vector<int>(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    const bool small = i < n_small;
    const std::size_t sphere = small ? i * options.sphere_count / n_small : options.sphere_count;
    std::vector<double> local = unit_vector(rng, d + 1);
    // Hemisphere: reflect onto the side where the last local coordinate is >= 0.
    if (options.half && local.back() < 0.0) local.back() = -local.back();
    const double radius = small ? 1.0 : options.outer_radius;
    auto row = ds.x.row(i);
    for (std::size_t a = 0; a < m; ++a) {
      double v = 0.0;
      for (std::size_t b = 0; b <= d; ++b) v += frame(a, b) * local[b];
      row[a] = radius * v + (small ? centers(sphere, a) : 0.0);
    }
    (*ds.labels)[i] = static_cast<int>(sphere);
  }
  return ds;
}

Dataset gen_spheres(std::size_t n, std::size_t ambient_dim, std::uint64_t seed, bool half) {
  SpheresOptions o;
  o.n = n;
  o.ambient_dim = ambient_dim;
  o.half = half;
  return gen_spheres(o, seed);
}

std::vector<double> resample_image(std::span<const double> pixels, std::size_t width,
                                   std::size_t height, std::size_t out_width,
                                   std::size_t out_height) {
  std::vector<double> out(out_width * out_height, 0.0);
  const double sx = static_cast<double>(width) / static_cast<double>(out_width);
  const double sy = static_cast<double>(height) / static_cast<double>(out_height);
  for (std::size_t oy = 0; oy < out_height; ++oy) {
    const double y0 = oy * sy;
    const double y1 = y0 + sy;
    for (std::size_t ox = 0; ox < out_width; ++ox) {
      const double x0 = ox * sx;
      const double x1 = x0 + sx;
      double acc = 0.0;
      for (auto iy = static_cast<std::size_t>(y0); iy < height && static_cast<double>(iy) < y1; ++iy) {
        const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
        if (wy <= 0.0) continue;
        for (auto ix = static_cast<std::size_t>(x0); ix < width && static_cast<double>(ix) < x1; ++ix) {
          const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
          if (wx <= 0.0) continue;
          acc += wx * wy * pixels[iy * width + ix];
        }
      }
      out[oy * out_width + ox] = acc / (sx * sy);
    }
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::optional<std::filesystem::path>& labels_path, bool downsample16) {
  std::ifstream in = open_binary(images_path);
  const std::uint32_t magic = read_be32(in, images_path);
  if (magic != kIdxImageMagic) {
    throw Error(ErrorCode::BadMagic, images_path.string() + ": image magic " + std::to_string(magic));
  }
  const std::uint32_t count = read_be32(in, images_path);
  const std::uint32_t rows = read_be32(in, images_path);
  const std::uint32_t cols = read_be32(in, images_path);
  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> raw(std::size_t{count} * pixels);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorCode::TruncatedFile, images_path.string() + ": fewer pixels than the header claims");
  }

  Dataset ds;
  ds.name = images_path.stem().string();
  const std::size_t out_w = downsample16 ? 16 : cols;
  const std::size_t out_h = downsample16 ? 16 : rows;
  ds.image_width = out_w;
  ds.image_height = out_h;
  ds.x = Matrix(count, out_w * out_h);
  std::vector<double> img(pixels);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) img[p] = raw[i * pixels + p] / 255.0;
    if (downsample16) {
      const auto small = resample_image(img, cols, rows, 16, 16);
      std::copy(small.begin(), small.end(), ds.x.row(i).begin());
    } else {
      std::copy(img.begin(), img.end(), ds.x.row(i).begin());
    }
  }

  if (labels_path) {
    std::ifstream lin = open_binary(*labels_path);
    const std::uint32_t lmagic = read_be32(lin, *labels_path);
    if (lmagic != kIdxLabelMagic) {
      throw Error(ErrorCode::BadMagic, labels_path->string() + ": label magic " + std::to_string(lmagic));
    }
    const std::uint32_t lcount = read_be32(lin, *labels_path);
    if (lcount != count) {
      throw Error(ErrorCode::CountMismatch, std::to_string(count) + " images vs " +
                                                std::to_string(lcount) + " labels");
    }
    std::vector<unsigned char> lraw(lcount);
    if (!lin.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()))) {
      throw Error(ErrorCode::TruncatedFile, labels_path->string() + ": fewer labels than the header claims");
    }
    ds.labels = std::vector<int>(lraw.begin(), lraw.end());
  }
  return ds;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  if (pixels.size() != std::size_t{count} * rows * cols) {
    throw Error(ErrorCode::CountMismatch, "pixel buffer does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, count);
  write_be32(out, rows);
  write_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_csv(const std::filesystem::path& path, bool last_column_is_label) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto parsed = parse_numbers(line);
    if (!parsed) {
      if (rows == 0 && line_no == 1) continue;  // header
      throw Error(ErrorCode::InvalidArgument, path.string() + ":" + std::to_string(line_no) +
                                                  ": non-numeric field");
    }
    std::size_t feature_cols = parsed->size() - (last_column_is_label ? 1 : 0);
    if (parsed->empty() || (last_column_is_label && parsed->size() < 2)) {
      throw Error(ErrorCode::InvalidArgument, path.string() + ": empty row");
    }
    if (rows == 0) cols = feature_cols;
    if (feature_cols != cols) {
      throw Error(ErrorCode::ShapeMismatch, path.string() + ":" + std::to_string(line_no) +
                                                ": ragged row");
    }
    values.insert(values.end(), parsed->begin(), parsed->begin() + static_cast<std::ptrdiff_t>(cols));
    if (last_column_is_label) labels.push_back(static_cast<int>(std::lround(parsed->back())));
    ++rows;
  }
  Dataset ds;
  ds.name = path.stem().string();
  ds.x = Matrix(rows, cols, std::move(values));
  if (last_column_is_label) ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

void save_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      if (j) out << ',';
      out << ds.x(i, j);
    }
    if (ds.labels) out << ',' << (*ds.labels)[i];
    out << '\n';
  }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.name = ds.name;
  out.image_width = ds.image_width;
  out.image_height = ds.image_height;
  out.x = select_rows(ds.x, rows);
  if (ds.labels) {
    std::vector<int> l(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) l[i] = (*ds.labels)[rows[i]];
    out.labels = std::move(l);
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, std::size_t n_train,
                                             std::uint64_t seed) {
  if (n_train > ds.size()) throw Error(ErrorCode::InvalidArgument, "n_train exceeds dataset size");
  Rng rng(seed);
  std::vector<std::size_t> perm = rng.permutation(ds.size());
  std::span<const std::size_t> all(perm);
  return {subset(ds, all.first(n_train)), subset(ds, all.subspan(n_train))};
}

NeighborGraph knn_graph(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (k >= n) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " needs more than " +
                                          std::to_string(n) + " samples");
  }
  NeighborGraph g;
  g.k = k;
  g.indices.resize(n * k);
  g.distances = Matrix(n, k);
  std::vector<std::pair<double, std::size_t>> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      row[c++] = {squared_distance(x.row(i), x.row(j)), j};
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
    for (std::size_t r = 0; r < k; ++r) {
      g.indices[i * k + r] = row[r].second;
      g.distances(i, r) = std::sqrt(row[r].first);
    }
  }
  return g;
}

double histogram_entropy_bits(std::span<const double> pixels, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::InvalidArgument, "histogram needs bins >= 1");
  std::vector<std::size_t> counts(bins, 0);
  for (double p : pixels) {
    const double c = std::clamp(p, 0.0, 1.0);
    counts[std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)))]++;
  }
  double h = 0.0;
  const double total = static_cast<double>(pixels.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

double histogram_std(std::span<const double> pixels, std::size_t bins) {
  if (bins == 0) throw Error(ErrorCode::InvalidArgument, "histogram needs bins >= 1");
  std::vector<double> counts(bins, 0.0);
  for (double p : pixels) {
    const double c = std::clamp(p, 0.0, 1.0);
    counts[std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)))] += 1.0;
  }
  const double mean = static_cast<double>(pixels.size()) / static_cast<double>(bins);
  double var = 0.0;
  for (double c : counts) var += (c - mean) * (c - mean);
  return std::sqrt(var / static_cast<double>(bins));
}

DatasetStats dataset_stats(const Dataset& ds, std::size_t bins, std::uint64_t seed,
                           bool with_accuracy) {
  DatasetStats stats;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    stats.entropy_mean += histogram_entropy_bits(ds.x.row(i), bins);
    stats.hist_std_mean += histogram_std(ds.x.row(i), bins);
  }
  if (ds.size() > 0) {
    stats.entropy_mean /= static_cast<double>(ds.size());
    stats.hist_std_mean /= static_cast<double>(ds.size());
  }
  if (with_accuracy) {
    if (!ds.labels) throw Error(ErrorCode::MissingLabels, "dataset_stats accuracy needs labels");
    stats.knn_acc = acc_knn(ds.x, *ds.labels, 5, seed);
    stats.logistic_acc = acc_logistic_10fold(ds.x, *ds.labels, seed);
  }
  return stats;
}

}  // namespace invml
