#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invml/matrix.hpp"

namespace invml {

/// Scatter of the first two columns, one colour per label when given.
std::string scatter_svg(const Matrix& points, const std::optional<std::vector<int>>& labels,
                        const std::string& title);

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_svg(std::span<const LineSeries> series, const std::string& title,
                     const std::string& x_label, const std::string& y_label);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Binary greyscale PGM (P5); `pixels` row-major in [0, 1], clamped.
void write_pgm(const std::filesystem::path& path, std::span<const double> pixels,
               std::size_t width, std::size_t height);

/// Lays rows of `images` (each width*height) side by side into one strip.
std::vector<double> image_strip(const Matrix& images, std::size_t width, std::size_t height);

}  // namespace invml
