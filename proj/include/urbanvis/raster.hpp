#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace urbanvis {

/// 8-bit interleaved RGB raster.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // width * height * 3
};

/// Grayscale intensities in [0, 255]; rows are image rows.
using GrayImage = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// PNG or JPEG, detected from the leading magic bytes. Throws UndecodableImage.
Raster decode_image(std::span<const std::uint8_t> bytes);
Raster load_image(const std::string& path);

void save_png(const std::string& path, const Raster& image);

/// Luma 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const Raster& image);

/// MIME type for a raster path, by extension.
std::string content_type_for(const std::string& path);

}  // namespace urbanvis
