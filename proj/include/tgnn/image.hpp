#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tgnn/errors.hpp"

namespace tgnn {

// 8-bit grayscale raster, row-major, (x, y) = (column, row), origin top-left.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // size == width * height

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Binary raster; 1 = foreground (ink), 0 = background. Same layout as GrayImage.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  BinaryImage() = default;
  BinaryImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  // Out-of-bounds reads see background; used by border-sensitive scans.
  std::uint8_t at_or_zero(int x, int y) const { return in_bounds(x, y) ? at(x, y) : 0; }

  int count_foreground() const;

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;
};

// Reads an IDX image container (magic 0x00000803, big-endian dimensions).
// Transparently inflates gzip-compressed files. Throws BadMagic / Truncated /
// IoError on malformed input.
std::vector<GrayImage> load_idx_images(const std::filesystem::path& path);

// Reads an IDX label container (magic 0x00000801). Labels must lie in
// [0, num_classes); otherwise throws LabelOutOfRange.
std::vector<int> load_idx_labels(const std::filesystem::path& path, int num_classes = 10);

// Foreground = pixels with value >= threshold. threshold must be in [0, 256);
// threshold 0 marks every pixel foreground.
BinaryImage binarize(const GrayImage& img, int threshold);

// Otsu's method: the threshold maximizing between-class variance, returned in
// [1, 255] so that binarize(img, t) separates the two modes. A constant image
// yields 128.
int otsu_threshold(const GrayImage& img);

// Iterative morphological thinning to a one-pixel-wide skeleton. Each pass runs
// two parallel subiterations that peel boundary pixels (neighbor count in
// [2, 6], exactly one 0->1 transition around the pixel, and the south/east —
// then north/west — face conditions); pixels outside the image count as
// background. If deleting a subiteration's full candidate set would erase an
// entire 8-connected component, the component's first candidate in raster
// order is retained, so the skeleton keeps exactly one component per input
// component. Runs until a full pass deletes nothing. Output is a subset of the
// input foreground and a fixpoint of the operation.
BinaryImage thin(const BinaryImage& img);

}  // namespace tgnn
