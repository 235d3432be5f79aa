#include "tgnn/image.hpp"

#include <array>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace tgnn {

int BinaryImage::count_foreground() const {
  return std::accumulate(pixels.begin(), pixels.end(), 0,
                         [](int acc, std::uint8_t v) { return acc + (v != 0); });
}

BinaryImage binarize(const GrayImage& img, int threshold) {
  if (threshold < 0 || threshold > 255) {
    throw std::invalid_argument("binarize: threshold " + std::to_string(threshold) +
                                " outside [0, 256)");
  }
  BinaryImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = img.pixels[i] >= threshold ? 1 : 0;
  }
  return out;
}

int otsu_threshold(const GrayImage& img) {
  if (img.pixels.empty()) throw EmptyImage("otsu_threshold: empty image");
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t v : img.pixels) ++hist[v];

  const double total = static_cast<double>(img.pixels.size());
  double sum = 0.0;
  for (int i = 0; i < 256; ++i) sum += static_cast<double>(i) * hist[i];

  double best_var = -1.0;
  int best = 128;
  double sum_bg = 0.0;
  double weight_bg = 0.0;
  for (int t = 0; t < 256; ++t) {
    weight_bg += static_cast<double>(hist[t]);
    if (weight_bg == 0.0) continue;
    const double weight_fg = total - weight_bg;
    if (weight_fg == 0.0) break;
    sum_bg += static_cast<double>(t) * hist[t];
    const double mean_bg = sum_bg / weight_bg;
    const double mean_fg = (sum - sum_bg) / weight_fg;
    const double diff = mean_bg - mean_fg;
    const double var = weight_bg * weight_fg * diff * diff;
    if (var > best_var) {
      best_var = var;
      best = t + 1;  // binarize() keeps values >= threshold, i.e. > t
    }
  }
  return best;
}

namespace {

// Neighborhood values clockwise from north: P2=N, P3=NE, P4=E, P5=SE, P6=S,
// P7=SW, P8=W, P9=NW. Pixels outside the image read as background.
std::array<int, 8> neighborhood(const BinaryImage& img, int x, int y) {
  return {img.at_or_zero(x, y - 1),     img.at_or_zero(x + 1, y - 1),
          img.at_or_zero(x + 1, y),     img.at_or_zero(x + 1, y + 1),
          img.at_or_zero(x, y + 1),     img.at_or_zero(x - 1, y + 1),
          img.at_or_zero(x - 1, y),     img.at_or_zero(x - 1, y - 1)};
}

// Deletion candidates for one of the two subiterations, scanning the frozen
// image in raster order. Flat pixel indices are returned so callers can mark
// the working copy afterwards.
std::vector<int> subiteration_candidates(const BinaryImage& img, int sub) {
  std::vector<int> candidates;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!img.at(x, y)) continue;
      const auto p = neighborhood(img, x, y);
      const int b = std::accumulate(p.begin(), p.end(), 0);
      if (b < 2 || b > 6) continue;
      int transitions = 0;
      for (int i = 0; i < 8; ++i) transitions += (p[i] == 0 && p[(i + 1) % 8] == 1);
      if (transitions != 1) continue;
      const int p2 = p[0], p4 = p[2], p6 = p[4], p8 = p[6];
      const bool face_ok = sub == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                    : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
      if (face_ok) candidates.push_back(y * img.width + x);
    }
  }
  return candidates;
}

// 8-connected component labels (-1 for background), components numbered in
// raster order of their first pixel.
std::vector<int> label_components8(const BinaryImage& img, int& count) {
  std::vector<int> labels(img.pixels.size(), -1);
  std::vector<int> stack;
  count = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int idx = y * img.width + x;
      if (!img.pixels[idx] || labels[idx] >= 0) continue;
      const int id = count++;
      labels[idx] = id;
      stack.assign(1, idx);
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % img.width;
        const int cy = cur / img.width;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (!img.in_bounds(nx, ny)) continue;
            const int nidx = ny * img.width + nx;
            if (img.pixels[nidx] && labels[nidx] < 0) {
              labels[nidx] = id;
              stack.push_back(nidx);
            }
          }
        }
      }
    }
  }
  return labels;
}

}  // namespace

BinaryImage thin(const BinaryImage& img) {
  BinaryImage out = img;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int sub = 0; sub < 2; ++sub) {
      const auto candidates = subiteration_candidates(out, sub);
      if (candidates.empty()) continue;

      // A parallel deletion may wipe a small component out entirely (e.g. a
      // 2x2 square, where every pixel qualifies at once). Keep such a
      // component's first candidate in raster order so each input component
      // survives as exactly one skeleton component.
      int component_count = 0;
      const auto labels = label_components8(out, component_count);
      std::vector<int> component_size(component_count, 0);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 0) ++component_size[labels[i]];
      }
      std::vector<int> candidate_count(component_count, 0);
      std::vector<int> first_candidate(component_count, -1);
      for (int idx : candidates) {
        const int c = labels[idx];
        if (first_candidate[c] < 0) first_candidate[c] = idx;
        ++candidate_count[c];
      }
      for (int idx : candidates) {
        const int c = labels[idx];
        if (candidate_count[c] == component_size[c] && idx == first_candidate[c]) continue;
        out.pixels[idx] = 0;
        changed = true;
      }
    }
  }
  return out;
}

}  // namespace tgnn
