#include "tgnn/trace.hpp"

#include <ostream>

namespace tgnn {
namespace {

// Octant index of a unit step, matching kStepDirections.
int direction_index(Pixel from, Pixel to) {
  const int dx = to.x - from.x;
  const int dy = to.y - from.y;
  for (int i = 0; i < 8; ++i) {
    if (kStepDirections[i].x == dx && kStepDirections[i].y == dy) return i;
  }
  return -1;  // unreachable for 8-adjacent pixels
}

int angular_distance(int a, int b) {
  const int d = a > b ? a - b : b - a;
  return d > 4 ? 8 - d : d;
}

}  // namespace

std::vector<Pixel> neighbors8(const BinaryImage& img, Pixel p) {
  if (!img.in_bounds(p.x, p.y)) {
    throw OutOfBounds("neighbors8: (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside " + std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  std::vector<Pixel> result;
  for (const Pixel& d : kStepDirections) {
    const int nx = p.x + d.x, ny = p.y + d.y;
    if (img.in_bounds(nx, ny) && img.at(nx, ny)) result.push_back({nx, ny});
  }
  return result;
}

Pixel find_start(const BinaryImage& img) {
  Pixel first_foreground{-1, -1};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!img.at(x, y)) continue;
      if (first_foreground.x < 0) first_foreground = {x, y};
      if (neighbors8(img, {x, y}).size() <= 1) return {x, y};
    }
  }
  if (first_foreground.x < 0) throw EmptyImage("find_start: no foreground pixels");
  return first_foreground;  // closed curve: no endpoint exists
}

std::vector<PixelPath> recover_order(const BinaryImage& img) {
  std::vector<PixelPath> paths;
  BinaryImage remaining = img;
  while (remaining.count_foreground() > 0) {
    PixelPath path;
    Pixel cur = find_start(remaining);
    remaining.at(cur.x, cur.y) = 0;
    path.points.push_back(cur);
    int prev_dir = -1;
    while (true) {
      const auto candidates = neighbors8(remaining, cur);
      if (candidates.empty()) break;
      // kStepDirections order makes the first minimum the tie-break winner and
      // covers the first step, where any direction is equally acceptable.
      Pixel next = candidates.front();
      if (prev_dir >= 0) {
        int best = 8;
        for (const Pixel& c : candidates) {
          const int d = angular_distance(direction_index(cur, c), prev_dir);
          if (d < best) {
            best = d;
            next = c;
          }
        }
      }
      prev_dir = direction_index(cur, next);
      cur = next;
      remaining.at(cur.x, cur.y) = 0;
      path.points.push_back(cur);
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

void write_paths(std::ostream& out, std::span<const PixelPath> paths) {
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i > 0) out << '\n';
    for (const Pixel& p : paths[i].points) out << p.x << ' ' << p.y << '\n';
  }
}

}  // namespace tgnn
