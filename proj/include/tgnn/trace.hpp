#pragma once

#include <compare>
#include <iosfwd>
#include <span>
#include <vector>

#include "tgnn/image.hpp"

namespace tgnn {

// Pixel coordinate: x = column, y = row (origin top-left, y grows downward).
struct Pixel {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Pixel&, const Pixel&) = default;
};

// One traced stroke; consecutive points are 8-adjacent skeleton pixels.
struct PixelPath {
  std::vector<Pixel> points;
};

// The eight step directions in scan order E, NE, N, NW, W, SW, S, SE
// (counterclockwise on screen; N points to a smaller y). The array index is
// also the direction's octant, so angular distance between directions i and j
// is 45 * min(|i-j|, 8-|i-j|) degrees.
inline constexpr Pixel kStepDirections[8] = {{1, 0}, {1, -1}, {0, -1}, {-1, -1},
                                             {-1, 0}, {-1, 1}, {0, 1},  {1, 1}};

// Foreground 8-neighbors of p, in kStepDirections order. Throws OutOfBounds if
// p lies outside the image.
std::vector<Pixel> neighbors8(const BinaryImage& img, Pixel p);

// Starting pixel for a trace: the endpoint (foreground pixel with at most one
// foreground 8-neighbor) smallest in (y, x) order; if no endpoint exists (a
// closed curve), the smallest foreground pixel. Throws EmptyImage when there
// is no foreground.
Pixel find_start(const BinaryImage& img);

// Recovers a plausible pen ordering of a skeleton. Traces greedily from
// find_start, always stepping to the unvisited foreground neighbor whose
// direction is angularly closest to the previous step (ties and the first
// step fall back to kStepDirections order); a dead end closes the current
// path and the trace restarts from find_start over the unvisited remainder.
// Every foreground pixel appears in exactly one path, exactly once.
std::vector<PixelPath> recover_order(const BinaryImage& img);

// Writes paths as "x y" lines with a blank line between paths.
void write_paths(std::ostream& out, std::span<const PixelPath> paths);

}  // namespace tgnn
