#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "tgnn/errors.hpp"
#include "tgnn/trace.hpp"

namespace tgnn {

// Continuous pen coordinate, y growing upward.
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Point&, const Point&) = default;
};

// Ordered pen positions of one sample (strokes already concatenated).
struct Trajectory {
  std::vector<Point> points;
};

// Directional codes, one per trajectory segment: octants counterclockwise
// from east, 0=E, 1=NE, 2=N, 3=NW, 4=W, 5=SW, 6=S, 7=SE.
struct ChainCode {
  std::vector<int> codes;
};

// Input source; selects the encoding length below.
enum class Profile { offline, online };

// Number of directional codes in a fixed-length encoding.
constexpr int feature_length(Profile profile) {
  return profile == Profile::offline ? 41 : 25;
}

// One pen-up/pen-down sample from a stroke file.
struct StrokeSample {
  int label = 0;
  std::vector<std::vector<Point>> strokes;
};

// Concatenates traced pixel paths into one trajectory, flipping to y-up
// coordinates (y' = image_height - 1 - row). Throws DegenerateTrajectory when
// the paths contain no points.
Trajectory to_trajectory(std::span<const PixelPath> paths, int image_height);

// Concatenates a sample's strokes in order; coordinates pass through
// unchanged. Throws DegenerateTrajectory when the sample has no points.
Trajectory to_trajectory(const StrokeSample& sample);

// Resamples to n_points positions equally spaced in arc length; the first and
// last input points are preserved exactly. Requires n_points >= 2; throws
// DegenerateTrajectory when the trajectory has fewer than two points or zero
// total length.
Trajectory resample(const Trajectory& traj, int n_points);

// One code per consecutive point pair: the octant nearest to the segment's
// direction. An exact tie between two octants resolves to the smaller code
// (so the 7-vs-0 boundary yields 0). Throws DegenerateSegment on a
// zero-length segment.
ChainCode encode_directions(const Trajectory& traj);

// Rebuilds a polyline from codes, taking one lattice step per code from
// start: code k moves by (dx, dy) in {-1,0,1}^2 along octant k. The result
// has codes.size() + 1 points and re-encodes to the same codes.
Trajectory decode(const ChainCode& codes, Point start);

// Fixed-length directional encoding: resamples to feature_length(profile) + 1
// points and encodes, yielding exactly feature_length(profile) codes.
ChainCode feature_vector(const Trajectory& traj, Profile profile);

// Reads newline-delimited JSON stroke samples: each line holds an integer
// "label" and "strokes", a list of [x, y] point lists (y-up). Blank lines are
// skipped. Throws CorruptRecord on malformed lines and LabelOutOfRange for
// labels outside [0, num_classes).
std::vector<StrokeSample> read_stroke_samples(const std::filesystem::path& path,
                                              int num_classes = 10);

}  // namespace tgnn
