#include "tgnn/chaincode.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tgnn {
namespace {

// Lattice step for each octant in y-up coordinates.
constexpr int kStepX[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kStepY[8] = {0, 1, 1, 1, 0, -1, -1, -1};

int wrap8(long k) { return static_cast<int>(((k % 8) + 8) % 8); }

int octant_of(double dx, double dy) {
  // Position within the octant wheel; in (-4, 4] since atan2 is in (-pi, pi].
  const double t = std::atan2(dy, dx) / (std::numbers::pi / 4.0);
  const double lo = std::floor(t);
  const double frac = t - lo;
  if (frac > 0.5) return wrap8(static_cast<long>(lo) + 1);
  if (frac < 0.5) return wrap8(static_cast<long>(lo));
  // Exactly between two octants: take the smaller code, so the boundary
  // between 7 and 0 resolves to 0.
  return std::min(wrap8(static_cast<long>(lo)), wrap8(static_cast<long>(lo) + 1));
}

}  // namespace

Trajectory to_trajectory(std::span<const PixelPath> paths, int image_height) {
  Trajectory traj;
  for (const PixelPath& path : paths) {
    for (const Pixel& p : path.points) {
      traj.points.push_back({static_cast<double>(p.x), static_cast<double>(image_height - 1 - p.y)});
    }
  }
  if (traj.points.empty()) throw DegenerateTrajectory("to_trajectory: no traced points");
  return traj;
}

Trajectory to_trajectory(const StrokeSample& sample) {
  Trajectory traj;
  for (const auto& stroke : sample.strokes) {
    traj.points.insert(traj.points.end(), stroke.begin(), stroke.end());
  }
  if (traj.points.empty()) throw DegenerateTrajectory("to_trajectory: sample has no points");
  return traj;
}

Trajectory resample(const Trajectory& traj, int n_points) {
  if (n_points < 2) {
    throw std::invalid_argument("resample: n_points must be >= 2, got " +
                                std::to_string(n_points));
  }
  const auto& pts = traj.points;
  if (pts.size() < 2) {
    throw DegenerateTrajectory("resample: trajectory has " + std::to_string(pts.size()) +
                               " point(s), need at least 2");
  }
  std::vector<double> cumulative(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + std::hypot(pts[i].x - pts[i - 1].x,
                                                   pts[i].y - pts[i - 1].y);
  }
  const double total = cumulative.back();
  if (total == 0.0) throw DegenerateTrajectory("resample: trajectory has zero length");

  Trajectory out;
  out.points.reserve(n_points);
  std::size_t seg = 0;
  for (int i = 0; i < n_points; ++i) {
    if (i == 0) {
      out.points.push_back(pts.front());
      continue;
    }
    if (i == n_points - 1) {
      out.points.push_back(pts.back());
      continue;
    }
    const double target = total * i / (n_points - 1);
    while (seg + 2 < pts.size() && cumulative[seg + 1] < target) ++seg;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double u = seg_len > 0.0 ? (target - cumulative[seg]) / seg_len : 0.0;
    out.points.push_back({pts[seg].x + u * (pts[seg + 1].x - pts[seg].x),
                          pts[seg].y + u * (pts[seg + 1].y - pts[seg].y)});
  }
  return out;
}

ChainCode encode_directions(const Trajectory& traj) {
  ChainCode out;
  if (traj.points.size() < 2) return out;
  out.codes.reserve(traj.points.size() - 1);
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    const double dx = traj.points[i].x - traj.points[i - 1].x;
    const double dy = traj.points[i].y - traj.points[i - 1].y;
    if (dx == 0.0 && dy == 0.0) {
      throw DegenerateSegment("encode_directions: zero-length segment at index " +
                              std::to_string(i - 1));
    }
    out.codes.push_back(octant_of(dx, dy));
  }
  return out;
}

Trajectory decode(const ChainCode& codes, Point start) {
  Trajectory out;
  out.points.reserve(codes.codes.size() + 1);
  out.points.push_back(start);
  Point cur = start;
  for (int code : codes.codes) {
    if (code < 0 || code > 7) {
      throw std::invalid_argument("decode: code " + std::to_string(code) + " outside [0, 8)");
    }
    cur.x += kStepX[code];
    cur.y += kStepY[code];
    out.points.push_back(cur);
  }
  return out;
}

ChainCode feature_vector(const Trajectory& traj, Profile profile) {
  return encode_directions(resample(traj, feature_length(profile) + 1));
}

}  // namespace tgnn
