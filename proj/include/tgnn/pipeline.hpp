#pragma once

#include <optional>
#include <vector>

#include "tgnn/graph.hpp"
#include "tgnn/image.hpp"
#include "tgnn/trace.hpp"

namespace tgnn {

inline constexpr int kNumClasses = 10;
inline constexpr int kDefaultThreshold = 128;

struct PrepareStats {
  std::size_t total = 0;    // samples examined
  std::size_t kept = 0;     // graphs produced
  std::size_t skipped = 0;  // degenerate samples dropped (blank or zero-length ink)
};

struct PrepareResult {
  GraphDataset dataset;
  PrepareStats stats;
};

// Every stage output for one raster sample; pipeline order top to bottom.
struct OfflineTrace {
  BinaryImage binary;
  BinaryImage skeleton;
  std::vector<PixelPath> paths;
  Trajectory trajectory;
  Trajectory resampled;
  ChainCode codes;
  TrajectoryGraph graph;
};

// Runs one raster image through binarize -> thin -> order recovery ->
// resample -> directional encoding -> graph. threshold nullopt selects Otsu's
// threshold per image. Degenerate inputs surface as DegenerateTrajectory /
// DegenerateSegment.
OfflineTrace trace_offline_sample(const GrayImage& img, std::optional<int> threshold,
                                  Profile profile, int label);

// Graph for one pen-stroke sample (no order recovery needed).
TrajectoryGraph build_online_sample(const StrokeSample& sample, Profile profile);

// Raster samples to a labeled graph dataset. Requires equally many images and
// labels (else ShapeMismatch). Processes the first `limit` samples when given.
// Degenerate samples are skipped and counted, not fatal. Work is split over
// `threads` workers; results are identical for any thread count.
PrepareResult build_offline_dataset(const std::vector<GrayImage>& images,
                                    const std::vector<int>& labels, std::optional<int> threshold,
                                    Profile profile, std::optional<std::size_t> limit,
                                    int threads);

// Stroke samples to a labeled graph dataset; same limit and skip semantics.
PrepareResult build_online_dataset(const std::vector<StrokeSample>& samples, Profile profile,
                                   std::optional<std::size_t> limit);

// Worker count for dataset preparation: the TGNN_THREADS environment variable
// when set to a positive integer, otherwise fallback (clamped to >= 1).
int preparation_threads(int fallback);

}  // namespace tgnn
