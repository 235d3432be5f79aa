#include "tgnn/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <thread>

namespace tgnn {
namespace {

bool is_degenerate_sample(const std::exception_ptr& err) {
  try {
    std::rethrow_exception(err);
  } catch (const DegenerateTrajectory&) {
    return true;
  } catch (const DegenerateSegment&) {
    return true;
  } catch (...) {
    return false;
  }
}

// Runs make(i) for i in [0, n) over `threads` workers, collecting each result
// or its exception by index, so the outcome is independent of scheduling.
template <typename Make>
PrepareResult collect_dataset(std::size_t n, int threads, Make make) {
  std::vector<std::optional<TrajectoryGraph>> results(n);
  std::vector<std::exception_ptr> errors(n);

  auto worker = [&](std::size_t first, std::size_t step) {
    for (std::size_t i = first; i < n; i += step) {
      try {
        results[i] = make(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const auto step = static_cast<std::size_t>(std::max(1, threads));
  if (step <= 1 || n <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(step);
    for (std::size_t t = 0; t < step; ++t) pool.emplace_back(worker, t, step);
    for (auto& th : pool) th.join();
  }

  PrepareResult out;
  out.dataset.num_classes = kNumClasses;
  out.stats.total = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      if (!is_degenerate_sample(errors[i])) std::rethrow_exception(errors[i]);
      ++out.stats.skipped;
      continue;
    }
    ++out.stats.kept;
    out.dataset.graphs.push_back(std::move(*results[i]));
  }
  return out;
}

}  // namespace

OfflineTrace trace_offline_sample(const GrayImage& img, std::optional<int> threshold,
                                  Profile profile, int label) {
  OfflineTrace trace;
  trace.binary = binarize(img, threshold.value_or(otsu_threshold(img)));
  trace.skeleton = thin(trace.binary);
  trace.paths = recover_order(trace.skeleton);
  trace.trajectory = to_trajectory(trace.paths, img.height);
  trace.resampled = resample(trace.trajectory, feature_length(profile) + 1);
  trace.codes = encode_directions(trace.resampled);
  trace.graph = build_graph(trace.codes, trace.resampled, label);
  return trace;
}

TrajectoryGraph build_online_sample(const StrokeSample& sample, Profile profile) {
  const Trajectory traj = to_trajectory(sample);
  const Trajectory resampled = resample(traj, feature_length(profile) + 1);
  return build_graph(encode_directions(resampled), resampled, sample.label);
}

PrepareResult build_offline_dataset(const std::vector<GrayImage>& images,
                                    const std::vector<int>& labels, std::optional<int> threshold,
                                    Profile profile, std::optional<std::size_t> limit,
                                    int threads) {
  if (images.size() != labels.size()) {
    throw ShapeMismatch("prepare: " + std::to_string(images.size()) + " images vs " +
                        std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = std::min(images.size(), limit.value_or(images.size()));
  auto result = collect_dataset(n, threads, [&](std::size_t i) {
    return trace_offline_sample(images[i], threshold, profile, labels[i]).graph;
  });
  result.dataset.profile = profile;
  return result;
}

PrepareResult build_online_dataset(const std::vector<StrokeSample>& samples, Profile profile,
                                   std::optional<std::size_t> limit) {
  const std::size_t n = std::min(samples.size(), limit.value_or(samples.size()));
  auto result = collect_dataset(n, 1, [&](std::size_t i) {
    return build_online_sample(samples[i], profile);
  });
  result.dataset.profile = profile;
  return result;
}

int preparation_threads(int fallback) {
  if (const char* env = std::getenv("TGNN_THREADS")) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), value);
    if (ec == std::errc{} && *ptr == '\0' && value >= 1) return value;
  }
  return std::max(1, fallback);
}

}  // namespace tgnn
