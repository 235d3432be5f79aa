#include "tgnn/graph.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tgnn {
namespace {

constexpr char kDatasetMagic[4] = {'T', 'G', 'D', 'S'};
constexpr std::uint32_t kDatasetVersion = 1;

// --- little-endian buffer IO -------------------------------------------------

struct ByteWriter {
  std::vector<std::uint8_t> bytes;

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
};

struct ByteReader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void require(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) {
      throw CorruptRecord(std::string("dataset: truncated while reading ") + what);
    }
  }
  std::size_t remaining() const { return bytes.size() - pos; }
  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos + i]} << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    require(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += 8;
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
};

void normalized_coordinate_range(const std::vector<Point>& pts, double& min_x, double& max_x,
                                 double& min_y, double& max_y) {
  min_x = min_y = std::numeric_limits<double>::infinity();
  max_x = max_y = -std::numeric_limits<double>::infinity();
  for (const Point& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
}

double normalize(double v, double lo, double hi) {
  return hi > lo ? (v - lo) / (hi - lo) : 0.5;
}

}  // namespace

TrajectoryGraph build_graph(const ChainCode& codes, const Trajectory& resampled, int label) {
  const std::size_t n = resampled.points.size();
  if (codes.codes.size() + 1 != n) {
    throw LengthMismatch("build_graph: " + std::to_string(codes.codes.size()) + " codes need " +
                         std::to_string(codes.codes.size() + 1) + " points, got " +
                         std::to_string(n));
  }
  if (label < 0) throw LabelOutOfRange("build_graph: negative label " + std::to_string(label));

  double min_x, max_x, min_y, max_y;
  normalized_coordinate_range(resampled.points, min_x, max_x, min_y, max_y);

  TrajectoryGraph graph;
  graph.label = label;
  graph.node_features = Matrix::Zero(static_cast<Eigen::Index>(n), kNodeFeatureWidth);
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n) {
      const int code = codes.codes[i];
      if (code < 0 || code > 7) {
        throw std::invalid_argument("build_graph: code " + std::to_string(code) +
                                    " outside [0, 8)");
      }
      graph.node_features(static_cast<Eigen::Index>(i), code) = 1.0;
    }
    graph.node_features(static_cast<Eigen::Index>(i), 8) =
        normalize(resampled.points[i].x, min_x, max_x);
    graph.node_features(static_cast<Eigen::Index>(i), 9) =
        normalize(resampled.points[i].y, min_y, max_y);
  }
  graph.edges.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    graph.edges.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i + 1));
  }
  return graph;
}

GraphStats graph_stats(const TrajectoryGraph& graph) {
  GraphStats stats;
  stats.degree.assign(static_cast<std::size_t>(graph.num_nodes()), 0);
  for (const auto& [a, b] : graph.edges) {
    if (a < 0 || a >= graph.num_nodes() || b < 0 || b >= graph.num_nodes()) {
      throw OutOfBounds("graph_stats: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") outside " + std::to_string(graph.num_nodes()) + " nodes");
    }
    ++stats.degree[static_cast<std::size_t>(a)];
    ++stats.degree[static_cast<std::size_t>(b)];
    if (a == b) ++stats.self_loops;
  }
  stats.isolated_nodes =
      static_cast<int>(std::count(stats.degree.begin(), stats.degree.end(), 0));
  return stats;
}

std::pair<GraphDataset, GraphDataset> split_shuffle(const GraphDataset& dataset,
                                                    double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_shuffle: train_fraction " +
                                std::to_string(train_fraction) + " outside (0, 1)");
  }
  if (dataset.graphs.empty()) throw EmptyDataset("split_shuffle: empty dataset");
  if (dataset.num_classes < 1) {
    throw ClassCountMismatch("split_shuffle: dataset declares " +
                             std::to_string(dataset.num_classes) + " classes");
  }

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
    const int label = dataset.graphs[i].label;
    if (label < 0 || label >= dataset.num_classes) {
      throw LabelOutOfRange("split_shuffle: label " + std::to_string(label) + " not in [0, " +
                            std::to_string(dataset.num_classes) + ")");
    }
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }

  GraphDataset train{{}, dataset.num_classes, dataset.profile};
  GraphDataset test{{}, dataset.num_classes, dataset.profile};
  std::mt19937_64 gen(seed);
  for (auto& indices : by_class) {
    fisher_yates_shuffle(indices, gen);
    const auto take =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(indices.size())));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      (k < take ? train : test).graphs.push_back(dataset.graphs[indices[k]]);
    }
  }
  return {std::move(train), std::move(test)};
}

BatchedGraph batch_graphs(std::span<const TrajectoryGraph> graphs) {
  if (graphs.empty()) throw EmptyBatch("batch_graphs: no graphs");
  const Eigen::Index width = graphs.front().node_features.cols();
  std::int64_t total_nodes = 0;
  std::size_t total_edges = 0;
  for (const TrajectoryGraph& g : graphs) {
    if (g.node_features.cols() != width) {
      throw FeatureWidthMismatch("batch_graphs: widths " + std::to_string(width) + " vs " +
                                 std::to_string(g.node_features.cols()));
    }
    total_nodes += g.num_nodes();
    total_edges += g.edges.size();
  }

  BatchedGraph batch;
  batch.node_features.resize(total_nodes, width);
  batch.edges.reserve(total_edges);
  batch.graph_id.reserve(static_cast<std::size_t>(total_nodes));
  batch.node_offset.reserve(graphs.size());
  batch.nodes_per_graph.reserve(graphs.size());
  batch.labels.reserve(graphs.size());

  std::int64_t offset = 0;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const TrajectoryGraph& g = graphs[gi];
    const std::int64_t n = g.num_nodes();
    batch.node_features.middleRows(offset, n) = g.node_features;
    for (const auto& [a, b] : g.edges) batch.edges.emplace_back(a + offset, b + offset);
    batch.graph_id.insert(batch.graph_id.end(), static_cast<std::size_t>(n),
                          static_cast<std::int64_t>(gi));
    batch.node_offset.push_back(offset);
    batch.nodes_per_graph.push_back(n);
    batch.labels.push_back(g.label);
    offset += n;
  }
  return batch;
}

void save_dataset(const GraphDataset& dataset, const std::filesystem::path& path) {
  ByteWriter w;
  w.bytes.insert(w.bytes.end(), kDatasetMagic, kDatasetMagic + 4);
  w.u32(kDatasetVersion);
  w.u64(dataset.graphs.size());
  w.u32(static_cast<std::uint32_t>(dataset.num_classes));
  const std::uint32_t width = dataset.graphs.empty()
                                  ? kNodeFeatureWidth
                                  : static_cast<std::uint32_t>(dataset.graphs[0].node_features.cols());
  w.u32(width);
  for (const TrajectoryGraph& g : dataset.graphs) {
    w.u64(static_cast<std::uint64_t>(g.num_nodes()));
    for (Eigen::Index i = 0; i < g.node_features.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.node_features.cols(); ++j) w.f64(g.node_features(i, j));
    }
    w.u64(g.edges.size());
    for (const auto& [a, b] : g.edges) {
      w.u64(static_cast<std::uint64_t>(a));
      w.u64(static_cast<std::uint64_t>(b));
    }
    w.u64(static_cast<std::uint64_t>(g.label));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(w.bytes.data()),
            static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

GraphDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());

  ByteReader r{bytes};
  r.require(4, "magic");
  if (std::memcmp(bytes.data(), kDatasetMagic, 4) != 0) {
    throw BadMagic("dataset: bad magic in " + path.string());
  }
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kDatasetVersion) {
    throw FormatVersionMismatch("dataset: version " + std::to_string(version) + ", expected " +
                                std::to_string(kDatasetVersion));
  }
  const std::uint64_t count = r.u64("graph count");
  const std::uint32_t num_classes = r.u32("class count");
  const std::uint32_t width = r.u32("feature width");
  if (num_classes < 1 || width < 1) {
    throw CorruptRecord("dataset: invalid header (classes " + std::to_string(num_classes) +
                        ", width " + std::to_string(width) + ")");
  }

  GraphDataset dataset;
  dataset.num_classes = static_cast<int>(num_classes);
  dataset.graphs.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t gi = 0; gi < count; ++gi) {
    TrajectoryGraph g;
    const std::uint64_t nodes = r.u64("node count");
    if (nodes > r.remaining() / (8 * width)) {
      throw CorruptRecord("dataset: node count " + std::to_string(nodes) +
                          " exceeds remaining payload");
    }
    g.node_features.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(width));
    for (std::uint64_t i = 0; i < nodes; ++i) {
      for (std::uint32_t j = 0; j < width; ++j) {
        g.node_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            r.f64("node features");
      }
    }
    const std::uint64_t edge_count = r.u64("edge count");
    if (edge_count > r.remaining() / 16) {
      throw CorruptRecord("dataset: edge count " + std::to_string(edge_count) +
                          " exceeds remaining payload");
    }
    g.edges.reserve(static_cast<std::size_t>(edge_count));
    for (std::uint64_t e = 0; e < edge_count; ++e) {
      const std::uint64_t a = r.u64("edge endpoint");
      const std::uint64_t b = r.u64("edge endpoint");
      if (a >= nodes || b >= nodes) {
        throw CorruptRecord("dataset: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                            ") outside " + std::to_string(nodes) + " nodes");
      }
      g.edges.emplace_back(static_cast<std::int64_t>(a), static_cast<std::int64_t>(b));
    }
    const std::uint64_t label = r.u64("label");
    if (label >= num_classes) {
      throw LabelOutOfRange("dataset: label " + std::to_string(label) + " not in [0, " +
                            std::to_string(num_classes) + ")");
    }
    g.label = static_cast<int>(label);
    dataset.graphs.push_back(std::move(g));
  }

  const std::int64_t online_nodes = feature_length(Profile::online) + 1;
  const bool all_online =
      !dataset.graphs.empty() &&
      std::all_of(dataset.graphs.begin(), dataset.graphs.end(),
                  [&](const TrajectoryGraph& g) { return g.num_nodes() == online_nodes; });
  dataset.profile = all_online ? Profile::online : Profile::offline;
  return dataset;
}

std::string to_dot(const TrajectoryGraph& graph, const std::string& name) {
  std::ostringstream out;
  out << "graph " << name << " {\n";
  char buf[64];
  for (Eigen::Index i = 0; i < graph.num_nodes(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", graph.node_features(i, 8),
                  graph.node_features(i, 9));
    out << "  n" << i << " [pos=\"" << buf << "!\"];\n";
  }
  for (const auto& [a, b] : graph.edges) out << "  n" << a << " -- n" << b << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace tgnn
