#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgnn/chaincode.hpp"
#include "tgnn/numerics.hpp"

namespace tgnn {

// Node feature layout: 8 one-hot direction slots, then normalized x and y.
inline constexpr int kNodeFeatureWidth = 10;

// A labeled sample as a graph over resampled trajectory points.
struct TrajectoryGraph {
  Matrix node_features;  // num_nodes x kNodeFeatureWidth
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;  // undirected
  int label = 0;

  std::int64_t num_nodes() const { return node_features.rows(); }
};

struct GraphStats {
  std::vector<int> degree;  // per node; each undirected edge counts at both endpoints
  int isolated_nodes = 0;
  int self_loops = 0;
};

struct GraphDataset {
  std::vector<TrajectoryGraph> graphs;
  int num_classes = 0;
  Profile profile = Profile::offline;
};

// Disjoint union of several graphs: features stacked, edges reindexed into the
// union, one label per member graph.
struct BatchedGraph {
  Matrix node_features;  // total_nodes x F
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;   // union node ids
  std::vector<std::int64_t> graph_id;                         // per node
  std::vector<std::int64_t> node_offset;                      // per graph: first node id
  std::vector<std::int64_t> nodes_per_graph;                  // per graph
  std::vector<int> labels;                                    // per graph

  std::int64_t num_graphs() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t num_nodes() const { return node_features.rows(); }
};

// Builds the path graph over resampled points: node i carries the one-hot of
// its outgoing code (the last node's direction slots stay zero) plus its
// coordinates normalized to [0, 1] by the trajectory's bounding box (a
// degenerate axis maps to 0.5); edge (i, i+1) links consecutive points.
// Requires codes.size() + 1 == resampled.points.size() (else LengthMismatch)
// and label >= 0 (else LabelOutOfRange).
TrajectoryGraph build_graph(const ChainCode& codes, const Trajectory& resampled, int label);

GraphStats graph_stats(const TrajectoryGraph& graph);

// Deterministic stratified split: per class, indices are shuffled with one
// generator seeded by `seed` and the first round(train_fraction * class size)
// go to the train side. Requires train_fraction in (0, 1) and a non-empty
// dataset.
std::pair<GraphDataset, GraphDataset> split_shuffle(const GraphDataset& dataset,
                                                    double train_fraction, std::uint64_t seed);

// Disjoint union preserving graph order. Throws EmptyBatch on an empty span
// and FeatureWidthMismatch when member feature widths differ.
BatchedGraph batch_graphs(std::span<const TrajectoryGraph> graphs);

// Binary dataset container: magic "TGDS", format version 1, little-endian
// fixed-width fields, f64 features in node-major order.
void save_dataset(const GraphDataset& dataset, const std::filesystem::path& path);

// Loads a container written by save_dataset. Throws BadMagic,
// FormatVersionMismatch, CorruptRecord (truncation, bad counts, bad edge
// endpoints) or LabelOutOfRange. The profile is inferred from node counts
// (online node count when every graph has it, offline otherwise).
GraphDataset load_dataset(const std::filesystem::path& path);

// Graphviz rendering with one line per node (position = normalized coords)
// and one line per edge.
std::string to_dot(const TrajectoryGraph& graph, const std::string& name);

}  // namespace tgnn
