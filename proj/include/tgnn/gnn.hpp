#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "tgnn/graph.hpp"
#include "tgnn/numerics.hpp"

namespace tgnn {

inline constexpr int kHiddenChannels = 16;

// One graph-convolution layer: right-multiplies propagated node features.
struct GcnLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 0.01;
  std::uint64_t seed = 17;
  bool shuffle_each_epoch = true;
};

struct EpochMetrics {
  int epoch = 0;             // 1-based
  double loss = 0.0;         // mean cross entropy over the training set
  double train_accuracy = 0.0;  // fraction in [0, 1]
  double test_error = std::numeric_limits<double>::quiet_NaN();  // fraction; NaN without eval set
};

struct GnnGradients {
  Matrix w1, b1, w2, b2, w3, b3;
};

// Intermediate activations of one forward pass, consumed by backward().
// params_version ties the cache to the parameter values it was computed with.
struct ForwardCache {
  std::uint64_t params_version = 0;
  std::vector<Matrix> blocks;               // per-graph symmetric propagation matrix
  std::vector<std::int64_t> node_offset;    // per graph
  std::vector<std::int64_t> nodes_per_graph;
  Matrix m0;  // propagated input
  Matrix z1;  // pre-activation, layer 1
  Matrix m1;  // propagated relu(z1)
  Matrix z2;  // pre-activation, layer 2
  Matrix m2;  // propagated relu(z2)
};

struct ForwardResult {
  Matrix logits;  // num_graphs x num_classes
  ForwardCache cache;
};

// Three-layer graph convolution over batched path graphs with mean pooling:
//   H_k+1 = relu(S H_k W + b) (last layer without relu),
//   logits(g) = mean of the final rows of graph g,
// where S is the degree-normalized adjacency with self loops.
class GnnModel {
 public:
  GnnModel() = default;

  // Glorot-uniform weights (zero biases) drawn from an explicit mt19937_64 so
  // initialization is identical across platforms.
  static GnnModel init(int in_features, int num_classes, std::uint64_t seed);

  int in_features() const { return static_cast<int>(layers_[0].weight.rows()); }
  int hidden_channels() const { return static_cast<int>(layers_[0].weight.cols()); }
  int num_classes() const { return static_cast<int>(layers_[2].weight.cols()); }

  const GcnLayer& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }
  // Mutable parameter access; bumps the version so outstanding caches go stale.
  GcnLayer& layer_mut(int i) {
    ++version_;
    return layers_[static_cast<std::size_t>(i)];
  }
  std::uint64_t version() const { return version_; }

  ForwardResult forward(const BatchedGraph& batch) const;

  // Gradients of the scalar loss whose d loss / d logits is logit_grad.
  // Throws StaleCache if parameters changed since the cache was produced.
  GnnGradients backward(const ForwardCache& cache, const Matrix& logit_grad) const;

 private:
  friend GnnModel load_model(const std::filesystem::path& path);

  std::array<GcnLayer, 3> layers_{};
  std::uint64_t version_ = 0;
};

// Dense symmetric propagation matrix of the whole batch: adjacency plus self
// loops, scaled by inverse square-root degrees on both sides. Block-diagonal
// by construction, one block per member graph.
Matrix normalized_adjacency(const BatchedGraph& batch);

// Mini-batch Adam training; batch order is a pure function of (seed, epoch).
// When eval_set is given, each epoch's metrics include its error rate.
std::vector<EpochMetrics> train(GnnModel& model, const GraphDataset& train_set,
                                const TrainConfig& config,
                                const GraphDataset* eval_set = nullptr);

struct Evaluation {
  double error_rate = 0.0;   // fraction in [0, 1]
  Eigen::MatrixXi confusion; // rows = true class, cols = predicted class
};

Evaluation evaluate(const GnnModel& model, const GraphDataset& dataset);

// Predicted class per graph, in dataset order. Argmax ties resolve to the
// smallest class index.
std::vector<int> predict(const GnnModel& model, const GraphDataset& dataset);

// Binary model container: magic "TGNN", format version 1, little-endian
// shape header, f64 parameter arrays in row-major order.
void save_model(const GnnModel& model, const std::filesystem::path& path);
GnnModel load_model(const std::filesystem::path& path);

}  // namespace tgnn
