#include "tgnn/gnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tgnn {
namespace {

constexpr char kModelMagic[4] = {'T', 'G', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

// Per-graph propagation matrices S = D^-1/2 (A + I) D^-1/2 for the batch.
std::vector<Matrix> propagation_blocks(const BatchedGraph& batch) {
  const std::size_t num_graphs = static_cast<std::size_t>(batch.num_graphs());
  std::vector<Matrix> blocks(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    const auto n = static_cast<Eigen::Index>(batch.nodes_per_graph[g]);
    blocks[g] = Matrix::Identity(n, n);
  }
  for (const auto& [a, b] : batch.edges) {
    if (a < 0 || a >= batch.num_nodes() || b < 0 || b >= batch.num_nodes()) {
      throw OutOfBounds("propagation: edge endpoint outside batch");
    }
    const std::int64_t g = batch.graph_id[static_cast<std::size_t>(a)];
    if (g != batch.graph_id[static_cast<std::size_t>(b)]) {
      throw OutOfBounds("propagation: edge crosses graph boundary");
    }
    const std::int64_t off = batch.node_offset[static_cast<std::size_t>(g)];
    auto& block = blocks[static_cast<std::size_t>(g)];
    block(a - off, b - off) = a == b ? 2.0 : 1.0;  // self loop on top of the identity
    block(b - off, a - off) = block(a - off, b - off);
  }
  for (auto& block : blocks) {
    const Eigen::VectorXd inv_sqrt_deg = block.rowwise().sum().array().rsqrt();
    block = inv_sqrt_deg.asDiagonal() * block * inv_sqrt_deg.asDiagonal();
  }
  return blocks;
}

// S x for block-diagonal S, applied one graph at a time.
Matrix apply_blocks(const std::vector<Matrix>& blocks,
                    const std::vector<std::int64_t>& node_offset,
                    const std::vector<std::int64_t>& nodes_per_graph, const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t g = 0; g < blocks.size(); ++g) {
    out.middleRows(node_offset[g], nodes_per_graph[g]) =
        blocks[g] * x.middleRows(node_offset[g], nodes_per_graph[g]);
  }
  return out;
}

int argmax_row(const Matrix& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = static_cast<int>(j);
  }
  return best;
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = uniform_double(gen, -limit, limit);
  }
  return w;
}

void check_class_count(const GnnModel& model, const GraphDataset& dataset, const char* what) {
  if (dataset.num_classes != model.num_classes()) {
    throw ClassCountMismatch(std::string(what) + ": dataset has " +
                             std::to_string(dataset.num_classes) + " classes, model has " +
                             std::to_string(model.num_classes()));
  }
}

void check_feature_width(const GnnModel& model, const GraphDataset& dataset, const char* what) {
  for (const TrajectoryGraph& g : dataset.graphs) {
    if (g.node_features.cols() != model.in_features()) {
      throw IncompatibleModel(std::string(what) + ": graph feature width " +
                              std::to_string(g.node_features.cols()) + ", model expects " +
                              std::to_string(model.in_features()));
    }
  }
}

BatchedGraph gather_batch(const GraphDataset& dataset, std::span<const std::size_t> indices) {
  std::vector<TrajectoryGraph> members;
  members.reserve(indices.size());
  for (std::size_t i : indices) members.push_back(dataset.graphs[i]);
  return batch_graphs(members);
}

}  // namespace

GnnModel GnnModel::init(int in_features, int num_classes, std::uint64_t seed) {
  if (in_features < 1 || num_classes < 1) {
    throw std::invalid_argument("GnnModel::init: need in_features >= 1 and num_classes >= 1");
  }
  std::mt19937_64 gen(seed);
  GnnModel model;
  model.layers_[0] = {glorot_uniform(in_features, kHiddenChannels, gen),
                      Matrix::Zero(1, kHiddenChannels)};
  model.layers_[1] = {glorot_uniform(kHiddenChannels, kHiddenChannels, gen),
                      Matrix::Zero(1, kHiddenChannels)};
  model.layers_[2] = {glorot_uniform(kHiddenChannels, num_classes, gen),
                      Matrix::Zero(1, num_classes)};
  return model;
}

ForwardResult GnnModel::forward(const BatchedGraph& batch) const {
  if (batch.num_graphs() == 0) throw EmptyBatch("forward: batch has no graphs");
  if (batch.node_features.cols() != in_features()) {
    throw FeatureWidthMismatch("forward: batch feature width " +
                               std::to_string(batch.node_features.cols()) + ", model expects " +
                               std::to_string(in_features()));
  }
  for (std::int64_t n : batch.nodes_per_graph) {
    if (n == 0) throw EmptyBatch("forward: batch contains an empty graph");
  }

  ForwardResult result;
  ForwardCache& c = result.cache;
  c.params_version = version_;
  c.blocks = propagation_blocks(batch);
  c.node_offset = batch.node_offset;
  c.nodes_per_graph = batch.nodes_per_graph;

  c.m0 = apply_blocks(c.blocks, c.node_offset, c.nodes_per_graph, batch.node_features);
  c.z1 = matmul(c.m0, layers_[0].weight);
  c.z1.rowwise() += layers_[0].bias.row(0);
  Matrix h1 = relu(c.z1);
  c.m1 = apply_blocks(c.blocks, c.node_offset, c.nodes_per_graph, h1);
  c.z2 = matmul(c.m1, layers_[1].weight);
  c.z2.rowwise() += layers_[1].bias.row(0);
  Matrix h2 = relu(c.z2);
  c.m2 = apply_blocks(c.blocks, c.node_offset, c.nodes_per_graph, h2);
  Matrix h3 = matmul(c.m2, layers_[2].weight);
  h3.rowwise() += layers_[2].bias.row(0);

  result.logits.resize(batch.num_graphs(), num_classes());
  for (std::int64_t g = 0; g < batch.num_graphs(); ++g) {
    result.logits.row(g) =
        h3.middleRows(c.node_offset[static_cast<std::size_t>(g)],
                      c.nodes_per_graph[static_cast<std::size_t>(g)])
            .colwise()
            .mean();
  }
  return result;
}

GnnGradients GnnModel::backward(const ForwardCache& cache, const Matrix& logit_grad) const {
  if (cache.params_version != version_) {
    throw StaleCache("backward: parameters changed since forward (cache version " +
                     std::to_string(cache.params_version) + ", model version " +
                     std::to_string(version_) + ")");
  }
  const auto num_graphs = static_cast<std::int64_t>(cache.nodes_per_graph.size());
  if (logit_grad.rows() != num_graphs || logit_grad.cols() != num_classes()) {
    throw ShapeMismatch("backward: logit gradient " + std::to_string(logit_grad.rows()) + "x" +
                        std::to_string(logit_grad.cols()) + ", expected " +
                        std::to_string(num_graphs) + "x" + std::to_string(num_classes()));
  }

  // Mean pooling spreads each graph's logit gradient evenly over its rows.
  Matrix dh3(cache.m2.rows(), num_classes());
  for (std::int64_t g = 0; g < num_graphs; ++g) {
    const auto off = cache.node_offset[static_cast<std::size_t>(g)];
    const auto n = cache.nodes_per_graph[static_cast<std::size_t>(g)];
    dh3.middleRows(off, n) =
        (logit_grad.row(g) / static_cast<double>(n)).replicate(n, 1);
  }

  GnnGradients grads;
  grads.w3 = matmul(cache.m2.transpose(), dh3);
  grads.b3 = dh3.colwise().sum();
  Matrix dh2 = apply_blocks(cache.blocks, cache.node_offset, cache.nodes_per_graph,
                            matmul(dh3, layers_[2].weight.transpose()));
  Matrix dz2 = relu_backward(cache.z2, dh2);
  grads.w2 = matmul(cache.m1.transpose(), dz2);
  grads.b2 = dz2.colwise().sum();
  Matrix dh1 = apply_blocks(cache.blocks, cache.node_offset, cache.nodes_per_graph,
                            matmul(dz2, layers_[1].weight.transpose()));
  Matrix dz1 = relu_backward(cache.z1, dh1);
  grads.w1 = matmul(cache.m0.transpose(), dz1);
  grads.b1 = dz1.colwise().sum();
  return grads;
}

Matrix normalized_adjacency(const BatchedGraph& batch) {
  const auto blocks = propagation_blocks(batch);
  Matrix s = Matrix::Zero(batch.num_nodes(), batch.num_nodes());
  for (std::size_t g = 0; g < blocks.size(); ++g) {
    const auto off = batch.node_offset[g];
    const auto n = batch.nodes_per_graph[g];
    s.block(off, off, n, n) = blocks[g];
  }
  return s;
}

std::vector<EpochMetrics> train(GnnModel& model, const GraphDataset& train_set,
                                const TrainConfig& config, const GraphDataset* eval_set) {
  if (train_set.graphs.empty()) throw EmptyDataset("train: empty training set");
  check_class_count(model, train_set, "train");
  check_feature_width(model, train_set, "train");
  if (eval_set != nullptr) {
    check_class_count(model, *eval_set, "train: eval set");
    check_feature_width(model, *eval_set, "train: eval set");
  }
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");

  const std::size_t n = train_set.graphs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::array<AdamState, 6> opt = {
      AdamState(model.layer(0).weight.rows(), model.layer(0).weight.cols(), config.lr),
      AdamState(1, model.layer(0).bias.cols(), config.lr),
      AdamState(model.layer(1).weight.rows(), model.layer(1).weight.cols(), config.lr),
      AdamState(1, model.layer(1).bias.cols(), config.lr),
      AdamState(model.layer(2).weight.rows(), model.layer(2).weight.cols(), config.lr),
      AdamState(1, model.layer(2).bias.cols(), config.lr),
  };

  std::vector<EpochMetrics> metrics;
  metrics.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle_each_epoch) {
      std::mt19937_64 gen(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
      fisher_yates_shuffle(order, gen);
    }

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(config.batch_size), n - start);
      const BatchedGraph batch = gather_batch(train_set, {order.data() + start, len});
      const ForwardResult fwd = model.forward(batch);
      const SoftmaxCrossEntropy sce = softmax_cross_entropy(fwd.logits, batch.labels);
      loss_sum += sce.loss * static_cast<double>(len);
      for (Eigen::Index g = 0; g < fwd.logits.rows(); ++g) {
        correct += argmax_row(fwd.logits, g) == batch.labels[static_cast<std::size_t>(g)];
      }

      const GnnGradients grads = model.backward(fwd.cache, sce.grad);
      adam_step(model.layer_mut(0).weight, grads.w1, opt[0]);
      adam_step(model.layer_mut(0).bias, grads.b1, opt[1]);
      adam_step(model.layer_mut(1).weight, grads.w2, opt[2]);
      adam_step(model.layer_mut(1).bias, grads.b2, opt[3]);
      adam_step(model.layer_mut(2).weight, grads.w3, opt[4]);
      adam_step(model.layer_mut(2).bias, grads.b3, opt[5]);
    }

    EpochMetrics em;
    em.epoch = epoch + 1;
    em.loss = loss_sum / static_cast<double>(n);
    em.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    if (eval_set != nullptr) em.test_error = evaluate(model, *eval_set).error_rate;
    metrics.push_back(em);
  }
  return metrics;
}

Evaluation evaluate(const GnnModel& model, const GraphDataset& dataset) {
  if (dataset.graphs.empty()) throw EmptyDataset("evaluate: empty dataset");
  check_class_count(model, dataset, "evaluate");
  check_feature_width(model, dataset, "evaluate");

  Evaluation eval;
  eval.confusion = Eigen::MatrixXi::Zero(model.num_classes(), model.num_classes());
  std::size_t correct = 0;
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < dataset.graphs.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, dataset.graphs.size() - start);
    indices.resize(len);
    for (std::size_t i = 0; i < len; ++i) indices[i] = start + i;
    const BatchedGraph batch = gather_batch(dataset, indices);
    const ForwardResult fwd = model.forward(batch);
    for (Eigen::Index g = 0; g < fwd.logits.rows(); ++g) {
      const int truth = batch.labels[static_cast<std::size_t>(g)];
      if (truth < 0 || truth >= model.num_classes()) {
        throw LabelOutOfRange("evaluate: label " + std::to_string(truth) + " not in [0, " +
                              std::to_string(model.num_classes()) + ")");
      }
      const int guess = argmax_row(fwd.logits, g);
      ++eval.confusion(truth, guess);
      correct += guess == truth;
    }
  }
  eval.error_rate =
      1.0 - static_cast<double>(correct) / static_cast<double>(dataset.graphs.size());
  return eval;
}

std::vector<int> predict(const GnnModel& model, const GraphDataset& dataset) {
  if (dataset.graphs.empty()) throw EmptyDataset("predict: empty dataset");
  check_feature_width(model, dataset, "predict");

  std::vector<int> out;
  out.reserve(dataset.graphs.size());
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < dataset.graphs.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, dataset.graphs.size() - start);
    indices.resize(len);
    for (std::size_t i = 0; i < len; ++i) indices[i] = start + i;
    const BatchedGraph batch = gather_batch(dataset, indices);
    const ForwardResult fwd = model.forward(batch);
    for (Eigen::Index g = 0; g < fwd.logits.rows(); ++g) out.push_back(argmax_row(fwd.logits, g));
  }
  return out;
}

namespace {

void write_matrix(std::vector<std::uint8_t>& bytes, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto v = std::bit_cast<std::uint64_t>(m(i, j));
      for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
    }
  }
}

void push_u32(std::vector<std::uint8_t>& bytes, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t pull_u32(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) throw CorruptRecord("model: truncated header");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{bytes[pos + b]} << (8 * b);
  pos += 4;
  return v;
}

Matrix pull_matrix(const std::vector<std::uint8_t>& bytes, std::size_t& pos, Eigen::Index rows,
                   Eigen::Index cols) {
  const std::size_t need = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 8;
  if (bytes.size() - pos < need) throw CorruptRecord("model: truncated parameter array");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v |= std::uint64_t{bytes[pos + b]} << (8 * b);
      pos += 8;
      m(i, j) = std::bit_cast<double>(v);
    }
  }
  return m;
}

}  // namespace

void save_model(const GnnModel& model, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  bytes.insert(bytes.end(), kModelMagic, kModelMagic + 4);
  push_u32(bytes, kModelVersion);
  push_u32(bytes, static_cast<std::uint32_t>(model.in_features()));
  push_u32(bytes, static_cast<std::uint32_t>(model.hidden_channels()));
  push_u32(bytes, static_cast<std::uint32_t>(model.num_classes()));
  for (int i = 0; i < 3; ++i) {
    write_matrix(bytes, model.layer(i).weight);
    write_matrix(bytes, model.layer(i).bias);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

GnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw BadMagic("model: bad magic in " + path.string());
  }
  std::size_t pos = 4;
  const std::uint32_t version = pull_u32(bytes, pos);
  if (version != kModelVersion) {
    throw FormatVersionMismatch("model: version " + std::to_string(version) + ", expected " +
                                std::to_string(kModelVersion));
  }
  const std::uint32_t in_features = pull_u32(bytes, pos);
  const std::uint32_t hidden = pull_u32(bytes, pos);
  const std::uint32_t classes = pull_u32(bytes, pos);
  if (in_features < 1 || hidden < 1 || classes < 1) {
    throw IncompatibleModel("model: invalid shape header (" + std::to_string(in_features) + ", " +
                            std::to_string(hidden) + ", " + std::to_string(classes) + ")");
  }

  GnnModel model;
  const Eigen::Index f = in_features, h = hidden, c = classes;
  model.layers_[0] = {pull_matrix(bytes, pos, f, h), pull_matrix(bytes, pos, 1, h)};
  model.layers_[1] = {pull_matrix(bytes, pos, h, h), pull_matrix(bytes, pos, 1, h)};
  model.layers_[2] = {pull_matrix(bytes, pos, h, c), pull_matrix(bytes, pos, 1, c)};
  if (pos != bytes.size()) throw CorruptRecord("model: trailing bytes after parameters");
  return model;
}

}  // namespace tgnn
