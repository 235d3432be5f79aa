#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "tgnn/gnn.hpp"

using tgnn::BatchedGraph;
using tgnn::ChainCode;
using tgnn::GnnModel;
using tgnn::GraphDataset;
using tgnn::Matrix;
using tgnn::Trajectory;
using tgnn::TrajectoryGraph;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "tgnn_gnn_test";
  fs::create_directories(dir);
  return dir;
}

TrajectoryGraph random_graph(std::mt19937_64& gen, int max_nodes = 8, int num_classes = 3) {
  const int n = 1 + static_cast<int>(gen() % static_cast<std::uint64_t>(max_nodes));
  ChainCode codes;
  Trajectory traj;
  traj.points.push_back({tgnn::uniform_double(gen), tgnn::uniform_double(gen)});
  for (int i = 0; i + 1 < n; ++i) {
    codes.codes.push_back(static_cast<int>(gen() % 8));
    traj.points.push_back({tgnn::uniform_double(gen, -2.0, 2.0),
                           tgnn::uniform_double(gen, -2.0, 2.0)});
  }
  return tgnn::build_graph(codes, traj, static_cast<int>(gen() % static_cast<std::uint64_t>(num_classes)));
}

std::vector<TrajectoryGraph> random_graphs(std::mt19937_64& gen, int count, int max_nodes = 8,
                                           int num_classes = 3) {
  std::vector<TrajectoryGraph> graphs;
  for (int i = 0; i < count; ++i) graphs.push_back(random_graph(gen, max_nodes, num_classes));
  return graphs;
}

// --- independent reference implementations (plain loops) ---------------------

Matrix naive_normalized(const BatchedGraph& batch) {
  const auto n = batch.num_nodes();
  Matrix a = Matrix::Zero(n, n);
  for (const auto& [u, v] : batch.edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) a(i, i) += 1.0;  // self loops
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) degree[static_cast<std::size_t>(i)] += a(i, j);
  }
  Matrix s = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      s(i, j) = a(i, j) / std::sqrt(degree[static_cast<std::size_t>(i)] *
                                    degree[static_cast<std::size_t>(j)]);
    }
  }
  return s;
}

Matrix naive_mm(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    }
  }
  return c;
}

Matrix naive_layer(const Matrix& s, const Matrix& h, const tgnn::GcnLayer& layer, bool relu) {
  Matrix z = naive_mm(naive_mm(s, h), layer.weight);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      z(i, j) += layer.bias(0, j);
      if (relu && z(i, j) < 0.0) z(i, j) = 0.0;
    }
  }
  return z;
}

Matrix naive_logits(const GnnModel& model, const BatchedGraph& batch) {
  const Matrix s = naive_normalized(batch);
  Matrix h = batch.node_features;
  h = naive_layer(s, h, model.layer(0), true);
  h = naive_layer(s, h, model.layer(1), true);
  h = naive_layer(s, h, model.layer(2), false);
  Matrix logits = Matrix::Zero(batch.num_graphs(), h.cols());
  for (std::int64_t g = 0; g < batch.num_graphs(); ++g) {
    const auto off = batch.node_offset[static_cast<std::size_t>(g)];
    const auto n = batch.nodes_per_graph[static_cast<std::size_t>(g)];
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      double sum = 0.0;
      for (std::int64_t i = 0; i < n; ++i) sum += h(off + i, j);
      logits(g, j) = sum / static_cast<double>(n);
    }
  }
  return logits;
}

double batch_loss(const GnnModel& model, const BatchedGraph& batch) {
  const auto fwd = model.forward(batch);
  return tgnn::softmax_cross_entropy(fwd.logits, batch.labels).loss;
}

}  // namespace

TEST_CASE("normalized adjacency of a single edge is the half matrix") {
  std::mt19937_64 gen(1);
  ChainCode codes{{0}};
  Trajectory traj;
  traj.points = {{0.0, 0.0}, {1.0, 0.0}};
  const auto batch = tgnn::batch_graphs(std::vector{tgnn::build_graph(codes, traj, 0)});
  const Matrix s = tgnn::normalized_adjacency(batch);
  REQUIRE(s.rows() == 2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(s(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("normalized adjacency of a three-node path has the derived entries") {
  ChainCode codes{{0, 0}};
  Trajectory traj;
  traj.points = {{0, 0}, {1, 0}, {2, 0}};
  const auto batch = tgnn::batch_graphs(std::vector{tgnn::build_graph(codes, traj, 0)});
  const Matrix s = tgnn::normalized_adjacency(batch);
  REQUIRE(s.rows() == 3);
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s(2, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(s(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(s(0, 2) == 0.0);
  CHECK(s(2, 0) == 0.0);
}

TEST_CASE("normalized adjacency matches the from-scratch construction") {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 30; ++trial) {
    const auto graphs = random_graphs(gen, 1 + static_cast<int>(gen() % 4));
    const auto batch = tgnn::batch_graphs(graphs);
    const Matrix got = tgnn::normalized_adjacency(batch);
    const Matrix want = naive_normalized(batch);
    CAPTURE(trial);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
    // Rows and columns sum symmetrically: S is symmetric by construction.
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward matches the naive loop implementation") {
  std::mt19937_64 gen(7);
  const GnnModel model = GnnModel::init(10, 3, 99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto batch = tgnn::batch_graphs(random_graphs(gen, 1 + static_cast<int>(gen() % 5)));
    const auto fwd = model.forward(batch);
    const Matrix want = naive_logits(model, batch);
    CAPTURE(trial);
    REQUIRE(fwd.logits.rows() == want.rows());
    CHECK((fwd.logits - want).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("logits are invariant to node relabeling within a graph") {
  std::mt19937_64 gen(17);
  const GnnModel model = GnnModel::init(10, 3, 5);
  for (int trial = 0; trial < 25; ++trial) {
    const TrajectoryGraph g = random_graph(gen);
    const auto n = g.num_nodes();

    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    tgnn::fisher_yates_shuffle(perm, gen);

    TrajectoryGraph h;
    h.label = g.label;
    h.node_features.resize(n, g.node_features.cols());
    for (std::int64_t i = 0; i < n; ++i) {
      h.node_features.row(perm[static_cast<std::size_t>(i)]) = g.node_features.row(i);
    }
    for (const auto& [a, b] : g.edges) {
      h.edges.emplace_back(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
    }

    const auto base = model.forward(tgnn::batch_graphs(std::vector{g}));
    const auto permuted = model.forward(tgnn::batch_graphs(std::vector{h}));
    CAPTURE(trial);
    CHECK((base.logits - permuted.logits).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("batched loss equals the mean of single-graph losses") {
  std::mt19937_64 gen(29);
  const GnnModel model = GnnModel::init(10, 3, 55);
  for (int trial = 0; trial < 10; ++trial) {
    const auto graphs = random_graphs(gen, 2 + static_cast<int>(gen() % 6));
    const double batched = batch_loss(model, tgnn::batch_graphs(graphs));
    double mean = 0.0;
    for (const auto& g : graphs) {
      mean += batch_loss(model, tgnn::batch_graphs(std::vector{g}));
    }
    mean /= static_cast<double>(graphs.size());
    CAPTURE(trial);
    CHECK(std::abs(batched - mean) < 1e-9);
  }
}

TEST_CASE("analytic gradients agree with central finite differences") {
  std::mt19937_64 gen(61);
  GnnModel model = GnnModel::init(10, 3, 13);
  const auto batch = tgnn::batch_graphs(random_graphs(gen, 5));

  // relu makes the loss piecewise smooth; the comparison below is only valid
  // when no pre-activation sits within the h=1e-5 step of a kink. This seed
  // satisfies that; a failure here means pick another seed, not a tolerance.
  {
    const auto probe = model.forward(batch);
    REQUIRE(probe.cache.z1.cwiseAbs().minCoeff() > 1e-4);
    REQUIRE(probe.cache.z2.cwiseAbs().minCoeff() > 1e-4);
  }

  const auto fwd = model.forward(batch);
  const auto sce = tgnn::softmax_cross_entropy(fwd.logits, batch.labels);
  const auto grads = model.backward(fwd.cache, sce.grad);
  const Matrix* analytic[6] = {&grads.w1, &grads.b1, &grads.w2, &grads.b2, &grads.w3, &grads.b3};

  const double h = 1e-5;
  double worst = 0.0;
  for (int p = 0; p < 6; ++p) {
    const int layer = p / 2;
    const bool is_weight = p % 2 == 0;
    Matrix& param = is_weight ? model.layer_mut(layer).weight : model.layer_mut(layer).bias;
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      for (Eigen::Index j = 0; j < param.cols(); ++j) {
        const double saved = param(i, j);
        param(i, j) = saved + h;
        const double up = batch_loss(model, batch);
        param(i, j) = saved - h;
        const double down = batch_loss(model, batch);
        param(i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        const double a = (*analytic[p])(i, j);
        const double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("backward refuses a cache from older parameters") {
  std::mt19937_64 gen(3);
  GnnModel model = GnnModel::init(10, 3, 2);
  const auto batch = tgnn::batch_graphs(random_graphs(gen, 3));
  const auto fwd = model.forward(batch);
  model.layer_mut(0).weight(0, 0) += 0.5;  // any parameter change invalidates
  CHECK_THROWS_AS(model.backward(fwd.cache, Matrix::Zero(3, 3)), tgnn::StaleCache);
}

TEST_CASE("forward validates batch shape and content") {
  std::mt19937_64 gen(9);
  const GnnModel model = GnnModel::init(10, 3, 1);
  auto graphs = random_graphs(gen, 2);
  graphs[0].node_features = Matrix::Zero(graphs[0].num_nodes(), 7);
  CHECK_THROWS_AS(model.forward(tgnn::batch_graphs(std::vector{graphs[0]})),
                  tgnn::FeatureWidthMismatch);
  CHECK_THROWS_AS(model.forward(BatchedGraph{}), tgnn::EmptyBatch);
}

TEST_CASE("initialization is deterministic with bounded weights and zero biases") {
  const GnnModel a = GnnModel::init(10, 4, 77);
  const GnnModel b = GnnModel::init(10, 4, 77);
  const GnnModel c = GnnModel::init(10, 4, 78);
  CHECK(a.layer(0).weight == b.layer(0).weight);
  CHECK(a.layer(2).weight == b.layer(2).weight);
  CHECK(a.layer(0).weight != c.layer(0).weight);
  CHECK(a.hidden_channels() == tgnn::kHiddenChannels);

  for (int l = 0; l < 3; ++l) {
    const auto& layer = a.layer(l);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    CHECK(layer.weight.cwiseAbs().maxCoeff() < limit);
    CHECK(layer.bias.cwiseAbs().maxCoeff() == 0.0);
    CHECK(layer.bias.rows() == 1);
  }
  CHECK_THROWS_AS(GnnModel::init(0, 3, 1), std::invalid_argument);
}

TEST_CASE("training drives a tiny dataset to full accuracy deterministically") {
  std::mt19937_64 gen(101);
  GraphDataset ds;
  ds.num_classes = 3;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 2; ++i) {
      TrajectoryGraph g = random_graph(gen, 8, 3);
      g.label = c;
      ds.graphs.push_back(std::move(g));
    }
  }

  tgnn::TrainConfig config;
  config.epochs = 120;
  config.batch_size = 3;
  config.seed = 17;

  GnnModel m1 = GnnModel::init(10, 3, config.seed);
  const auto metrics1 = tgnn::train(m1, ds, config);
  REQUIRE(metrics1.size() == 120);
  CHECK(metrics1.back().train_accuracy == 1.0);
  CHECK(metrics1.back().loss < metrics1.front().loss);
  CHECK(std::isnan(metrics1.back().test_error));
  CHECK(metrics1.front().epoch == 1);
  CHECK(metrics1.back().epoch == 120);

  GnnModel m2 = GnnModel::init(10, 3, config.seed);
  const auto metrics2 = tgnn::train(m2, ds, config);
  for (int l = 0; l < 3; ++l) {
    CHECK(m1.layer(l).weight == m2.layer(l).weight);  // bitwise reproducible
    CHECK(m1.layer(l).bias == m2.layer(l).bias);
  }
  REQUIRE(metrics2.size() == metrics1.size());
  for (std::size_t i = 0; i < metrics1.size(); ++i) {
    CHECK(metrics1[i].loss == metrics2[i].loss);
    CHECK(metrics1[i].train_accuracy == metrics2[i].train_accuracy);
  }
}

TEST_CASE("train validates configuration and dataset compatibility") {
  std::mt19937_64 gen(55);
  GraphDataset ds;
  ds.num_classes = 3;
  ds.graphs = random_graphs(gen, 4);
  GnnModel model = GnnModel::init(10, 3, 1);

  tgnn::TrainConfig config;
  config.epochs = 0;
  CHECK_THROWS_AS(tgnn::train(model, ds, config), std::invalid_argument);
  config.epochs = 1;
  config.batch_size = 0;
  CHECK_THROWS_AS(tgnn::train(model, ds, config), std::invalid_argument);
  config.batch_size = 2;
  config.lr = 0.0;
  CHECK_THROWS_AS(tgnn::train(model, ds, config), std::invalid_argument);
  config.lr = 0.01;

  CHECK_THROWS_AS(tgnn::train(model, GraphDataset{{}, 3}, config), tgnn::EmptyDataset);
  GraphDataset wrong = ds;
  wrong.num_classes = 5;
  CHECK_THROWS_AS(tgnn::train(model, wrong, config), tgnn::ClassCountMismatch);
}

TEST_CASE("evaluate fills a consistent confusion matrix") {
  std::mt19937_64 gen(202);
  GraphDataset ds;
  ds.num_classes = 3;
  ds.graphs = random_graphs(gen, 300, 8, 3);
  const GnnModel model = GnnModel::init(10, 3, 4);

  const auto eval = tgnn::evaluate(model, ds);
  CHECK(eval.confusion.rows() == 3);
  CHECK(eval.confusion.cols() == 3);
  CHECK(eval.confusion.sum() == 300);
  CHECK(eval.confusion.minCoeff() >= 0);
  const double correct = eval.confusion.diagonal().sum();
  CHECK(eval.error_rate == doctest::Approx(1.0 - correct / 300.0).epsilon(1e-12));

  // Row sums count the true labels.
  std::vector<int> per_class(3, 0);
  for (const auto& g : ds.graphs) ++per_class[static_cast<std::size_t>(g.label)];
  for (int c = 0; c < 3; ++c) CHECK(eval.confusion.row(c).sum() == per_class[static_cast<std::size_t>(c)]);

  CHECK_THROWS_AS(tgnn::evaluate(model, GraphDataset{{}, 3}), tgnn::EmptyDataset);
}

TEST_CASE("predict returns the argmax class of each graph") {
  std::mt19937_64 gen(303);
  GraphDataset ds;
  ds.num_classes = 3;
  ds.graphs = random_graphs(gen, 40, 8, 3);
  const GnnModel model = GnnModel::init(10, 3, 6);

  const auto classes = tgnn::predict(model, ds);
  REQUIRE(classes.size() == ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const auto fwd = model.forward(tgnn::batch_graphs(std::vector{ds.graphs[i]}));
    int want = 0;
    for (Eigen::Index j = 1; j < fwd.logits.cols(); ++j) {
      if (fwd.logits(0, j) > fwd.logits(0, want)) want = static_cast<int>(j);
    }
    CHECK(classes[i] == want);
  }
}

TEST_CASE("models round-trip bit-exactly through the binary container") {
  const auto dir = temp_dir();
  std::mt19937_64 gen(404);
  GraphDataset ds;
  ds.num_classes = 3;
  ds.graphs = random_graphs(gen, 6);
  GnnModel model = GnnModel::init(10, 3, 123);
  tgnn::TrainConfig config;
  config.epochs = 3;
  config.batch_size = 2;
  tgnn::train(model, ds, config);  // give the parameters non-trivial values

  const auto path = dir / "model.bin";
  tgnn::save_model(model, path);
  const GnnModel back = tgnn::load_model(path);
  for (int l = 0; l < 3; ++l) {
    CHECK(back.layer(l).weight == model.layer(l).weight);
    CHECK(back.layer(l).bias == model.layer(l).bias);
  }

  // A loaded model computes identical logits.
  const auto batch = tgnn::batch_graphs(ds.graphs);
  CHECK(back.forward(batch).logits == model.forward(batch).logits);
}

TEST_CASE("the model loader rejects malformed containers") {
  const auto dir = temp_dir();
  const GnnModel model = GnnModel::init(10, 3, 9);
  const auto good = dir / "good_model.bin";
  tgnn::save_model(model, good);

  std::vector<char> bytes;
  {
    std::ifstream in(good, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  const auto rewrite = [&](const fs::path& p, const std::vector<char>& data) {
    std::ofstream(p, std::ios::binary).write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  SUBCASE("bad magic") {
    auto bad = bytes;
    bad[1] = 'X';
    const auto p = dir / "m_magic.bin";
    rewrite(p, bad);
    CHECK_THROWS_AS(tgnn::load_model(p), tgnn::BadMagic);
  }
  SUBCASE("unknown version") {
    auto bad = bytes;
    bad[4] = 3;
    const auto p = dir / "m_version.bin";
    rewrite(p, bad);
    CHECK_THROWS_AS(tgnn::load_model(p), tgnn::FormatVersionMismatch);
  }
  SUBCASE("truncated parameters") {
    auto bad = bytes;
    bad.resize(bytes.size() - 16);
    const auto p = dir / "m_trunc.bin";
    rewrite(p, bad);
    CHECK_THROWS_AS(tgnn::load_model(p), tgnn::CorruptRecord);
  }
  SUBCASE("trailing garbage") {
    auto bad = bytes;
    bad.push_back(0);
    const auto p = dir / "m_trail.bin";
    rewrite(p, bad);
    CHECK_THROWS_AS(tgnn::load_model(p), tgnn::CorruptRecord);
  }
  SUBCASE("zero shape field") {
    auto bad = bytes;
    bad[8] = bad[9] = bad[10] = bad[11] = 0;  // in_features = 0
    const auto p = dir / "m_shape.bin";
    rewrite(p, bad);
    CHECK_THROWS_AS(tgnn::load_model(p), tgnn::IncompatibleModel);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(tgnn::load_model(dir / "absent_model.bin"), tgnn::IoError);
  }
}

TEST_CASE("evaluating with the wrong feature width raises IncompatibleModel") {
  std::mt19937_64 gen(66);
  GraphDataset ds;
  ds.num_classes = 3;
  ds.graphs = random_graphs(gen, 3);
  for (auto& g : ds.graphs) {
    g.node_features.conservativeResize(g.node_features.rows(), 7);
  }
  const GnnModel model = GnnModel::init(10, 3, 2);
  CHECK_THROWS_AS(tgnn::evaluate(model, ds), tgnn::IncompatibleModel);
}
