// Command-line front end for the trajectory-graph digit recognizer:
// raster images or pen strokes -> directional path graphs -> graph
// convolution training, evaluation and inspection.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "tgnn/gnn.hpp"
#include "tgnn/pipeline.hpp"

namespace {

constexpr int kRuntimeErrorExit = 2;

struct ThresholdFlag {
  std::optional<int> value = tgnn::kDefaultThreshold;  // nullopt = Otsu per image
};

void add_threshold_option(CLI::App* cmd, ThresholdFlag& flag) {
  cmd->add_option_function<std::string>(
         "--threshold",
         [&flag](const std::string& text) {
           if (text == "otsu") {
             flag.value = std::nullopt;
             return;
           }
           try {
             std::size_t used = 0;
             const int v = std::stoi(text, &used);
             if (used != text.size() || v < 0 || v > 255) throw std::invalid_argument(text);
             flag.value = v;
           } catch (const std::exception&) {
             throw CLI::ValidationError("--threshold",
                                        "expected an integer in [0, 255] or 'otsu', got '" +
                                            text + "'");
           }
         },
         "Binarization threshold (0-255) or 'otsu' (default 128)");
}

tgnn::Profile resolve_profile(const std::string& flag, bool from_strokes) {
  if (flag == "offline") return tgnn::Profile::offline;
  if (flag == "online") return tgnn::Profile::online;
  return from_strokes ? tgnn::Profile::online : tgnn::Profile::offline;
}

void write_metrics_csv(const std::string& path, const std::vector<tgnn::EpochMetrics>& metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw tgnn::IoError("cannot open " + path + " for writing");
  out << "epoch,loss,train_acc,test_err\n";
  char buf[128];
  for (const auto& m : metrics) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,", m.epoch, m.loss, m.train_accuracy);
    out << buf;
    if (std::isnan(m.test_error)) {
      out << "nan";
    } else {
      std::snprintf(buf, sizeof buf, "%.17g", m.test_error);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw tgnn::IoError("write failed for " + path);
}

tgnn::PrepareResult prepare_from_flags(const std::string& images_path,
                                       const std::string& labels_path,
                                       const std::string& strokes_path,
                                       const ThresholdFlag& threshold, const std::string& profile,
                                       std::optional<std::size_t> limit) {
  if (!strokes_path.empty()) {
    const auto samples = tgnn::read_stroke_samples(strokes_path, tgnn::kNumClasses);
    return tgnn::build_online_dataset(samples, resolve_profile(profile, true), limit);
  }
  const auto images = tgnn::load_idx_images(images_path);
  const auto labels = tgnn::load_idx_labels(labels_path, tgnn::kNumClasses);
  const int threads =
      tgnn::preparation_threads(static_cast<int>(std::thread::hardware_concurrency()));
  return tgnn::build_offline_dataset(images, labels, threshold.value,
                                     resolve_profile(profile, false), limit, threads);
}

int run(int argc, char** argv) {
  CLI::App app{"Handwritten digit recognition over trajectory graphs"};
  app.require_subcommand(1);

  // --- prepare ---------------------------------------------------------------
  auto* prepare = app.add_subcommand("prepare", "Convert raster images or pen strokes to a graph dataset");
  std::string images_path, labels_path, strokes_path, prepare_out;
  std::string prepare_profile = "auto";
  ThresholdFlag threshold;
  std::optional<std::size_t> prepare_limit;
  auto* images_opt = prepare->add_option("--images", images_path, "IDX image file (gzip ok)");
  auto* labels_opt = prepare->add_option("--labels", labels_path, "IDX label file (gzip ok)");
  auto* strokes_opt =
      prepare->add_option("--strokes", strokes_path, "JSON-lines stroke file (one sample per line)");
  images_opt->needs(labels_opt);
  labels_opt->needs(images_opt);
  strokes_opt->excludes(images_opt)->excludes(labels_opt);
  prepare->add_option("--profile", prepare_profile, "Encoding profile: offline, online, or auto")
      ->check(CLI::IsMember({"offline", "online", "auto"}));
  add_threshold_option(prepare, threshold);
  prepare->add_option("--limit", prepare_limit, "Use only the first N samples");
  prepare->add_option("--out", prepare_out, "Output dataset path")->required();

  // --- train -----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Split a dataset, train the model, write metrics");
  std::string train_dataset, train_out, metrics_path;
  tgnn::TrainConfig config;
  double train_fraction = 0.8;
  train_cmd->add_option("--dataset", train_dataset, "Dataset produced by prepare")->required();
  train_cmd->add_option("--out", train_out, "Output model path")->required();
  train_cmd->add_option("--metrics", metrics_path, "Metrics CSV path (default <out>.metrics.csv)");
  train_cmd->add_option("--epochs", config.epochs, "Training epochs (default 50)");
  train_cmd->add_option("--batch-size", config.batch_size, "Graphs per batch (default 64)");
  train_cmd->add_option("--lr", config.lr, "Adam learning rate (default 0.01)");
  train_cmd->add_option("--train-fraction", train_fraction,
                        "Train share of the split, in (0, 1) (default 0.8)");
  train_cmd->add_option("--seed", config.seed, "Run seed (default 17)");

  // --- eval ------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Report a model's error rate on a dataset");
  std::string eval_dataset, eval_model;
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset produced by prepare")->required();
  eval_cmd->add_option("--model", eval_model, "Model produced by train")->required();

  // --- predict ---------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "Print the predicted class of every graph");
  std::string predict_dataset, predict_model;
  predict_cmd->add_option("--dataset", predict_dataset, "Dataset produced by prepare")->required();
  predict_cmd->add_option("--model", predict_model, "Model produced by train")->required();

  // --- inspect ---------------------------------------------------------------
  auto* inspect = app.add_subcommand("inspect", "Show every pipeline stage for one sample");
  std::string ins_images, ins_labels, ins_strokes, dot_path;
  std::string ins_profile = "auto";
  ThresholdFlag ins_threshold;
  std::size_t ins_index = 0;
  auto* ins_images_opt = inspect->add_option("--images", ins_images, "IDX image file");
  auto* ins_labels_opt = inspect->add_option("--labels", ins_labels, "IDX label file");
  auto* ins_strokes_opt = inspect->add_option("--strokes", ins_strokes, "JSON-lines stroke file");
  ins_images_opt->needs(ins_labels_opt);
  ins_labels_opt->needs(ins_images_opt);
  ins_strokes_opt->excludes(ins_images_opt)->excludes(ins_labels_opt);
  inspect->add_option("--index", ins_index, "Sample index (default 0)");
  inspect->add_option("--profile", ins_profile, "Encoding profile: offline, online, or auto")
      ->check(CLI::IsMember({"offline", "online", "auto"}));
  add_threshold_option(inspect, ins_threshold);
  inspect->add_option("--dot", dot_path, "Write the sample's graph in DOT format to this file");

  CLI11_PARSE(app, argc, argv);

  if (prepare->parsed()) {
    if (images_path.empty() && strokes_path.empty()) {
      throw CLI::RequiredError("prepare: either --images/--labels or --strokes");
    }
    const auto result = prepare_from_flags(images_path, labels_path, strokes_path, threshold,
                                           prepare_profile, prepare_limit);
    tgnn::save_dataset(result.dataset, prepare_out);
    if (result.stats.skipped > 0) {
      std::cerr << "warning: skipped " << result.stats.skipped << " degenerate sample(s)\n";
    }
    std::cout << "graphs=" << result.stats.kept << " skipped=" << result.stats.skipped
              << " classes=" << result.dataset.num_classes << " out=" << prepare_out << '\n';
    return 0;
  }

  if (train_cmd->parsed()) {
    if (metrics_path.empty()) metrics_path = train_out + ".metrics.csv";
    const tgnn::GraphDataset dataset = tgnn::load_dataset(train_dataset);
    auto [train_set, test_set] = tgnn::split_shuffle(dataset, train_fraction, config.seed);
    tgnn::GnnModel model =
        tgnn::GnnModel::init(tgnn::kNodeFeatureWidth, dataset.num_classes, config.seed);
    const auto metrics =
        tgnn::train(model, train_set, config, test_set.graphs.empty() ? nullptr : &test_set);
    write_metrics_csv(metrics_path, metrics);
    tgnn::save_model(model, train_out);
    const auto& last = metrics.back();
    char buf[160];
    std::snprintf(buf, sizeof buf, "epochs=%d loss=%.6f train_acc=%.4f test_err=%.4f", last.epoch,
                  last.loss, last.train_accuracy, last.test_error);
    std::cout << buf << " model=" << train_out << " metrics=" << metrics_path << '\n';
    return 0;
  }

  if (eval_cmd->parsed()) {
    const tgnn::GraphDataset dataset = tgnn::load_dataset(eval_dataset);
    const tgnn::GnnModel model = tgnn::load_model(eval_model);
    const tgnn::Evaluation eval = tgnn::evaluate(model, dataset);
    char buf[64];
    std::snprintf(buf, sizeof buf, "error_rate=%.4f", eval.error_rate);
    std::cout << buf << " graphs=" << dataset.graphs.size() << '\n';
    std::cout << "confusion (rows = true class, cols = predicted):\n";
    for (Eigen::Index i = 0; i < eval.confusion.rows(); ++i) {
      for (Eigen::Index j = 0; j < eval.confusion.cols(); ++j) {
        std::cout << eval.confusion(i, j) << (j + 1 < eval.confusion.cols() ? ' ' : '\n');
      }
    }
    return 0;
  }

  if (predict_cmd->parsed()) {
    const tgnn::GraphDataset dataset = tgnn::load_dataset(predict_dataset);
    const tgnn::GnnModel model = tgnn::load_model(predict_model);
    const auto classes = tgnn::predict(model, dataset);
    for (std::size_t i = 0; i < classes.size(); ++i) std::cout << i << ' ' << classes[i] << '\n';
    return 0;
  }

  // inspect
  if (ins_images.empty() && ins_strokes.empty()) {
    throw CLI::RequiredError("inspect: either --images/--labels or --strokes");
  }
  tgnn::TrajectoryGraph graph;
  if (!ins_strokes.empty()) {
    const auto samples = tgnn::read_stroke_samples(ins_strokes, tgnn::kNumClasses);
    if (ins_index >= samples.size()) {
      throw tgnn::IndexOutOfRange("inspect: index " + std::to_string(ins_index) + " not in [0, " +
                                  std::to_string(samples.size()) + ")");
    }
    const auto& sample = samples[ins_index];
    const tgnn::Profile profile = resolve_profile(ins_profile, true);
    graph = tgnn::build_online_sample(sample, profile);
    std::size_t points = 0;
    for (const auto& s : sample.strokes) points += s.size();
    std::cout << "sample " << ins_index << ": label=" << sample.label
              << " strokes=" << sample.strokes.size() << " points=" << points << '\n';
  } else {
    const auto images = tgnn::load_idx_images(ins_images);
    const auto labels = tgnn::load_idx_labels(ins_labels, tgnn::kNumClasses);
    if (images.size() != labels.size()) {
      throw tgnn::ShapeMismatch("inspect: " + std::to_string(images.size()) + " images vs " +
                                std::to_string(labels.size()) + " labels");
    }
    if (ins_index >= images.size()) {
      throw tgnn::IndexOutOfRange("inspect: index " + std::to_string(ins_index) + " not in [0, " +
                                  std::to_string(images.size()) + ")");
    }
    const tgnn::Profile profile = resolve_profile(ins_profile, false);
    const auto trace = tgnn::trace_offline_sample(images[ins_index], ins_threshold.value, profile,
                                                  labels[ins_index]);
    graph = trace.graph;
    std::cout << "sample " << ins_index << ": label=" << labels[ins_index] << " size="
              << images[ins_index].width << 'x' << images[ins_index].height << '\n';
    std::cout << "binary foreground=" << trace.binary.count_foreground()
              << " skeleton foreground=" << trace.skeleton.count_foreground() << '\n';
    std::cout << "paths=" << trace.paths.size() << " trajectory points="
              << trace.trajectory.points.size() << " codes=" << trace.codes.codes.size() << '\n';
  }
  std::cout << "graph nodes=" << graph.num_nodes() << " edges=" << graph.edges.size() << '\n';
  if (!dot_path.empty()) {
    std::ofstream out(dot_path, std::ios::trunc);
    if (!out) throw tgnn::IoError("cannot open " + dot_path + " for writing");
    out << tgnn::to_dot(graph, "sample_" + std::to_string(ins_index));
    if (!out) throw tgnn::IoError("write failed for " + dot_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeErrorExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeErrorExit;
  }
}
