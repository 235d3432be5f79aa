#include <fstream>
#include <string>

#include "json.hpp"

#include "tgnn/chaincode.hpp"

namespace tgnn {

std::vector<StrokeSample> read_stroke_samples(const std::filesystem::path& path, int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("read_stroke_samples: num_classes must be >= 1");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::vector<StrokeSample> samples;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorruptRecord(where + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("label") || !doc.contains("strokes") ||
        !doc["label"].is_number_integer() || !doc["strokes"].is_array()) {
      throw CorruptRecord(where + ": expected {\"label\": int, \"strokes\": [...]}");
    }
    StrokeSample sample;
    sample.label = doc["label"].get<int>();
    if (sample.label < 0 || sample.label >= num_classes) {
      throw LabelOutOfRange(where + ": label " + std::to_string(sample.label) + " not in [0, " +
                            std::to_string(num_classes) + ")");
    }
    for (const auto& stroke : doc["strokes"]) {
      if (!stroke.is_array()) throw CorruptRecord(where + ": stroke is not an array");
      std::vector<Point> points;
      points.reserve(stroke.size());
      for (const auto& pt : stroke) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
          throw CorruptRecord(where + ": point is not [x, y]");
        }
        points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
      sample.strokes.push_back(std::move(points));
    }
    samples.push_back(std::move(sample));
  }
  if (in.bad()) throw IoError("read failed for " + path.string());
  return samples;
}

}  // namespace tgnn
