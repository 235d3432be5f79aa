#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "tgnn/image.hpp"

namespace tgnn {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return data;
}

bool is_gzip(const std::vector<std::uint8_t>& data) {
  return data.size() >= 2 && data[0] == 0x1F && data[1] == 0x8B;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& data) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("gzip: inflate init failed");
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());

  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk;
  int ret = Z_OK;
  do {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("gzip: corrupt stream");
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (ret == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Truncated("gzip: unexpected end of stream");
    }
  } while (ret != Z_STREAM_END);
  inflateEnd(&zs);
  return out;
}

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

std::vector<std::uint8_t> load_payload(const std::filesystem::path& path) {
  auto data = read_file(path);
  if (is_gzip(data)) data = gunzip(data);
  return data;
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

std::vector<GrayImage> load_idx_images(const std::filesystem::path& path) {
  const auto data = load_payload(path);
  if (data.size() < 16) throw Truncated("idx images: header needs 16 bytes, got " +
                                        std::to_string(data.size()));
  const std::uint32_t magic = read_be32(data.data());
  if (magic != kImageMagic) throw BadMagic("idx images: bad magic " + std::to_string(magic));
  const std::uint64_t count = read_be32(data.data() + 4);
  const std::uint64_t height = read_be32(data.data() + 8);
  const std::uint64_t width = read_be32(data.data() + 12);
  const std::uint64_t need = 16 + count * height * width;
  if (data.size() < need) throw Truncated("idx images: payload short by " +
                                          std::to_string(need - data.size()) + " bytes");

  std::vector<GrayImage> images(count);
  const std::uint8_t* p = data.data() + 16;
  for (auto& img : images) {
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.pixels.assign(p, p + height * width);
    p += height * width;
  }
  return images;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path, int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("load_idx_labels: num_classes must be >= 1");
  const auto data = load_payload(path);
  if (data.size() < 8) throw Truncated("idx labels: header needs 8 bytes, got " +
                                       std::to_string(data.size()));
  const std::uint32_t magic = read_be32(data.data());
  if (magic != kLabelMagic) throw BadMagic("idx labels: bad magic " + std::to_string(magic));
  const std::uint64_t count = read_be32(data.data() + 4);
  if (data.size() < 8 + count) throw Truncated("idx labels: payload short by " +
                                               std::to_string(8 + count - data.size()) + " bytes");

  std::vector<int> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const int v = data[8 + i];
    if (v >= num_classes) {
      throw LabelOutOfRange("idx labels: label " + std::to_string(v) + " at index " +
                            std::to_string(i) + " not in [0, " + std::to_string(num_classes) + ")");
    }
    labels[i] = v;
  }
  return labels;
}

}  // namespace tgnn
