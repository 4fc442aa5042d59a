#include "ruleocr/ingest.hpp"

#include <filesystem>
#include <fstream>

namespace ruleocr::ingest {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

std::vector<RawDigitImage> parse_idx_images(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw Truncated("idx3 header needs 16 bytes");
  if (read_be32(bytes, 0) != kImageMagic)
    throw BadMagic("idx3 magic must be 2051, got " + std::to_string(read_be32(bytes, 0)));
  const std::uint64_t count = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  if (bytes.size() != 16 + count * rows * cols)
    throw Truncated("idx3 payload size mismatch");
  if (rows != kDigitSide || cols != kDigitSide)
    throw BadShape("expected 28x28 images, got " + std::to_string(rows) + "x" +
                   std::to_string(cols));
  std::vector<RawDigitImage> images(count);
  const std::uint8_t* p = bytes.data() + 16;
  for (auto& img : images) {
    std::copy(p, p + kDigitPixels, img.pixels.begin());
    p += kDigitPixels;
  }
  return images;
}

std::vector<Digit> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Truncated("idx1 header needs 8 bytes");
  if (read_be32(bytes, 0) != kLabelMagic)
    throw BadMagic("idx1 magic must be 2049, got " + std::to_string(read_be32(bytes, 0)));
  const std::uint64_t count = read_be32(bytes, 4);
  if (bytes.size() != 8 + count) throw Truncated("idx1 payload size mismatch");
  std::vector<Digit> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint8_t v = bytes[8 + i];
    if (v > 9) throw BadLabel("label byte " + std::to_string(v) + " out of range");
    labels[i] = v;
  }
  return labels;
}

DigitPools build_pools(const std::vector<RawDigitImage>& images,
                       const std::vector<Digit>& labels, std::string source_tag) {
  if (images.size() != labels.size())
    throw LengthMismatch("images and labels differ in length");
  DigitPools pools;
  pools.source_tag = std::move(source_tag);
  for (std::size_t i = 0; i < images.size(); ++i)
    pools.pools[labels[i]].push_back(images[i]);
  return pools;
}

std::vector<std::uint8_t> write_idx_images(const std::vector<RawDigitImage>& images) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size() * kDigitPixels);
  append_be32(out, kImageMagic);
  append_be32(out, static_cast<std::uint32_t>(images.size()));
  append_be32(out, kDigitSide);
  append_be32(out, kDigitSide);
  for (const auto& img : images)
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

std::vector<std::uint8_t> write_idx_labels(const std::vector<Digit>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  append_be32(out, kLabelMagic);
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

DigitPools load_pools_from_idx(const std::string& images_path,
                               const std::string& labels_path) {
  auto images = parse_idx_images(read_file(images_path));
  auto labels = parse_idx_labels(read_file(labels_path));
  return build_pools(images, labels,
                     std::filesystem::path(images_path).filename().string());
}

}  // namespace ruleocr::ingest
