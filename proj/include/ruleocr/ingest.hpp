#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ruleocr/types.hpp"

namespace ruleocr::ingest {

inline constexpr int kDigitSide = 28;
inline constexpr int kDigitPixels = kDigitSide * kDigitSide;

// One 28x28 grayscale source digit, 0 = background, 255 = full ink.
struct RawDigitImage {
  std::array<std::uint8_t, kDigitPixels> pixels{};
};

// Source digit images bucketed by class.
struct DigitPools {
  std::array<std::vector<RawDigitImage>, kNumDigits> pools;
  std::string source_tag;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& p : pools) n += p.size();
    return n;
  }
};

struct BadMagic : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Truncated : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadShape : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadLabel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// IDX3 image file: big-endian words magic=2051, count, rows, cols, then
// count*rows*cols unsigned bytes. Only 28x28 is accepted.
std::vector<RawDigitImage> parse_idx_images(std::span<const std::uint8_t> bytes);

// IDX1 label file: magic=2049, count, then count label bytes in [0,9].
std::vector<Digit> parse_idx_labels(std::span<const std::uint8_t> bytes);

DigitPools build_pools(const std::vector<RawDigitImage>& images,
                       const std::vector<Digit>& labels,
                       std::string source_tag = "idx");

// Serializers for the same formats (used by the built-in corpus generator).
std::vector<std::uint8_t> write_idx_images(const std::vector<RawDigitImage>& images);
std::vector<std::uint8_t> write_idx_labels(const std::vector<Digit>& labels);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

DigitPools load_pools_from_idx(const std::string& images_path,
                               const std::string& labels_path);

}  // namespace ruleocr::ingest
