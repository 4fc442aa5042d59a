#pragma once

#include <array>
#include <vector>

#include "ruleocr/ingest.hpp"
#include "ruleocr/types.hpp"

namespace ruleocr {

// A 28x112 grayscale sequence image with intensities in [0, 1], row-major.
struct GrayImage {
  static constexpr int kHeight = 28;
  static constexpr int kWidth = 112;
  static constexpr int kPixels = kHeight * kWidth;

  std::array<float, kPixels> pixels{};

  float& at(int y, int x) { return pixels[static_cast<std::size_t>(y * kWidth + x)]; }
  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y * kWidth + x)]; }
};

// Bilinear resampling with half-pixel centers: the source coordinate of
// output pixel x is (x + 0.5) * (w_in / w_out) - 0.5, clamped at the borders,
// and likewise for rows. Values are interpolated from the four neighbours.
std::vector<float> bilinear_resize(const std::vector<float>& src, int h_in, int w_in,
                                   int h_out, int w_out);

// Horizontal concatenation of five 28x28 source digits into 28x140, scaled
// to [0,1] by /255, then bilinear-resized to 28x112.
GrayImage concat_and_resize(const std::array<ingest::RawDigitImage, kSeqLen>& parts);

}  // namespace ruleocr
