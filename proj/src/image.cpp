#include "ruleocr/image.hpp"

#include <algorithm>
#include <cmath>

namespace ruleocr {

std::vector<float> bilinear_resize(const std::vector<float>& src, int h_in, int w_in,
                                   int h_out, int w_out) {
  std::vector<float> dst(static_cast<std::size_t>(h_out) * w_out);
  const double sy = static_cast<double>(h_in) / h_out;
  const double sx = static_cast<double>(w_in) / w_out;
  for (int y = 0; y < h_out; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, h_in - 1);
    int y1c = std::clamp(y0 + 1, 0, h_in - 1);
    for (int x = 0; x < w_out; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, w_in - 1);
      int x1c = std::clamp(x0 + 1, 0, w_in - 1);
      double top = (1.0 - wx) * src[static_cast<std::size_t>(y0c * w_in + x0c)] +
                   wx * src[static_cast<std::size_t>(y0c * w_in + x1c)];
      double bot = (1.0 - wx) * src[static_cast<std::size_t>(y1c * w_in + x0c)] +
                   wx * src[static_cast<std::size_t>(y1c * w_in + x1c)];
      dst[static_cast<std::size_t>(y * w_out + x)] =
          static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return dst;
}

GrayImage concat_and_resize(const std::array<ingest::RawDigitImage, kSeqLen>& parts) {
  constexpr int kWide = ingest::kDigitSide * kSeqLen;  // 140
  std::vector<float> strip(static_cast<std::size_t>(ingest::kDigitSide) * kWide);
  for (int k = 0; k < kSeqLen; ++k)
    for (int y = 0; y < ingest::kDigitSide; ++y)
      for (int x = 0; x < ingest::kDigitSide; ++x)
        strip[static_cast<std::size_t>(y * kWide + k * ingest::kDigitSide + x)] =
            parts[static_cast<std::size_t>(k)]
                .pixels[static_cast<std::size_t>(y * ingest::kDigitSide + x)] /
            255.0f;
  auto resized = bilinear_resize(strip, ingest::kDigitSide, kWide, GrayImage::kHeight,
                                 GrayImage::kWidth);
  GrayImage out;
  std::copy(resized.begin(), resized.end(), out.pixels.begin());
  return out;
}

}  // namespace ruleocr
