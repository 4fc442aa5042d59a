#pragma once

#include <cstdint>
#include <vector>

#include "ruleocr/ingest.hpp"
#include "ruleocr/rng.hpp"
#include "ruleocr/types.hpp"

namespace ruleocr::glyphs {

// Procedural handwritten-style digit corpus. Each image is a stroke skeleton
// (polylines and elliptic arcs with jittered control points) pushed through a
// random affine map and a sinusoidal warp, rasterized with an anti-aliased
// thickness profile, optionally occluded, and finished with pixel noise.
// Difficulty knobs are chosen so that small CNNs plateau in the high 90s
// rather than saturating.
struct CorpusConfig {
  std::uint64_t seed = 20240601;
  int train_count = 60000;
  int test_count = 10000;

  double rotate_deg = 13.0;        // rotation range, +/-
  double shear = 0.17;             // horizontal shear range, +/-
  double scale_lo = 0.78, scale_hi = 1.05;
  double translate = 0.055;        // unit-box shift range, +/-
  double jitter = 0.018;           // control-point noise, unit box
  double thickness_lo = 1.35, thickness_hi = 2.6;  // stroke width, px
  double warp_amp_lo = 0.0, warp_amp_hi = 1.1;     // sinusoidal warp, px
  double ink_lo = 160.0, ink_hi = 255.0;           // stroke intensity
  double noise_sigma_lo = 4.0, noise_sigma_hi = 12.0;
  double occlusion_prob = 0.06;    // erase one thin random band
  double ambiguous_prob = 0.08;    // confusable variant rate (1/7, 4/9, 3/8, 5/6)
};

ingest::RawDigitImage render_digit(Digit d, Rng& rng, const CorpusConfig& cfg);

struct Corpus {
  std::vector<ingest::RawDigitImage> train_images;
  std::vector<Digit> train_labels;
  std::vector<ingest::RawDigitImage> test_images;
  std::vector<Digit> test_labels;
};

// Labels drawn uniformly; train then test from one stream seeded by
// cfg.seed, so the corpus is a pure function of the config.
Corpus generate_corpus(const CorpusConfig& cfg);

}  // namespace ruleocr::glyphs
