#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ruleocr/image.hpp"
#include "ruleocr/ingest.hpp"
#include "ruleocr/rng.hpp"
#include "ruleocr/types.hpp"

namespace ruleocr::synth {

struct EmptyPool : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TargetAccuracyUnreachable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoHardDigitAvailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SequenceExample {
  GrayImage image;
  DigitString label{};
  RuleId rule = RuleId::Rule1;
};

struct DatasetManifest {
  RuleId rule = RuleId::Rule1;
  std::uint64_t seed = 0;
  std::string prng_id;
  int train_count = 0;
  int val_count = 0;
  int test_count = 0;
  std::string source_tag;
  std::string content_hash;  // 16 hex digits, FNV-1a over the split files' bytes
};

struct Dataset {
  std::vector<SequenceExample> train, val, test;
  DatasetManifest manifest;
};

inline constexpr int kDefaultTrain = 2000;
inline constexpr int kDefaultVal = 500;
inline constexpr int kDefaultTest = 500;

// Label prefix: Rule1/Rule2 draw four digits iid uniform on [0,9]; Rule3
// draws an integer uniform on [1000,9999]. The check digit completes the
// label and each digit's image is drawn uniformly from its pool.
SequenceExample synthesize_example(RuleId rule, const ingest::DigitPools& pools, Rng& rng);

// Train, then val, then test, all from one stream seeded with `seed`.
Dataset synthesize_dataset(RuleId rule, const ingest::DigitPools& pools,
                           std::uint64_t seed, int train_count = kDefaultTrain,
                           int val_count = kDefaultVal, int test_count = kDefaultTest);

// On-disk pixel encoding of one example: round(intensity * 255) per pixel.
std::vector<std::uint8_t> quantize_pixels(const GrayImage& image);

// Column range [lo, hi) blanked when digit slot k is blocked out.
std::pair<int, int> blockout_band(int k);

// Zeroes one uniformly chosen digit band; the label is kept.
SequenceExample blockout(const SequenceExample& e, Rng& rng);

struct HardPoolConfig {
  std::uint64_t seed = 0;
  int max_epochs = 40;
  double band_lo = 0.980;  // early-stop when test accuracy first lands in
  double band_hi = 0.990;  // [band_lo, band_hi]
  int batch_size = 100;
  // Small enough that per-epoch test accuracy steps through the band instead
  // of jumping over it on the bundled corpus.
  float lr = 1e-4f;
};

struct HardPoolResult {
  ingest::DigitPools pool;  // misclassified test images keyed by true label
  double test_accuracy = 0;
  int epochs_trained = 0;
};

// Trains a small auxiliary digit classifier on the train pools and collects
// the test images it still gets wrong once its test accuracy first falls in
// the configured band.
HardPoolResult make_hard_pool(const ingest::DigitPools& train_pools,
                              const ingest::DigitPools& test_pools,
                              const HardPoolConfig& cfg);

// Rebuilds the image for `label` with one uniformly chosen position (among
// those whose digit value has hard images) drawn from the hard pool.
SequenceExample apply_hard_digit(RuleId rule, const DigitString& label,
                                 const ingest::DigitPools& pools,
                                 const ingest::DigitPools& hard_pool, Rng& rng);

}  // namespace ruleocr::synth
