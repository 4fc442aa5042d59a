#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ruleocr/dataset_io.hpp"
#include "ruleocr/image.hpp"
#include "ruleocr/ingest.hpp"
#include "ruleocr/rng.hpp"
#include "ruleocr/rules.hpp"
#include "ruleocr/synth.hpp"

using namespace ruleocr;

namespace {

// Independent double-precision resampler, written from the documented
// semantics (half-pixel centers, coordinates clamped at the borders) rather
// than from the production code.
std::vector<double> ref_resize(const std::vector<float>& src, int h_in, int w_in,
                               int h_out, int w_out) {
  std::vector<double> out(static_cast<std::size_t>(h_out) * w_out);
  for (int y = 0; y < h_out; ++y) {
    double v = (y + 0.5) * h_in / static_cast<double>(h_out) - 0.5;
    v = std::clamp(v, 0.0, static_cast<double>(h_in - 1));
    const int y0 = static_cast<int>(v);
    const int y1 = std::min(y0 + 1, h_in - 1);
    const double fy = v - y0;
    for (int x = 0; x < w_out; ++x) {
      double u = (x + 0.5) * w_in / static_cast<double>(w_out) - 0.5;
      u = std::clamp(u, 0.0, static_cast<double>(w_in - 1));
      const int x0 = static_cast<int>(u);
      const int x1 = std::min(x0 + 1, w_in - 1);
      const double fx = u - x0;
      const double top = (1 - fx) * src[static_cast<std::size_t>(y0 * w_in + x0)] +
                         fx * src[static_cast<std::size_t>(y0 * w_in + x1)];
      const double bot = (1 - fx) * src[static_cast<std::size_t>(y1 * w_in + x0)] +
                         fx * src[static_cast<std::size_t>(y1 * w_in + x1)];
      out[static_cast<std::size_t>(y * w_out + x)] = (1 - fy) * top + fy * bot;
    }
  }
  return out;
}

double max_abs_diff(const std::vector<float>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(got[i] - want[i]));
  return worst;
}

ingest::RawDigitImage constant_digit(std::uint8_t value) {
  ingest::RawDigitImage img;
  img.pixels.fill(value);
  return img;
}

// Pools whose images are constant planes, so that a digit's identity can be
// read back out of a synthesized sequence as a band intensity.
ingest::DigitPools marker_pools(int per_class, std::uint8_t base, std::uint8_t step) {
  ingest::DigitPools pools;
  pools.source_tag = "marker";
  for (int d = 0; d < kNumDigits; ++d)
    for (int i = 0; i < per_class; ++i)
      pools.pools[static_cast<std::size_t>(d)].push_back(
          constant_digit(static_cast<std::uint8_t>(base + step * d)));
  return pools;
}

// Mean intensity over the interior columns of digit band k, away from the
// resampling bleed at band boundaries.
double band_mean(const GrayImage& img, int k) {
  const auto [lo, hi] = synth::blockout_band(k);
  double sum = 0;
  int n = 0;
  for (int y = 0; y < GrayImage::kHeight; ++y)
    for (int x = lo + 4; x < hi - 4; ++x, ++n) sum += img.at(y, x);
  return sum / n;
}

std::filesystem::path fresh_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("ruleocr_test_" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("bilinear resize matches a double precision reference") {
  Rng rng(901);
  const std::array<std::array<int, 4>, 4> shapes{{
      {28, 140, 28, 112},  // the production concat path
      {14, 56, 28, 112},   // upsampling exercises the border clamp
      {28, 112, 28, 112},  // identity
      {5, 7, 3, 11},       // odd sizes in both directions
  }};
  for (const auto& [h_in, w_in, h_out, w_out] : shapes) {
    std::vector<float> src(static_cast<std::size_t>(h_in) * w_in);
    for (auto& v : src) v = static_cast<float>(rng.real01());
    const auto got = bilinear_resize(src, h_in, w_in, h_out, w_out);
    const auto want = ref_resize(src, h_in, w_in, h_out, w_out);
    CHECK(max_abs_diff(got, want) < 1e-5);
  }

  // Identity resize is an exact copy.
  std::vector<float> src(28 * 112);
  for (auto& v : src) v = static_cast<float>(rng.real01());
  const auto same = bilinear_resize(src, 28, 112, 28, 112);
  for (std::size_t i = 0; i < src.size(); ++i) CHECK(same[i] == doctest::Approx(src[i]).epsilon(1e-7));
}

TEST_CASE("resize preserves constants and never loses a pixel's ink") {
  constexpr int kHIn = 28, kWIn = 140, kHOut = 28, kWOut = 112;
  const std::size_t n_in = static_cast<std::size_t>(kHIn) * kWIn;

  std::vector<float> zeros(n_in, 0.f);
  for (float v : bilinear_resize(zeros, kHIn, kWIn, kHOut, kWOut)) CHECK(v == 0.f);

  std::vector<float> ones(n_in, 1.f);
  for (float v : bilinear_resize(ones, kHIn, kWIn, kHOut, kWOut))
    CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  // A unit delta at any source pixel keeps between 74% and 101% of its mass
  // (the 4/5 horizontal shrink concentrates tent weights spaced 1.25 apart),
  // and its image stays within two columns of the scaled position.
  std::vector<float> delta(n_in, 0.f);
  for (int y = 0; y < kHIn; y += 3) {
    for (int x = 0; x < kWIn; ++x) {
      delta[static_cast<std::size_t>(y * kWIn + x)] = 1.f;
      const auto out = bilinear_resize(delta, kHIn, kWIn, kHOut, kWOut);
      delta[static_cast<std::size_t>(y * kWIn + x)] = 0.f;
      double mass = 0;
      for (int oy = 0; oy < kHOut; ++oy)
        for (int ox = 0; ox < kWOut; ++ox) {
          const double v = out[static_cast<std::size_t>(oy * kWOut + ox)];
          mass += v;
          if (v > 0) CHECK(std::abs(ox - 0.8 * x) <= 2.0);
        }
      CHECK(mass >= 0.74);
      CHECK(mass <= 1.01);
    }
  }
}

TEST_CASE("dense images keep about four fifths of their mass") {
  Rng rng(902);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<float> src(28 * 140);
    double mass_in = 0;
    for (auto& v : src) {
      v = static_cast<float>(rng.real01());
      mass_in += v;
    }
    const auto out = bilinear_resize(src, 28, 140, 28, 112);
    double mass_out = 0;
    for (float v : out) mass_out += v;
    CHECK(mass_out / mass_in == doctest::Approx(0.8).epsilon(0.005));
  }
}

TEST_CASE("concatenation places each digit in its band") {
  std::array<ingest::RawDigitImage, kSeqLen> parts;
  for (int k = 0; k < kSeqLen; ++k)
    parts[static_cast<std::size_t>(k)] =
        constant_digit(static_cast<std::uint8_t>(40 * (k + 1)));
  const GrayImage img = concat_and_resize(parts);
  for (int k = 0; k < kSeqLen; ++k)
    CHECK(band_mean(img, k) == doctest::Approx(40.0 * (k + 1) / 255.0).epsilon(2e-3));

  // And agrees with the reference pipeline end to end.
  std::vector<float> strip(28 * 140);
  for (int k = 0; k < kSeqLen; ++k)
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x)
        strip[static_cast<std::size_t>(y * 140 + 28 * k + x)] =
            parts[static_cast<std::size_t>(k)].pixels[static_cast<std::size_t>(y * 28 + x)] /
            255.0f;
  const auto want = ref_resize(strip, 28, 140, 28, 112);
  double worst = 0;
  for (std::size_t i = 0; i < want.size(); ++i)
    worst = std::max(worst, std::abs(img.pixels[i] - want[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("synthesized labels satisfy their rule") {
  const auto pools = marker_pools(3, 20, 20);
  for (RuleId rule : {RuleId::Rule1, RuleId::Rule2, RuleId::Rule3}) {
    CAPTURE(static_cast<int>(rule));
    Rng rng(903);
    for (int i = 0; i < 200; ++i) {
      const auto ex = synth::synthesize_example(rule, pools, rng);
      CHECK(ex.rule == rule);
      CHECK(rules::verify(rule, ex.label));
      if (rule == RuleId::Rule3) CHECK(ex.label[0] != 0);
      double mass = 0;
      for (float v : ex.image.pixels) mass += v;
      CHECK(mass > 0);
    }
  }

  // Same seed, same stream position: identical label and pixels.
  Rng a(904), b(904);
  for (int i = 0; i < 20; ++i) {
    const auto ea = synth::synthesize_example(RuleId::Rule2, pools, a);
    const auto eb = synth::synthesize_example(RuleId::Rule2, pools, b);
    CHECK(ea.label == eb.label);
    CHECK(ea.image.pixels == eb.image.pixels);
  }
}

TEST_CASE("label prefixes are uniform") {
  const auto pools = marker_pools(2, 20, 20);
  constexpr int kN = 30000;

  // Rule 1: all four prefix digits iid uniform, and the mod-10 check digit of
  // a uniform prefix is itself uniform.
  {
    Rng rng(905);
    std::array<std::array<int, kNumDigits>, kSeqLen> counts{};
    for (int i = 0; i < kN; ++i) {
      const auto ex = synth::synthesize_example(RuleId::Rule1, pools, rng);
      for (int k = 0; k < kSeqLen; ++k) ++counts[static_cast<std::size_t>(k)][ex.label[k]];
    }
    for (int k = 0; k < kSeqLen; ++k)
      for (int d = 0; d < kNumDigits; ++d) {
        CAPTURE(k);
        CAPTURE(d);
        CHECK(std::abs(counts[static_cast<std::size_t>(k)][d] - kN / 10) < 160);  // ~3 sigma
      }
  }

  // Rule 3: the prefix is uniform on [1000, 9999], so the leading digit is
  // uniform on 1..9 and the middle digits stay uniform on 0..9.
  {
    Rng rng(906);
    std::array<std::array<int, kNumDigits>, 4> counts{};
    for (int i = 0; i < kN; ++i) {
      const auto ex = synth::synthesize_example(RuleId::Rule3, pools, rng);
      for (int k = 0; k < 4; ++k) ++counts[static_cast<std::size_t>(k)][ex.label[k]];
    }
    CHECK(counts[0][0] == 0);
    for (int d = 1; d < kNumDigits; ++d) {
      CAPTURE(d);
      CHECK(std::abs(counts[0][d] - kN / 9) < 170);  // ~3 sigma at p = 1/9
    }
    for (int k = 1; k < 4; ++k)
      for (int d = 0; d < kNumDigits; ++d) {
        CAPTURE(k);
        CAPTURE(d);
        CHECK(std::abs(counts[static_cast<std::size_t>(k)][d] - kN / 10) < 160);
      }
  }
}

TEST_CASE("dataset manifests pin the generation provenance") {
  const auto pools = marker_pools(3, 20, 20);
  const auto ds = synth::synthesize_dataset(RuleId::Rule2, pools, 42, 12, 5, 4);
  CHECK(ds.train.size() == 12);
  CHECK(ds.val.size() == 5);
  CHECK(ds.test.size() == 4);
  CHECK(ds.manifest.rule == RuleId::Rule2);
  CHECK(ds.manifest.seed == 42);
  CHECK(ds.manifest.prng_id == "mt19937_64/v1");
  CHECK(ds.manifest.train_count == 12);
  CHECK(ds.manifest.val_count == 5);
  CHECK(ds.manifest.test_count == 4);
  CHECK(ds.manifest.source_tag == "marker");
  CHECK(ds.manifest.content_hash.size() == 16);
  CHECK(ds.manifest.content_hash.find_first_not_of("0123456789abcdef") == std::string::npos);

  const auto again = synth::synthesize_dataset(RuleId::Rule2, pools, 42, 12, 5, 4);
  CHECK(again.manifest.content_hash == ds.manifest.content_hash);
  CHECK(again.train[0].label == ds.train[0].label);
  CHECK(again.train[0].image.pixels == ds.train[0].image.pixels);

  const auto other = synth::synthesize_dataset(RuleId::Rule2, pools, 43, 12, 5, 4);
  CHECK(other.manifest.content_hash != ds.manifest.content_hash);
}

TEST_CASE("quantization rounds intensities to bytes") {
  GrayImage img;
  img.pixels[0] = 0.f;
  img.pixels[1] = 1.f;
  img.pixels[2] = 0.5f;           // 127.5 rounds away from zero
  img.pixels[3] = 1.0f / 255.0f;  // smallest nonzero level
  img.pixels[4] = 0.0019f;        // below half a level
  const auto q = synth::quantize_pixels(img);
  REQUIRE(q.size() == static_cast<std::size_t>(GrayImage::kPixels));
  CHECK(q[0] == 0);
  CHECK(q[1] == 255);
  CHECK(q[2] == 128);
  CHECK(q[3] == 1);
  CHECK(q[4] == 0);
}

TEST_CASE("blockout bands tile the image width") {
  const std::array<std::pair<int, int>, kSeqLen> want{
      {{0, 22}, {22, 45}, {45, 67}, {67, 90}, {90, 112}}};
  for (int k = 0; k < kSeqLen; ++k) CHECK(synth::blockout_band(k) == want[static_cast<std::size_t>(k)]);
}

TEST_CASE("blockout erases exactly one digit band") {
  synth::SequenceExample ex;
  ex.image.pixels.fill(1.f);
  ex.label = {1, 2, 3, 4, 0};
  ex.rule = RuleId::Rule1;

  Rng rng(907);
  std::set<int> seen;
  for (int trial = 0; trial < 300; ++trial) {
    const auto blocked = synth::blockout(ex, rng);
    CHECK(blocked.label == ex.label);
    CHECK(blocked.rule == ex.rule);

    // Every column is either fully erased or untouched, and the erased ones
    // form exactly one band.
    std::set<int> zero_cols;
    for (int x = 0; x < GrayImage::kWidth; ++x) {
      const float top = blocked.image.at(0, x);
      for (int y = 0; y < GrayImage::kHeight; ++y) REQUIRE(blocked.image.at(y, x) == top);
      if (top == 0.f) zero_cols.insert(x);
      else REQUIRE(top == 1.f);
    }
    int band = -1;
    for (int k = 0; k < kSeqLen; ++k) {
      const auto [lo, hi] = synth::blockout_band(k);
      if (zero_cols.count(lo)) band = k;
    }
    REQUIRE(band >= 0);
    const auto [lo, hi] = synth::blockout_band(band);
    CHECK(static_cast<int>(zero_cols.size()) == hi - lo);
    CHECK(*zero_cols.begin() == lo);
    CHECK(*zero_cols.rbegin() == hi - 1);
    seen.insert(band);
  }
  CHECK(seen.size() == kSeqLen);  // all five bands get drawn

  Rng a(908), b(908);
  const auto ba = synth::blockout(ex, a);
  const auto bb = synth::blockout(ex, b);
  CHECK(ba.image.pixels == bb.image.pixels);
}

TEST_CASE("datasets survive a save and load round trip") {
  const auto pools = marker_pools(3, 20, 20);
  const auto ds = synth::synthesize_dataset(RuleId::Rule3, pools, 99, 12, 5, 4);
  const auto dir = fresh_dir("roundtrip");
  io::save_dataset(dir.string(), ds);

  CHECK(io::dataset_content_hash(dir.string()) == ds.manifest.content_hash);

  const auto back = io::load_dataset(dir.string());
  CHECK(back.manifest.rule == ds.manifest.rule);
  CHECK(back.manifest.seed == ds.manifest.seed);
  CHECK(back.manifest.prng_id == ds.manifest.prng_id);
  CHECK(back.manifest.train_count == ds.manifest.train_count);
  CHECK(back.manifest.val_count == ds.manifest.val_count);
  CHECK(back.manifest.test_count == ds.manifest.test_count);
  CHECK(back.manifest.source_tag == ds.manifest.source_tag);
  CHECK(back.manifest.content_hash == ds.manifest.content_hash);

  REQUIRE(back.train.size() == ds.train.size());
  REQUIRE(back.val.size() == ds.val.size());
  REQUIRE(back.test.size() == ds.test.size());
  const auto same_split = [](const std::vector<synth::SequenceExample>& a,
                             const std::vector<synth::SequenceExample>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].label == b[i].label);
      CHECK(a[i].rule == b[i].rule);
      CHECK(synth::quantize_pixels(a[i].image) == synth::quantize_pixels(b[i].image));
    }
  };
  same_split(back.train, ds.train);
  same_split(back.val, ds.val);
  same_split(back.test, ds.test);

  // Corruption is detected: a short image file, then a missing label line.
  const auto images_path = dir / "train" / "images.bin";
  const auto full_size = std::filesystem::file_size(images_path);
  std::filesystem::resize_file(images_path, full_size - 1);
  CHECK_THROWS_AS(io::load_dataset(dir.string()), io::CorruptDataset);
  std::filesystem::resize_file(images_path, full_size);
  io::save_split((dir / "train").string(), ds.train);  // restore real bytes
  CHECK_NOTHROW(io::load_dataset(dir.string()));

  std::vector<synth::SequenceExample> short_split(ds.val.begin(), ds.val.end() - 1);
  {
    std::ofstream labels(dir / "val" / "labels.txt", std::ios::trunc);
    for (const auto& e : short_split) labels << to_string(e.label) << "\n";
  }
  CHECK_THROWS_AS(io::load_dataset(dir.string()), io::CorruptDataset);

  std::filesystem::remove_all(dir);
}

TEST_CASE("hard pools collect the planted confusions") {
  // Each class is a bright square at a class-specific grid position, which a
  // small convnet separates almost immediately, so the auxiliary classifier
  // can only stay below perfect accuracy on deliberately mislabeled test
  // images. Planting 10 of them among 680 clean ones caps accuracy at
  // 680/690 = 0.9855, inside the default band, so the collected pool must
  // contain every plant, keyed by its stamped (wrong) label. Plants carry an
  // off-by-one intensity marker so they can be identified in the pool.
  const auto block_digit = [](int d, std::uint8_t value) {
    ingest::RawDigitImage img;
    const int r0 = 1 + 9 * (d / 4);
    const int c0 = 1 + 7 * (d % 4);
    for (int y = r0; y < r0 + 7; ++y)
      for (int x = c0; x < c0 + 6; ++x)
        img.pixels[static_cast<std::size_t>(y * ingest::kDigitSide + x)] = value;
    return img;
  };
  ingest::DigitPools train;
  train.source_tag = "planted";
  for (int d = 0; d < kNumDigits; ++d)
    for (int i = 0; i < 60; ++i)
      train.pools[static_cast<std::size_t>(d)].push_back(block_digit(d, 230));

  ingest::DigitPools test;
  test.source_tag = "planted";
  for (int d = 0; d < kNumDigits; ++d)
    for (int i = 0; i < 68; ++i)
      test.pools[static_cast<std::size_t>(d)].push_back(block_digit(d, 230));
  struct Plant {
    int source, stamped;
  };
  std::vector<Plant> plants;
  for (int i = 0; i < 10; ++i) {
    const int source = i;
    const int stamped = (source + 1 + (i % 9)) % kNumDigits;
    plants.push_back({source, stamped});
    test.pools[static_cast<std::size_t>(stamped)].push_back(block_digit(source, 231));
  }

  synth::HardPoolConfig cfg;
  cfg.seed = 909;
  const auto result = synth::make_hard_pool(train, test, cfg);
  CHECK(result.test_accuracy >= cfg.band_lo);
  CHECK(result.test_accuracy <= cfg.band_hi);
  CHECK(result.epochs_trained >= 1);
  CHECK(result.pool.source_tag == "planted:hard");

  // Every plant is in the pool under its stamped label, identified by its
  // intensity marker at the source class's square.
  for (const auto& plant : plants) {
    const auto& bucket = result.pool.pools[static_cast<std::size_t>(plant.stamped)];
    const auto want = block_digit(plant.source, 231);
    const bool found = std::any_of(bucket.begin(), bucket.end(),
                                   [&](const ingest::RawDigitImage& img) {
                                     return img.pixels == want.pixels;
                                   });
    CHECK(found);
  }
  // Pool size is exactly the number of misclassified test images.
  const auto wrong = static_cast<std::size_t>(std::lround((1.0 - result.test_accuracy) * 690));
  CHECK(result.pool.total() == wrong);

  // An unreachable band gives up after max_epochs.
  synth::HardPoolConfig strict = cfg;
  strict.band_lo = 0.995;
  strict.band_hi = 0.9999;
  strict.max_epochs = 3;
  CHECK_THROWS_AS(synth::make_hard_pool(train, test, strict), synth::TargetAccuracyUnreachable);

  CHECK_THROWS_AS(synth::make_hard_pool(ingest::DigitPools{}, test, cfg), synth::EmptyPool);
}

TEST_CASE("hard digits replace one eligible slot") {
  auto pools = marker_pools(3, 100, 0);  // every digit renders at 100
  ingest::DigitPools hard;
  hard.source_tag = "marker:hard";
  hard.pools[7].push_back(constant_digit(200));
  hard.pools[7].push_back(constant_digit(200));

  const DigitString label{7, 7, 4, 5, 3};  // 7+7+4+5 = 23, check digit 3
  REQUIRE(rules::verify(RuleId::Rule1, label));

  Rng rng(910);
  std::array<int, 2> picks{};
  for (int trial = 0; trial < 200; ++trial) {
    const auto ex = synth::apply_hard_digit(RuleId::Rule1, label, pools, hard, rng);
    CHECK(ex.label == label);
    CHECK(ex.rule == RuleId::Rule1);
    int hard_band = -1;
    for (int k = 0; k < kSeqLen; ++k) {
      const double mean = band_mean(ex.image, k);
      if (mean > 0.59) {
        CHECK(hard_band == -1);
        hard_band = k;
        CHECK(mean == doctest::Approx(200.0 / 255.0).epsilon(2e-3));
      } else {
        CHECK(mean == doctest::Approx(100.0 / 255.0).epsilon(2e-3));
      }
    }
    REQUIRE(hard_band >= 0);
    CHECK(hard_band <= 1);  // only the two 7-slots are eligible
    ++picks[static_cast<std::size_t>(hard_band)];
  }
  CHECK(picks[0] > 60);  // both slots drawn, roughly evenly
  CHECK(picks[1] > 60);

  Rng a(911), b(911);
  const auto ea = synth::apply_hard_digit(RuleId::Rule1, label, pools, hard, a);
  const auto eb = synth::apply_hard_digit(RuleId::Rule1, label, pools, hard, b);
  CHECK(ea.image.pixels == eb.image.pixels);

  // No hard image for any digit of the label: nothing to replace.
  const DigitString no_sevens{1, 2, 3, 4, 0};
  REQUIRE(rules::verify(RuleId::Rule1, no_sevens));
  CHECK_THROWS_AS(synth::apply_hard_digit(RuleId::Rule1, no_sevens, pools, hard, rng),
                  synth::NoHardDigitAvailable);
}
