#include "ruleocr/synth.hpp"

#include <algorithm>
#include <cmath>

#include "ruleocr/hash.hpp"
#include "ruleocr/nn_kernels.hpp"
#include "ruleocr/rules.hpp"

namespace ruleocr::synth {

namespace {

const ingest::RawDigitImage& draw_from_pool(const ingest::DigitPools& pools, Digit d,
                                            Rng& rng) {
  const auto& pool = pools.pools[d];
  if (pool.empty())
    throw EmptyPool("no source images for digit " + std::to_string(int(d)) + " in " +
                    pools.source_tag);
  return pool[rng.below(static_cast<std::uint32_t>(pool.size()))];
}

DigitString draw_label(RuleId rule, Rng& rng) {
  DigitPrefix prefix{};
  if (rule == RuleId::Rule3) {
    const std::uint32_t v = 1000 + rng.below(9000);
    prefix = {static_cast<Digit>(v / 1000), static_cast<Digit>(v / 100 % 10),
              static_cast<Digit>(v / 10 % 10), static_cast<Digit>(v % 10)};
  } else {
    for (auto& d : prefix) d = static_cast<Digit>(rng.below(10));
  }
  const Digit check = rules::check_digit(rule, prefix);
  return {prefix[0], prefix[1], prefix[2], prefix[3], check};
}

SequenceExample assemble(RuleId rule, const DigitString& label,
                         const std::array<const ingest::RawDigitImage*, kSeqLen>& parts) {
  std::array<ingest::RawDigitImage, kSeqLen> owned;
  for (int k = 0; k < kSeqLen; ++k) owned[k] = *parts[k];
  return SequenceExample{concat_and_resize(owned), label, rule};
}

}  // namespace

SequenceExample synthesize_example(RuleId rule, const ingest::DigitPools& pools, Rng& rng) {
  const DigitString label = draw_label(rule, rng);
  std::array<const ingest::RawDigitImage*, kSeqLen> parts{};
  for (int k = 0; k < kSeqLen; ++k) parts[k] = &draw_from_pool(pools, label[k], rng);
  return assemble(rule, label, parts);
}

std::vector<std::uint8_t> quantize_pixels(const GrayImage& image) {
  std::vector<std::uint8_t> out(GrayImage::kPixels);
  for (std::size_t i = 0; i < GrayImage::kPixels; ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

Dataset synthesize_dataset(RuleId rule, const ingest::DigitPools& pools,
                           std::uint64_t seed, int train_count, int val_count,
                           int test_count) {
  Dataset ds;
  Rng rng(seed);
  auto fill = [&](std::vector<SequenceExample>& split, int count) {
    split.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) split.push_back(synthesize_example(rule, pools, rng));
  };
  fill(ds.train, train_count);
  fill(ds.val, val_count);
  fill(ds.test, test_count);

  // Hash exactly what dataset_io writes: per split, images.bin then labels.txt.
  Fnv1a64 hash;
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const auto& e : *split) hash.update(quantize_pixels(e.image));
    for (const auto& e : *split) hash.update_text(to_string(e.label) + "\n");
  }

  ds.manifest = DatasetManifest{rule,      seed,       kPrngId,
                                train_count, val_count, test_count,
                                pools.source_tag, to_hex64(hash.digest())};
  return ds;
}

std::pair<int, int> blockout_band(int k) {
  const auto edge = [](int j) {
    return static_cast<int>(std::lround(j * double(GrayImage::kWidth) / kSeqLen));
  };
  return {edge(k), edge(k + 1)};
}

SequenceExample blockout(const SequenceExample& e, Rng& rng) {
  SequenceExample out = e;
  const int k = static_cast<int>(rng.below(kSeqLen));
  const auto [lo, hi] = blockout_band(k);
  for (int y = 0; y < GrayImage::kHeight; ++y)
    for (int x = lo; x < hi; ++x) out.image.at(y, x) = 0.0f;
  return out;
}

// ---- hard digits ----------------------------------------------------------

namespace {

// Small single-digit classifier: conv 8@3x3 -> pool -> conv 16@3x3 -> pool
// -> fc 64 -> 10. Enough capacity to reach the high-90s on the source
// corpus without leaving the early-stop band in one jump.
struct AuxNet {
  static constexpr int kSide = ingest::kDigitSide;
  static constexpr int kC1 = 8, kC2 = 16, kFc = 64;
  static constexpr int kH1 = kSide / 2, kH2 = kSide / 4;
  static constexpr int kFeat = kC2 * kH2 * kH2;  // 784

  std::vector<float> w1, b1, w2, b2, fcw, fcb, hw, hb;

  std::array<std::vector<float>*, 8> blocks() {
    return {&w1, &b1, &w2, &b2, &fcw, &fcb, &hw, &hb};
  }

  AuxNet() {
    w1.assign(kC1 * 9, 0.f);
    b1.assign(kC1, 0.f);
    w2.assign(static_cast<std::size_t>(kC2) * kC1 * 9, 0.f);
    b2.assign(kC2, 0.f);
    fcw.assign(static_cast<std::size_t>(kFc) * kFeat, 0.f);
    fcb.assign(kFc, 0.f);
    hw.assign(static_cast<std::size_t>(kNumDigits) * kFc, 0.f);
    hb.assign(kNumDigits, 0.f);
  }

  void he_init(std::uint64_t seed) {
    Rng rng(seed);
    auto he = [&](std::vector<float>& w, double fan_in) {
      const double std = std::sqrt(2.0 / fan_in);
      for (auto& v : w) v = static_cast<float>(rng.normal() * std);
    };
    he(w1, 9);
    he(w2, 9.0 * kC1);
    he(fcw, kFeat);
    he(hw, kFc);
  }

  struct Cache {
    std::vector<float> input, act1, pool1, act2, pool2, hidden;
    std::vector<std::uint8_t> idx1, idx2;
    std::array<float, kNumDigits> logits{};
  };

  void forward(const ingest::RawDigitImage& img, Cache& c) const {
    using nn::conv3x3_forward;
    using nn::maxpool2x2_forward;
    using nn::pad_planes;
    using nn::relu_inplace;
    c.input.resize(ingest::kDigitPixels);
    for (int i = 0; i < ingest::kDigitPixels; ++i) c.input[i] = img.pixels[i] / 255.0f;
    std::vector<float> pad;
    pad_planes(c.input.data(), 1, kSide, kSide, pad);
    c.act1.resize(static_cast<std::size_t>(kC1) * kSide * kSide);
    conv3x3_forward(pad.data(), 1, kSide, kSide, w1.data(), b1.data(), kC1, c.act1.data());
    relu_inplace(c.act1.data(), c.act1.size());
    c.pool1.resize(static_cast<std::size_t>(kC1) * kH1 * kH1);
    c.idx1.resize(c.pool1.size());
    maxpool2x2_forward(c.act1.data(), kC1, kSide, kSide, c.pool1.data(), c.idx1.data());
    pad_planes(c.pool1.data(), kC1, kH1, kH1, pad);
    c.act2.resize(static_cast<std::size_t>(kC2) * kH1 * kH1);
    conv3x3_forward(pad.data(), kC1, kH1, kH1, w2.data(), b2.data(), kC2, c.act2.data());
    relu_inplace(c.act2.data(), c.act2.size());
    c.pool2.resize(kFeat);
    c.idx2.resize(kFeat);
    maxpool2x2_forward(c.act2.data(), kC2, kH1, kH1, c.pool2.data(), c.idx2.data());
    c.hidden.resize(kFc);
    for (int m = 0; m < kFc; ++m)
      c.hidden[m] =
          nn::dot(fcw.data() + static_cast<std::size_t>(m) * kFeat, c.pool2.data(), kFeat) +
          fcb[m];
    relu_inplace(c.hidden.data(), kFc);
    for (int d = 0; d < kNumDigits; ++d)
      c.logits[d] = nn::dot(hw.data() + static_cast<std::size_t>(d) * kFc, c.hidden.data(),
                            kFc) +
                    hb[d];
  }

  void backward(const Cache& c, const std::array<float, kNumDigits>& dlogits,
                AuxNet& grads) const {
    using nn::axpy;
    std::vector<float> dh(kFc, 0.f);
    for (int d = 0; d < kNumDigits; ++d) {
      grads.hb[d] += dlogits[d];
      axpy(dlogits[d], c.hidden.data(), grads.hw.data() + static_cast<std::size_t>(d) * kFc,
           kFc);
      axpy(dlogits[d], hw.data() + static_cast<std::size_t>(d) * kFc, dh.data(), kFc);
    }
    nn::relu_backward(c.hidden.data(), dh.data(), kFc);
    std::vector<float> dx(kFeat, 0.f);
    for (int m = 0; m < kFc; ++m) {
      grads.fcb[m] += dh[m];
      axpy(dh[m], c.pool2.data(), grads.fcw.data() + static_cast<std::size_t>(m) * kFeat,
           kFeat);
      axpy(dh[m], fcw.data() + static_cast<std::size_t>(m) * kFeat, dx.data(), kFeat);
    }
    std::vector<float> da2(c.act2.size(), 0.f);
    nn::maxpool2x2_backward(dx.data(), c.idx2.data(), kC2, kH1, kH1, da2.data());
    nn::relu_backward(c.act2.data(), da2.data(), da2.size());
    std::vector<float> pad, dp1(c.pool1.size(), 0.f);
    nn::pad_planes(c.pool1.data(), kC1, kH1, kH1, pad);
    nn::conv3x3_backward(pad.data(), kC1, kH1, kH1, w2.data(), kC2, da2.data(),
                         grads.w2.data(), grads.b2.data(), dp1.data());
    std::vector<float> da1(c.act1.size(), 0.f);
    nn::maxpool2x2_backward(dp1.data(), c.idx1.data(), kC1, kSide, kSide, da1.data());
    nn::relu_backward(c.act1.data(), da1.data(), da1.size());
    nn::pad_planes(c.input.data(), 1, kSide, kSide, pad);
    nn::conv3x3_backward(pad.data(), 1, kSide, kSide, w1.data(), kC1, da1.data(),
                         grads.w1.data(), grads.b1.data(), static_cast<float*>(nullptr));
  }

  int predict(const ingest::RawDigitImage& img, Cache& c) const {
    forward(img, c);
    int best = 0;
    for (int d = 1; d < kNumDigits; ++d)
      if (c.logits[d] > c.logits[best]) best = d;
    return best;
  }

  void zero() {
    for (auto* b : blocks()) std::fill(b->begin(), b->end(), 0.f);
  }
};

struct AuxAdam {
  AuxNet m, v;
  long t = 0;
  void step(AuxNet& p, AuxNet& g, float lr) {
    constexpr float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    t += 1;
    const float c1 = 1.f - std::pow(b1, static_cast<float>(t));
    const float c2 = 1.f - std::pow(b2, static_cast<float>(t));
    auto pb = p.blocks(), gb = g.blocks(), mb = m.blocks(), vb = v.blocks();
    for (int i = 0; i < 8; ++i) {
      float* pp = pb[i]->data();
      const float* gg = gb[i]->data();
      float* mm = mb[i]->data();
      float* vv = vb[i]->data();
      for (std::size_t j = 0; j < pb[i]->size(); ++j) {
        mm[j] = b1 * mm[j] + (1.f - b1) * gg[j];
        vv[j] = b2 * vv[j] + (1.f - b2) * gg[j] * gg[j];
        pp[j] -= lr * (mm[j] / c1) / (std::sqrt(vv[j] / c2) + eps);
      }
    }
  }
};

struct LabeledDigit {
  const ingest::RawDigitImage* image;
  Digit label;
};

std::vector<LabeledDigit> flatten(const ingest::DigitPools& pools) {
  std::vector<LabeledDigit> out;
  out.reserve(pools.total());
  for (int d = 0; d < kNumDigits; ++d)
    for (const auto& img : pools.pools[d])
      out.push_back({&img, static_cast<Digit>(d)});
  return out;
}

}  // namespace

HardPoolResult make_hard_pool(const ingest::DigitPools& train_pools,
                              const ingest::DigitPools& test_pools,
                              const HardPoolConfig& cfg) {
  const auto train = flatten(train_pools);
  const auto test = flatten(test_pools);
  if (train.empty() || test.empty()) throw EmptyPool("hard-pool source pools are empty");

  AuxNet net;
  net.he_init(derive_seed(cfg.seed, {0}));
  AuxNet grads;
  AuxAdam adam;
  Rng shuffle_rng(derive_seed(cfg.seed, {1}));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  AuxNet::Cache cache;
  double acc = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(static_cast<std::uint32_t>(i))]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.zero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = train[order[i]];
        net.forward(*ex.image, cache);
        float mx = cache.logits[0];
        for (float v : cache.logits) mx = std::max(mx, v);
        std::array<float, kNumDigits> p{};
        float sum = 0;
        for (int d = 0; d < kNumDigits; ++d) {
          p[d] = std::exp(cache.logits[d] - mx);
          sum += p[d];
        }
        for (int d = 0; d < kNumDigits; ++d) p[d] /= sum;
        p[ex.label] -= 1.f;
        net.backward(cache, p, grads);
      }
      const float inv = 1.f / static_cast<float>(end - start);
      for (auto* b : grads.blocks())
        for (auto& g : *b) g *= inv;
      adam.step(net, grads, cfg.lr);
    }

    std::size_t correct = 0;
    for (const auto& ex : test)
      if (net.predict(*ex.image, cache) == ex.label) ++correct;
    acc = static_cast<double>(correct) / static_cast<double>(test.size());
    if (acc >= cfg.band_lo && acc <= cfg.band_hi) {
      HardPoolResult result;
      result.pool.source_tag = test_pools.source_tag + ":hard";
      for (const auto& ex : test)
        if (net.predict(*ex.image, cache) != ex.label)
          result.pool.pools[ex.label].push_back(*ex.image);
      result.test_accuracy = acc;
      result.epochs_trained = epoch + 1;
      return result;
    }
  }
  throw TargetAccuracyUnreachable(
      "aux classifier test accuracy never entered [" + std::to_string(cfg.band_lo) + ", " +
      std::to_string(cfg.band_hi) + "] within " + std::to_string(cfg.max_epochs) +
      " epochs (last " + std::to_string(acc) + ")");
}

SequenceExample apply_hard_digit(RuleId rule, const DigitString& label,
                                 const ingest::DigitPools& pools,
                                 const ingest::DigitPools& hard_pool, Rng& rng) {
  std::vector<int> candidates;
  for (int k = 0; k < kSeqLen; ++k)
    if (!hard_pool.pools[label[k]].empty()) candidates.push_back(k);
  if (candidates.empty())
    throw NoHardDigitAvailable("no hard image for any digit of " + to_string(label));
  const int hard_k = candidates[rng.below(static_cast<std::uint32_t>(candidates.size()))];
  std::array<const ingest::RawDigitImage*, kSeqLen> parts{};
  for (int k = 0; k < kSeqLen; ++k)
    parts[k] = &draw_from_pool(k == hard_k ? hard_pool : pools, label[k], rng);
  return assemble(rule, label, parts);
}

}  // namespace ruleocr::synth
