#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ruleocr/image.hpp"
#include "ruleocr/rng.hpp"
#include "ruleocr/types.hpp"

namespace ruleocr::nn {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Recognizer topology, fixed by the 28x112 input:
//   conv 16@3x3 (pad 1) -> relu -> maxpool 2x2 -> 16x14x56
//   conv 32@3x3 (pad 1) -> relu -> maxpool 2x2 -> 32x7x28
//   fc 6272 -> 256 -> relu
//   5 independent linear heads 256 -> 10
struct Shape {
  static constexpr int kH = GrayImage::kHeight;
  static constexpr int kW = GrayImage::kWidth;
  static constexpr int kC1 = 16;
  static constexpr int kC2 = 32;
  static constexpr int kH1 = kH / 2, kW1 = kW / 2;    // after first pool
  static constexpr int kH2 = kH / 4, kW2 = kW / 4;    // after second pool
  static constexpr int kFeat = kC2 * kH2 * kW2;       // 6272
  static constexpr int kFc = 256;
};

struct BlockInfo {
  const char* name;
  std::size_t size;
};

inline constexpr std::array<BlockInfo, 8> kBlockInfo = {{
    {"conv1_w", Shape::kC1 * 1 * 9},
    {"conv1_b", Shape::kC1},
    {"conv2_w", static_cast<std::size_t>(Shape::kC2) * Shape::kC1 * 9},
    {"conv2_b", Shape::kC2},
    {"fc_w", static_cast<std::size_t>(Shape::kFc) * Shape::kFeat},
    {"fc_b", Shape::kFc},
    {"head_w", static_cast<std::size_t>(kSeqLen) * kNumDigits * Shape::kFc},
    {"head_b", static_cast<std::size_t>(kSeqLen) * kNumDigits},
}};

// Parameters (and, with the same layout, gradients and Adam moments).
template <typename T>
struct BlockSet {
  std::vector<T> conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b, head_w, head_b;

  BlockSet() {
    auto it = kBlockInfo.begin();
    for (auto* b : blocks()) b->assign((it++)->size, T(0));
  }

  std::array<std::vector<T>*, 8> blocks() {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b, &head_w, &head_b};
  }
  std::array<const std::vector<T>*, 8> blocks() const {
    return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b, &head_w, &head_b};
  }
  std::size_t total_size() const {
    std::size_t n = 0;
    for (auto* b : blocks()) n += b->size();
    return n;
  }
  void fill(T v) {
    for (auto* b : blocks()) std::fill(b->begin(), b->end(), v);
  }
  bool all_finite() const;
};

template <typename T>
using ModelParamsT = BlockSet<T>;
template <typename T>
using ModelGradsT = BlockSet<T>;

using ModelParams = ModelParamsT<float>;

template <typename T>
struct AdamStateT {
  BlockSet<T> m;
  BlockSet<T> v;
  long t = 0;
};

template <typename To, typename From>
BlockSet<To> convert(const BlockSet<From>& in) {
  BlockSet<To> out;
  auto src = in.blocks();
  auto dst = out.blocks();
  for (int i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < src[i]->size(); ++j)
      (*dst[i])[j] = static_cast<To>((*src[i])[j]);
  return out;
}

// Intermediates of one forward pass, kept for the matching backward pass.
template <typename T>
struct CacheT {
  const ModelParamsT<T>* params = nullptr;
  std::vector<T> input;      // 1 x 28 x 112
  std::vector<T> act1;       // relu(conv1), 16 x 28 x 112
  std::vector<T> pool1;      // 16 x 14 x 56
  std::vector<std::uint8_t> pool1_idx;
  std::vector<T> act2;       // relu(conv2), 32 x 14 x 56
  std::vector<T> pool2;      // 32 x 7 x 28
  std::vector<std::uint8_t> pool2_idx;
  std::vector<T> hidden;     // relu(fc), 256
  std::vector<T> logits;     // 5 x 10
};

// He-normal weights (std = sqrt(2 / fan_in)), zero biases; deterministic.
template <typename T>
ModelParamsT<T> init_params(std::uint64_t seed);

template <typename T>
Logits forward(const ModelParamsT<T>& params, const GrayImage& image, CacheT<T>& cache);

// Gradients of all parameter blocks for d(loss)/d(logits); accumulates into
// `grads` so a batch can be summed in a fixed example order.
template <typename T>
void backward(const CacheT<T>& cache, const Logits& logits_grad, ModelGradsT<T>& grads);

ProbTable softmax_rows(const Logits& logits);

std::vector<DigitString> sample_sequences(const ProbTable& p, int num_samples, Rng& rng);

// d/d(logits) of -log p(label), i.e. p - onehot(label) per row.
Logits logits_grad_ce(const ProbTable& p, const DigitString& label);

// Score-function estimate of d/d(logits) of -E[r]: the mean over samples of
// -r_j (onehot(sample_j) - p). The caller applies its weighting.
Logits logits_grad_reinforce(const ProbTable& p, std::span<const DigitString> samples,
                             std::span<const double> rewards);

// Raw-sum variant of the same estimator (no 1/M).
Logits logits_grad_reinforce_sum(const ProbTable& p, std::span<const DigitString> samples,
                                 std::span<const double> rewards);

template <typename T>
void adam_step(ModelParamsT<T>& params, const ModelGradsT<T>& grads, AdamStateT<T>& state,
               T lr);

struct FdCheckConfig {
  RuleId rule = RuleId::Rule2;
  DigitString label{};
  double alpha = 0.5;
  int num_samples = 64;          // frozen REINFORCE samples
  std::uint64_t seed = 1;        // sample draw + parameter pick
  double epsilon = 1e-5;
  int params_per_block = 16;     // >= 100 total across the 8 blocks
  bool corrupt_conv2 = false;    // negative control: perturb conv2_w grads
};

// Max norm-relative deviation |analytic - numeric| / (max|analytic| + max|numeric|)
// between backward() and central finite differences of the composite loss
// with frozen samples, over the randomly chosen parameters.
double finite_diff_check(const ModelParamsT<double>& params, const GrayImage& image,
                         const FdCheckConfig& cfg);

// Checkpoint file: magic "ROCR", u32 version=1, u32 block count, then per
// block u32 name length, name bytes, u32 element count, and the elements as
// 32-bit little-endian IEEE floats in declaration order.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

// ---- batched engine used by the training loop ----------------------------

// Runs forward/backward for a span of images with the fc and head layers
// batched (single pass over the weight matrix per batch). Results per
// example are bit-identical to the single-example forward/backward.
template <typename T>
class BatchRunner {
 public:
  explicit BatchRunner(int capacity);

  // caches/logits are resized to images.size().
  void forward(const ModelParamsT<T>& params, std::span<const GrayImage> images,
               std::vector<CacheT<T>>& caches, std::vector<Logits>& logits);
  // dlogits[i] pairs with caches[i]; grads accumulated over examples in order.
  void backward(std::span<const CacheT<T>> caches, std::span<const Logits> dlogits,
                ModelGradsT<T>& grads);

 private:
  int capacity_;
  std::vector<const T*> xs_;  // per-example pooled-feature pointers
  std::vector<T> h_;          // [B][kFc]
  std::vector<T> dh_;         // [B][kFc]
  std::vector<T> dx_;         // [B][kFeat]
};

extern template struct BlockSet<float>;
extern template struct BlockSet<double>;
extern template ModelParamsT<float> init_params<float>(std::uint64_t);
extern template ModelParamsT<double> init_params<double>(std::uint64_t);
extern template Logits forward<float>(const ModelParamsT<float>&, const GrayImage&,
                                      CacheT<float>&);
extern template Logits forward<double>(const ModelParamsT<double>&, const GrayImage&,
                                       CacheT<double>&);
extern template void backward<float>(const CacheT<float>&, const Logits&,
                                     ModelGradsT<float>&);
extern template void backward<double>(const CacheT<double>&, const Logits&,
                                      ModelGradsT<double>&);
extern template void adam_step<float>(ModelParamsT<float>&, const ModelGradsT<float>&,
                                      AdamStateT<float>&, float);
extern template void adam_step<double>(ModelParamsT<double>&, const ModelGradsT<double>&,
                                       AdamStateT<double>&, double);
extern template class BatchRunner<float>;
extern template class BatchRunner<double>;

}  // namespace ruleocr::nn
