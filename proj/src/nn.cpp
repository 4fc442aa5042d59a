#include "ruleocr/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "ruleocr/nn_kernels.hpp"
#include "ruleocr/rules.hpp"

namespace ruleocr::nn {

namespace {

template <typename T>
struct Workspace {
  std::vector<T> pad_in, pad_p1;   // padded conv inputs
  std::vector<T> da1, dp1, da2;    // conv-side gradient scratch
};

template <typename T>
void trunk_forward(const ModelParamsT<T>& params, const GrayImage& image, CacheT<T>& cache,
                   Workspace<T>& ws) {
  using S = Shape;
  cache.params = &params;
  cache.input.resize(GrayImage::kPixels);
  for (std::size_t i = 0; i < GrayImage::kPixels; ++i)
    cache.input[i] = static_cast<T>(image.pixels[i]);

  cache.act1.resize(static_cast<std::size_t>(S::kC1) * S::kH * S::kW);
  pad_planes(cache.input.data(), 1, S::kH, S::kW, ws.pad_in);
  conv3x3_forward(ws.pad_in.data(), 1, S::kH, S::kW, params.conv1_w.data(),
                  params.conv1_b.data(), S::kC1, cache.act1.data());
  relu_inplace(cache.act1.data(), cache.act1.size());

  cache.pool1.resize(static_cast<std::size_t>(S::kC1) * S::kH1 * S::kW1);
  cache.pool1_idx.resize(cache.pool1.size());
  maxpool2x2_forward(cache.act1.data(), S::kC1, S::kH, S::kW, cache.pool1.data(),
                     cache.pool1_idx.data());

  cache.act2.resize(static_cast<std::size_t>(S::kC2) * S::kH1 * S::kW1);
  pad_planes(cache.pool1.data(), S::kC1, S::kH1, S::kW1, ws.pad_p1);
  conv3x3_forward(ws.pad_p1.data(), S::kC1, S::kH1, S::kW1, params.conv2_w.data(),
                  params.conv2_b.data(), S::kC2, cache.act2.data());
  relu_inplace(cache.act2.data(), cache.act2.size());

  cache.pool2.resize(S::kFeat);
  cache.pool2_idx.resize(S::kFeat);
  maxpool2x2_forward(cache.act2.data(), S::kC2, S::kH1, S::kW1, cache.pool2.data(),
                     cache.pool2_idx.data());
}

template <typename T>
void trunk_backward(const CacheT<T>& cache, const T* dpool2, ModelGradsT<T>& grads,
                    Workspace<T>& ws) {
  using S = Shape;
  const auto& params = *cache.params;

  ws.da2.assign(cache.act2.size(), T(0));
  maxpool2x2_backward(dpool2, cache.pool2_idx.data(), S::kC2, S::kH1, S::kW1,
                      ws.da2.data());
  relu_backward(cache.act2.data(), ws.da2.data(), ws.da2.size());

  ws.dp1.assign(cache.pool1.size(), T(0));
  pad_planes(cache.pool1.data(), S::kC1, S::kH1, S::kW1, ws.pad_p1);
  conv3x3_backward(ws.pad_p1.data(), S::kC1, S::kH1, S::kW1, params.conv2_w.data(),
                   S::kC2, ws.da2.data(), grads.conv2_w.data(), grads.conv2_b.data(),
                   ws.dp1.data());

  ws.da1.assign(cache.act1.size(), T(0));
  maxpool2x2_backward(ws.dp1.data(), cache.pool1_idx.data(), S::kC1, S::kH, S::kW,
                      ws.da1.data());
  relu_backward(cache.act1.data(), ws.da1.data(), ws.da1.size());

  pad_planes(cache.input.data(), 1, S::kH, S::kW, ws.pad_in);
  conv3x3_backward(ws.pad_in.data(), 1, S::kH, S::kW, params.conv1_w.data(), S::kC1,
                   ws.da1.data(), grads.conv1_w.data(), grads.conv1_b.data(),
                   static_cast<T*>(nullptr));
}

// The fc layer is a 256 x 6272 matmul against up to a batch of features, and
// is where most of the arithmetic lives. The three kernels below tile it
// 4 weight rows x 4 examples over 784-element strips so both operands stay in
// L2 and each output cell is one fixed chain of fused multiply-adds. A cell
// only ever sees its own row and column, so results do not depend on the
// batch size and batched passes match single-example passes bit for bit.
constexpr int kStrip = 784;
constexpr int kMT = 4;
constexpr int kBT = 4;
static_assert(Shape::kFeat % kStrip == 0);
static_assert(Shape::kFc % kMT == 0);

#ifdef RULEOCR_VEC_KERNELS

template <typename T>
T hfold(typename detail::Vec<T>::type v) {
  T s = v[0];
  for (std::size_t k = 1; k < detail::Vec<T>::lanes; ++k) s += v[k];
  return s;
}

// One m-tile x b-tile pass over a strip; BB is compile time so the
// accumulators unroll into registers.
template <int BB, typename T>
void fc_fwd_tile(const T* w, const T* const* xs, std::size_t b0, int m0, int s0, T* h) {
  using S = Shape;
  using V = typename detail::Vec<T>::type;
  constexpr int L = static_cast<int>(detail::Vec<T>::lanes);
  static_assert(kStrip % L == 0);
  V acc[kMT][BB] = {};
  for (int c = s0; c < s0 + kStrip; c += L) {
    V xv[BB];
    for (int bj = 0; bj < BB; ++bj) xv[bj] = detail::vload(xs[b0 + bj] + c);
    for (int mj = 0; mj < kMT; ++mj) {
      const V wv = detail::vload(w + static_cast<std::size_t>(m0 + mj) * S::kFeat + c);
      for (int bj = 0; bj < BB; ++bj) acc[mj][bj] += wv * xv[bj];
    }
  }
  for (int mj = 0; mj < kMT; ++mj)
    for (int bj = 0; bj < BB; ++bj)
      h[(b0 + bj) * S::kFc + m0 + mj] += hfold<T>(acc[mj][bj]);
}

// h[b][m] += sum_c W[m][c] * x[b][c], h pre-seeded with the bias.
template <typename T>
void fc_forward(const T* w, const T* const* xs, std::size_t n, T* h) {
  using S = Shape;
  for (int s0 = 0; s0 < S::kFeat; s0 += kStrip) {
    for (int m0 = 0; m0 < S::kFc; m0 += kMT) {
      std::size_t b0 = 0;
      for (; b0 + kBT <= n; b0 += kBT) fc_fwd_tile<kBT>(w, xs, b0, m0, s0, h);
      for (; b0 < n; ++b0) fc_fwd_tile<1>(w, xs, b0, m0, s0, h);
    }
  }
}

// dw[m][c] += sum_b dh[b][m] * x[b][c]
template <typename T>
void fc_grad_w(const T* const* xs, const T* dh, std::size_t n, T* dw) {
  using S = Shape;
  using V = typename detail::Vec<T>::type;
  constexpr int L = static_cast<int>(detail::Vec<T>::lanes);
  for (int s0 = 0; s0 < S::kFeat; s0 += kStrip) {
    for (int m0 = 0; m0 < S::kFc; m0 += kMT) {
      for (int c = s0; c < s0 + kStrip; c += L) {
        V acc[kMT];
        for (int mj = 0; mj < kMT; ++mj)
          acc[mj] = detail::vload(dw + static_cast<std::size_t>(m0 + mj) * S::kFeat + c);
        for (std::size_t b = 0; b < n; ++b) {
          const V xv = detail::vload(xs[b] + c);
          for (int mj = 0; mj < kMT; ++mj) acc[mj] += dh[b * S::kFc + m0 + mj] * xv;
        }
        for (int mj = 0; mj < kMT; ++mj)
          detail::vstore(dw + static_cast<std::size_t>(m0 + mj) * S::kFeat + c, acc[mj]);
      }
    }
  }
}

// dx[b][c] += sum_m dh[b][m] * W[m][c]
template <int BB, typename T>
void fc_dx_tile(const T* w, const T* dh, std::size_t b0, int s0, T* dx) {
  using S = Shape;
  using V = typename detail::Vec<T>::type;
  constexpr int L = static_cast<int>(detail::Vec<T>::lanes);
  for (int c = s0; c < s0 + kStrip; c += L) {
    V acc[BB] = {};
    for (int m = 0; m < S::kFc; ++m) {
      const V wv = detail::vload(w + static_cast<std::size_t>(m) * S::kFeat + c);
      for (int bj = 0; bj < BB; ++bj) acc[bj] += dh[(b0 + bj) * S::kFc + m] * wv;
    }
    for (int bj = 0; bj < BB; ++bj) {
      T* out = dx + (b0 + bj) * S::kFeat + c;
      detail::vstore(out, detail::vload(out) + acc[bj]);
    }
  }
}

template <typename T>
void fc_grad_x(const T* w, const T* dh, std::size_t n, T* dx) {
  using S = Shape;
  for (int s0 = 0; s0 < S::kFeat; s0 += kStrip) {
    std::size_t b0 = 0;
    for (; b0 + kBT <= n; b0 += kBT) fc_dx_tile<kBT>(w, dh, b0, s0, dx);
    for (; b0 < n; ++b0) fc_dx_tile<1>(w, dh, b0, s0, dx);
  }
}

#else

template <typename T>
void fc_forward(const T* w, const T* const* xs, std::size_t n, T* h) {
  using S = Shape;
  for (std::size_t b = 0; b < n; ++b)
    for (int m = 0; m < S::kFc; ++m)
      h[b * S::kFc + m] +=
          dot(w + static_cast<std::size_t>(m) * S::kFeat, xs[b], S::kFeat);
}

template <typename T>
void fc_grad_w(const T* const* xs, const T* dh, std::size_t n, T* dw) {
  using S = Shape;
  for (int m = 0; m < S::kFc; ++m)
    for (std::size_t b = 0; b < n; ++b)
      axpy(dh[b * S::kFc + m], xs[b], dw + static_cast<std::size_t>(m) * S::kFeat,
           static_cast<std::size_t>(S::kFeat));
}

template <typename T>
void fc_grad_x(const T* w, const T* dh, std::size_t n, T* dx) {
  using S = Shape;
  for (std::size_t b = 0; b < n; ++b)
    for (int m = 0; m < S::kFc; ++m)
      axpy(dh[b * S::kFc + m], w + static_cast<std::size_t>(m) * S::kFeat,
           dx + b * S::kFeat, static_cast<std::size_t>(S::kFeat));
}

#endif

}  // namespace

template <typename T>
bool BlockSet<T>::all_finite() const {
  for (auto* b : blocks())
    for (T v : *b)
      if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <typename T>
ModelParamsT<T> init_params(std::uint64_t seed) {
  ModelParamsT<T> p;
  Rng rng(seed);
  const double fan_in[8] = {9, 0, 9.0 * Shape::kC1, 0, Shape::kFeat, 0, Shape::kFc, 0};
  auto blocks = p.blocks();
  for (int i = 0; i < 8; ++i) {
    if (fan_in[i] == 0) continue;  // biases stay zero, no draws consumed
    const double std = std::sqrt(2.0 / fan_in[i]);
    for (auto& v : *blocks[i]) v = static_cast<T>(rng.normal() * std);
  }
  return p;
}

template <typename T>
BatchRunner<T>::BatchRunner(int capacity) : capacity_(capacity) {
  h_.reserve(static_cast<std::size_t>(capacity) * Shape::kFc);
  dh_.reserve(static_cast<std::size_t>(capacity) * Shape::kFc);
  dx_.reserve(static_cast<std::size_t>(capacity) * Shape::kFeat);
}

template <typename T>
void BatchRunner<T>::forward(const ModelParamsT<T>& params, std::span<const GrayImage> images,
                             std::vector<CacheT<T>>& caches, std::vector<Logits>& logits) {
  using S = Shape;
  const std::size_t n = images.size();
  caches.resize(n);
  logits.resize(n);
  static thread_local Workspace<T> ws;
  for (std::size_t b = 0; b < n; ++b) trunk_forward(params, images[b], caches[b], ws);

  xs_.resize(n);
  for (std::size_t b = 0; b < n; ++b) xs_[b] = caches[b].pool2.data();
  h_.resize(n * S::kFc);
  for (std::size_t b = 0; b < n; ++b)
    std::copy(params.fc_b.begin(), params.fc_b.end(), h_.begin() + b * S::kFc);
  fc_forward(params.fc_w.data(), xs_.data(), n, h_.data());
  relu_inplace(h_.data(), h_.size());

  for (std::size_t b = 0; b < n; ++b) {
    const T* h = h_.data() + b * S::kFc;
    auto& cache = caches[b];
    cache.hidden.assign(h, h + S::kFc);
    cache.logits.resize(kSeqLen * kNumDigits);
    for (int k = 0; k < kSeqLen; ++k) {
      for (int d = 0; d < kNumDigits; ++d) {
        const int row = k * kNumDigits + d;
        const T v =
            dot(params.head_w.data() + static_cast<std::size_t>(row) * S::kFc, h, S::kFc) +
            params.head_b[row];
        cache.logits[row] = v;
        logits[b][k][d] = static_cast<double>(v);
      }
    }
  }
}

template <typename T>
void BatchRunner<T>::backward(std::span<const CacheT<T>> caches,
                              std::span<const Logits> dlogits, ModelGradsT<T>& grads) {
  using S = Shape;
  const std::size_t n = caches.size();
  if (dlogits.size() != n) throw LengthMismatch("backward: caches/dlogits size differs");
  if (n == 0) return;
  const auto& params = *caches[0].params;

  dh_.assign(n * S::kFc, T(0));
  for (std::size_t b = 0; b < n; ++b) {
    const T* h = caches[b].hidden.data();
    T* dh = dh_.data() + b * S::kFc;
    for (int k = 0; k < kSeqLen; ++k) {
      for (int d = 0; d < kNumDigits; ++d) {
        const int row = k * kNumDigits + d;
        const T g = static_cast<T>(dlogits[b][k][d]);
        grads.head_b[row] += g;
        axpy(g, h, grads.head_w.data() + static_cast<std::size_t>(row) * S::kFc, S::kFc);
        axpy(g, params.head_w.data() + static_cast<std::size_t>(row) * S::kFc, dh, S::kFc);
      }
    }
    relu_backward(h, dh, S::kFc);
    for (int m = 0; m < S::kFc; ++m) grads.fc_b[m] += dh[m];
  }

  xs_.resize(n);
  for (std::size_t b = 0; b < n; ++b) xs_[b] = caches[b].pool2.data();
  fc_grad_w(xs_.data(), dh_.data(), n, grads.fc_w.data());
  dx_.assign(n * S::kFeat, T(0));
  fc_grad_x(params.fc_w.data(), dh_.data(), n, dx_.data());

  static thread_local Workspace<T> ws;
  for (std::size_t b = 0; b < n; ++b)
    trunk_backward(caches[b], dx_.data() + b * S::kFeat, grads, ws);
}

namespace {
template <typename T>
BatchRunner<T>& single_runner() {
  static thread_local BatchRunner<T> runner(1);
  return runner;
}
}  // namespace

template <typename T>
Logits forward(const ModelParamsT<T>& params, const GrayImage& image, CacheT<T>& cache) {
  std::vector<CacheT<T>> caches;
  std::vector<Logits> logits;
  single_runner<T>().forward(params, std::span(&image, 1), caches, logits);
  cache = std::move(caches[0]);
  return logits[0];
}

template <typename T>
void backward(const CacheT<T>& cache, const Logits& logits_grad, ModelGradsT<T>& grads) {
  single_runner<T>().backward(std::span(&cache, 1), std::span(&logits_grad, 1), grads);
}

ProbTable softmax_rows(const Logits& logits) {
  ProbTable p{};
  for (int k = 0; k < kSeqLen; ++k) {
    double mx = logits[k][0];
    for (double v : logits[k]) mx = std::max(mx, v);
    double sum = 0;
    for (int d = 0; d < kNumDigits; ++d) {
      p[k][d] = std::exp(logits[k][d] - mx);
      sum += p[k][d];
    }
    for (int d = 0; d < kNumDigits; ++d) p[k][d] /= sum;
  }
  return p;
}

std::vector<DigitString> sample_sequences(const ProbTable& p, int num_samples, Rng& rng) {
  std::array<std::array<double, kNumDigits>, kSeqLen> cdf{};
  for (int k = 0; k < kSeqLen; ++k) {
    double acc = 0;
    for (int d = 0; d < kNumDigits; ++d) {
      acc += p[k][d];
      cdf[k][d] = acc;
    }
  }
  std::vector<DigitString> out(static_cast<std::size_t>(num_samples));
  for (auto& seq : out) {
    for (int k = 0; k < kSeqLen; ++k) {
      const double u = rng.real01() * cdf[k][kNumDigits - 1];
      // branchless first-index-with-u<cdf (cdf is nondecreasing)
      int d = 0;
      for (int t = 0; t < kNumDigits - 1; ++t) d += u >= cdf[k][t];
      seq[k] = static_cast<Digit>(d);
    }
  }
  return out;
}

Logits logits_grad_ce(const ProbTable& p, const DigitString& label) {
  Logits g{};
  for (int k = 0; k < kSeqLen; ++k) {
    for (int d = 0; d < kNumDigits; ++d) g[k][d] = p[k][d];
    g[k][label[k]] -= 1.0;
  }
  return g;
}

namespace {
Logits reinforce_impl(const ProbTable& p, std::span<const DigitString> samples,
                      std::span<const double> rewards, bool average) {
  if (samples.size() != rewards.size())
    throw LengthMismatch("reinforce gradient: samples/rewards length differs");
  if (samples.empty()) throw LengthMismatch("reinforce gradient: no samples");
  // sum_j r_j (onehot(s_j) - p) collapses to reward-weighted digit counts
  std::array<std::array<double, kNumDigits>, kSeqLen> wc{};
  double total = 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const double r = rewards[j];
    if (r == 0) continue;
    total += r;
    for (int k = 0; k < kSeqLen; ++k) wc[k][samples[j][k]] += r;
  }
  const double scale = average ? -1.0 / static_cast<double>(samples.size()) : -1.0;
  Logits g{};
  for (int k = 0; k < kSeqLen; ++k)
    for (int d = 0; d < kNumDigits; ++d) g[k][d] = scale * (wc[k][d] - total * p[k][d]);
  return g;
}
}  // namespace

Logits logits_grad_reinforce(const ProbTable& p, std::span<const DigitString> samples,
                             std::span<const double> rewards) {
  return reinforce_impl(p, samples, rewards, true);
}

Logits logits_grad_reinforce_sum(const ProbTable& p, std::span<const DigitString> samples,
                                 std::span<const double> rewards) {
  return reinforce_impl(p, samples, rewards, false);
}

template <typename T>
void adam_step(ModelParamsT<T>& params, const ModelGradsT<T>& grads, AdamStateT<T>& state,
               T lr) {
  constexpr T b1 = T(0.9), b2 = T(0.999), eps = T(1e-8);
  state.t += 1;
  const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), state.t));
  const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), state.t));
  auto pb = params.blocks();
  auto gb = grads.blocks();
  auto mb = state.m.blocks();
  auto vb = state.v.blocks();
  for (int i = 0; i < 8; ++i) {
    T* p = pb[i]->data();
    const T* g = gb[i]->data();
    T* m = mb[i]->data();
    T* v = vb[i]->data();
    const std::size_t n = pb[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T mhat = m[j] / c1;
      const T vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

double composite_loss(const ModelParamsT<double>& params, const GrayImage& image,
                      const DigitString& label, double alpha,
                      std::span<const DigitString> samples,
                      std::span<const double> rewards) {
  CacheT<double> cache;
  const Logits logits = forward(params, image, cache);
  const ProbTable p = softmax_rows(logits);
  double ce = 0;
  for (int k = 0; k < kSeqLen; ++k) ce -= std::log(p[k][label[k]]);
  double surrogate = 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (rewards[j] == 0) continue;
    double lp = 0;
    for (int k = 0; k < kSeqLen; ++k) lp += std::log(p[k][samples[j][k]]);
    surrogate -= rewards[j] * lp;
  }
  surrogate /= static_cast<double>(samples.size());
  return (1.0 - alpha) * ce + alpha * surrogate;
}

}  // namespace

double finite_diff_check(const ModelParamsT<double>& params, const GrayImage& image,
                         const FdCheckConfig& cfg) {
  // Freeze the surrogate's samples so the loss is a fixed differentiable
  // function of the parameters.
  CacheT<double> cache;
  const Logits logits = forward(params, image, cache);
  const ProbTable p0 = softmax_rows(logits);
  Rng sample_rng(derive_seed(cfg.seed, {0}));
  const auto samples = sample_sequences(p0, cfg.num_samples, sample_rng);
  std::vector<double> rewards(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j)
    rewards[j] = rules::reward(cfg.rule, samples[j]);

  // With the samples held constant, d/dlogits of -(1/M) sum_j r_j log p(s_j)
  // is (1/M) sum_j r_j (p - onehot(s_j)), which is logits_grad_reinforce.
  Logits dlog{};
  {
    const Logits gce = logits_grad_ce(p0, cfg.label);
    const Logits gr = logits_grad_reinforce(p0, samples, rewards);
    for (int k = 0; k < kSeqLen; ++k)
      for (int d = 0; d < kNumDigits; ++d)
        dlog[k][d] = (1.0 - cfg.alpha) * gce[k][d] + cfg.alpha * gr[k][d];
  }
  ModelGradsT<double> grads;
  backward(cache, dlog, grads);
  if (cfg.corrupt_conv2)
    for (auto& g : grads.conv2_w) g = g * 1.05 + 1e-3;

  Rng pick_rng(derive_seed(cfg.seed, {1}));
  auto work = params;  // mutable copy for the +/- epsilon evaluations
  auto wb = work.blocks();
  auto gb = grads.blocks();
  std::vector<double> analytic, numeric;
  for (int i = 0; i < 8; ++i) {
    const std::size_t size = wb[i]->size();
    std::vector<std::size_t> picks;
    if (size <= static_cast<std::size_t>(cfg.params_per_block)) {
      picks.resize(size);
      for (std::size_t j = 0; j < size; ++j) picks[j] = j;
    } else {
      std::unordered_set<std::size_t> seen;
      while (picks.size() < static_cast<std::size_t>(cfg.params_per_block)) {
        const std::size_t j = pick_rng.below(static_cast<std::uint32_t>(size));
        if (seen.insert(j).second) picks.push_back(j);
      }
    }
    for (std::size_t j : picks) {
      double& w = (*wb[i])[j];
      const double saved = w;
      w = saved + cfg.epsilon;
      const double lp = composite_loss(work, image, cfg.label, cfg.alpha, samples, rewards);
      w = saved - cfg.epsilon;
      const double lm = composite_loss(work, image, cfg.label, cfg.alpha, samples, rewards);
      w = saved;
      numeric.push_back((lp - lm) / (2.0 * cfg.epsilon));
      analytic.push_back((*gb[i])[j]);
    }
  }

  double amax = 0, nmax = 0, dmax = 0;
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    amax = std::max(amax, std::abs(analytic[j]));
    nmax = std::max(nmax, std::abs(numeric[j]));
    dmax = std::max(dmax, std::abs(analytic[j] - numeric[j]));
  }
  const double denom = amax + nmax;
  if (denom == 0) return dmax == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return dmax / denom;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& buf, std::size_t& pos) {
  if (pos + 4 > buf.size()) throw ShapeMismatch("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

constexpr char kMagic[4] = {'R', 'O', 'C', 'R'};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, 1);
  put_u32(out, 8);
  auto blocks = params.blocks();
  for (int i = 0; i < 8; ++i) {
    const std::string name = kBlockInfo[i].name;
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(blocks[i]->size()));
    for (float v : *blocks[i]) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw ShapeMismatch("checkpoint magic mismatch");
  pos = 4;
  if (get_u32(buf, pos) != 1) throw ShapeMismatch("unsupported checkpoint version");
  if (get_u32(buf, pos) != 8) throw ShapeMismatch("unexpected block count");
  ModelParams params;
  auto blocks = params.blocks();
  for (int i = 0; i < 8; ++i) {
    const std::uint32_t name_len = get_u32(buf, pos);
    if (pos + name_len > buf.size()) throw ShapeMismatch("checkpoint truncated");
    const std::string name(buf.data() + pos, name_len);
    pos += name_len;
    if (name != kBlockInfo[i].name) throw ShapeMismatch("unexpected block name: " + name);
    const std::uint32_t count = get_u32(buf, pos);
    if (count != blocks[i]->size()) throw ShapeMismatch("block size mismatch: " + name);
    for (std::uint32_t j = 0; j < count; ++j)
      (*blocks[i])[j] = std::bit_cast<float>(get_u32(buf, pos));
  }
  if (pos != buf.size()) throw ShapeMismatch("trailing bytes in checkpoint");
  return params;
}

template struct BlockSet<float>;
template struct BlockSet<double>;
template ModelParamsT<float> init_params<float>(std::uint64_t);
template ModelParamsT<double> init_params<double>(std::uint64_t);
template Logits forward<float>(const ModelParamsT<float>&, const GrayImage&, CacheT<float>&);
template Logits forward<double>(const ModelParamsT<double>&, const GrayImage&,
                                CacheT<double>&);
template void backward<float>(const CacheT<float>&, const Logits&, ModelGradsT<float>&);
template void backward<double>(const CacheT<double>&, const Logits&, ModelGradsT<double>&);
template void adam_step<float>(ModelParamsT<float>&, const ModelGradsT<float>&,
                               AdamStateT<float>&, float);
template void adam_step<double>(ModelParamsT<double>&, const ModelGradsT<double>&,
                                AdamStateT<double>&, double);
template class BatchRunner<float>;
template class BatchRunner<double>;

}  // namespace ruleocr::nn
