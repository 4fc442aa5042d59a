#include "ruleocr/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "ruleocr/rules.hpp"

namespace ruleocr::train {

double alpha_at(const AlphaSchedule& schedule, int i, int total_epochs) {
  switch (schedule.kind) {
    case ScheduleKind::Fixed: return schedule.alpha;
    case ScheduleKind::AA:
      return std::exp(1.0 - static_cast<double>(total_epochs) / (i + 1));
    case ScheduleKind::AD:
      return 1.0 - std::exp(1.0 - static_cast<double>(total_epochs) / (i + 1));
  }
  return schedule.alpha;
}

Logits composite_logits_gradient(const ProbTable& p, const DigitString& label, RuleId rule,
                                 double alpha, int M, Rng& rng, ReinforceNorm norm) {
  Logits g = nn::logits_grad_ce(p, label);
  if (alpha == 0.0) return g;
  if (M <= 0) throw nn::LengthMismatch("reinforce gradient: no samples");

  // Fused equivalent of sample_sequences + reward + logits_grad_reinforce:
  // same draw order and the same reward-weighted counts, without
  // materialising M sequences per visit. Rewards come from the residue
  // automaton, which matches rules::verify on every 5-digit string.
  std::array<std::array<double, kNumDigits>, kSeqLen> cdf{};
  for (int k = 0; k < kSeqLen; ++k) {
    double acc = 0;
    for (int d = 0; d < kNumDigits; ++d) {
      acc += p[k][d];
      cdf[k][d] = acc;
    }
  }
  const rules::ResidueAutomaton& automaton = rules::residue_automaton(rule);
  std::array<std::array<double, kNumDigits>, kSeqLen> wc{};
  double total = 0;
  for (int j = 0; j < M; ++j) {
    DigitString s;
    for (int k = 0; k < kSeqLen; ++k) {
      const double u = rng.real01() * cdf[k][kNumDigits - 1];
      int d = 0;
      for (int t = 0; t < kNumDigits - 1; ++t) d += u >= cdf[k][t];
      s[k] = static_cast<Digit>(d);
    }
    if (!automaton.accepts(s)) continue;
    total += 1.0;
    for (int k = 0; k < kSeqLen; ++k) wc[k][s[k]] += 1.0;
  }
  const double scale =
      norm == ReinforceNorm::Average ? -1.0 / static_cast<double>(M) : -1.0;
  for (int k = 0; k < kSeqLen; ++k)
    for (int d = 0; d < kNumDigits; ++d) {
      const double gr = scale * (wc[k][d] - total * p[k][d]);
      g[k][d] = (1.0 - alpha) * g[k][d] + alpha * gr;
    }
  return g;
}

namespace {

template <typename T>
DigitString argmax_rows(const Logits& logits) {
  DigitString out{};
  for (int k = 0; k < kSeqLen; ++k) {
    int best = 0;
    for (int d = 1; d < kNumDigits; ++d)
      if (logits[k][d] > logits[k][best]) best = d;
    out[k] = static_cast<Digit>(best);
  }
  return out;
}

template <typename T>
Metrics evaluate_impl(const nn::ModelParamsT<T>& params,
                      std::span<const synth::SequenceExample> examples) {
  if (examples.empty()) throw EmptyEvalSet("evaluate called with no examples");
  constexpr std::size_t kChunk = 100;
  nn::BatchRunner<T> runner(kChunk);
  std::vector<nn::CacheT<T>> caches;
  std::vector<Logits> logits;
  std::vector<GrayImage> images;

  std::size_t seq_correct = 0, digit_correct = 0;
  double reward_sum = 0;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    const std::size_t end = std::min(examples.size(), start + kChunk);
    images.clear();
    for (std::size_t i = start; i < end; ++i) images.push_back(examples[i].image);
    runner.forward(params, images, caches, logits);
    for (std::size_t i = start; i < end; ++i) {
      const DigitString pred = argmax_rows<T>(logits[i - start]);
      int match = 0;
      for (int k = 0; k < kSeqLen; ++k)
        if (pred[k] == examples[i].label[k]) ++match;
      digit_correct += static_cast<std::size_t>(match);
      if (match == kSeqLen) ++seq_correct;
      reward_sum += rules::reward(examples[i].rule, pred);
    }
  }
  const double n = static_cast<double>(examples.size());
  Metrics m;
  m.seq_accuracy = seq_correct / n;
  m.per_digit_accuracy = digit_correct / (n * kSeqLen);
  m.mean_rule_reward = reward_sum / n;
  return m;
}

template <typename T>
TrainResult train_impl(const TrainConfig& cfg, const synth::Dataset& dataset, RuleId rule) {
  const std::size_t n = dataset.train.size();
  if (n == 0) throw EmptyEvalSet("training split is empty");

  auto params = nn::init_params<T>(derive_seed(cfg.seed, {0}));
  nn::AdamStateT<T> adam;
  Rng shuffle_rng(derive_seed(cfg.seed, {1}));

  nn::BatchRunner<T> runner(cfg.batch_size);
  std::vector<nn::CacheT<T>> caches;
  std::vector<Logits> logits;
  std::vector<GrayImage> images;
  std::vector<Logits> dlogits;
  nn::ModelGradsT<T> grads;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  nn::BlockSet<T> best_params;
  double best_val = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double alpha = alpha_at(cfg.schedule, epoch, cfg.epochs);
    const T lr = static_cast<T>(
        cfg.lr / std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every));

    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(static_cast<std::uint32_t>(i))]);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      images.clear();
      for (std::size_t i = start; i < end; ++i)
        images.push_back(dataset.train[order[i]].image);
      runner.forward(params, images, caches, logits);

      dlogits.resize(end - start);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& example = dataset.train[order[i]];
        for (const auto& row : logits[i - start])
          for (double v : row)
            if (!std::isfinite(v))
              throw NonFiniteLoss("non-finite logits at epoch " + std::to_string(epoch) +
                                  ", example " + std::to_string(i));
        const ProbTable p = nn::softmax_rows(logits[i - start]);
        Logits g;
        if (alpha == 0.0) {
          g = nn::logits_grad_ce(p, example.label);
        } else {
          // Per-visit stream: the baseline run consumes no draws, so alpha=0
          // stays bit-identical to a loop with no reward term at all.
          Rng sample_rng(derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(epoch),
                                                static_cast<std::uint64_t>(i)}));
          g = composite_logits_gradient(p, example.label, rule, alpha, cfg.M, sample_rng,
                                        cfg.reinforce_norm);
        }
        for (int k = 0; k < kSeqLen; ++k)
          for (int d = 0; d < kNumDigits; ++d) g[k][d] *= inv_batch;
        dlogits[i - start] = g;
      }

      grads.fill(T(0));
      runner.backward(caches, dlogits, grads);
      nn::adam_step(params, grads, adam, lr);
    }

    if (!params.all_finite())
      throw NonFiniteLoss("non-finite parameters after epoch " + std::to_string(epoch));
    Metrics m = evaluate_impl(params, dataset.val);
    m.epoch = epoch;
    result.history.push_back(m);
    // Earliest epoch wins ties, keeping the selection deterministic.
    if (cfg.select_best_val && m.seq_accuracy > best_val) {
      best_val = m.seq_accuracy;
      best_params = params;
    }
  }

  if (cfg.select_best_val) params = std::move(best_params);
  if constexpr (std::is_same_v<T, float>) {
    result.params = std::move(params);
  } else {
    result.params = nn::convert<float>(params);
  }
  return result;
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const synth::Dataset& dataset,
                        RuleId rule) {
  if (config.epochs <= 0 || config.batch_size <= 0 || config.M <= 0 ||
      config.lr_decay_every <= 0 || config.lr <= 0)
    throw std::invalid_argument("train config: epochs, batch size, M, lr and decay period must be positive");
  if (config.schedule.kind == ScheduleKind::Fixed &&
      (config.schedule.alpha < 0 || config.schedule.alpha > 1))
    throw std::invalid_argument("train config: fixed alpha must lie in [0,1]");
  if (config.precision == Precision::F64) return train_impl<double>(config, dataset, rule);
  return train_impl<float>(config, dataset, rule);
}

template <typename T>
DigitString predict(const nn::ModelParamsT<T>& params, const GrayImage& image) {
  nn::CacheT<T> cache;
  return argmax_rows<T>(nn::forward(params, image, cache));
}

template <typename T>
Metrics evaluate(const nn::ModelParamsT<T>& params,
                 std::span<const synth::SequenceExample> examples) {
  return evaluate_impl(params, examples);
}

template DigitString predict<float>(const nn::ModelParamsT<float>&, const GrayImage&);
template DigitString predict<double>(const nn::ModelParamsT<double>&, const GrayImage&);
template Metrics evaluate<float>(const nn::ModelParamsT<float>&,
                                 std::span<const synth::SequenceExample>);
template Metrics evaluate<double>(const nn::ModelParamsT<double>&,
                                  std::span<const synth::SequenceExample>);

}  // namespace ruleocr::train
