#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ruleocr/nn.hpp"
#include "ruleocr/synth.hpp"
#include "ruleocr/types.hpp"

namespace ruleocr::train {

struct EmptyEvalSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ScheduleKind { Fixed, AA, AD };

struct AlphaSchedule {
  ScheduleKind kind = ScheduleKind::Fixed;
  double alpha = 0.05;  // used by Fixed only
};

enum class Precision { F32, F64 };
enum class ReinforceNorm { Average, RawSum };

struct TrainConfig {
  AlphaSchedule schedule{};
  int M = 10000;
  double lr = 1e-3;
  int lr_decay_every = 60;
  double lr_decay_factor = 10.0;
  int epochs = 200;
  int batch_size = 100;
  std::uint64_t seed = 1;
  Precision precision = Precision::F32;
  ReinforceNorm reinforce_norm = ReinforceNorm::Average;
  // Return the params of the best-val-accuracy epoch instead of the last one.
  bool select_best_val = false;
};

struct Metrics {
  double seq_accuracy = 0;        // all five digits correct
  double per_digit_accuracy = 0;  // correct digits / 5N
  double mean_rule_reward = 0;    // rule reward of the predictions
  int epoch = 0;
};

// Fixed -> its constant; AA -> exp(1 - T/(i+1)); AD -> 1 - AA.
double alpha_at(const AlphaSchedule& schedule, int i, int total_epochs);

// (1-alpha) * grad_ce + alpha * grad_reinforce over M fresh samples.
Logits composite_logits_gradient(const ProbTable& p, const DigitString& label, RuleId rule,
                                 double alpha, int M, Rng& rng,
                                 ReinforceNorm norm = ReinforceNorm::Average);

struct TrainResult {
  nn::ModelParams params;        // last-epoch parameters
  std::vector<Metrics> history;  // validation metrics, one entry per epoch
};

TrainResult train_model(const TrainConfig& config, const synth::Dataset& dataset,
                        RuleId rule);

template <typename T>
DigitString predict(const nn::ModelParamsT<T>& params, const GrayImage& image);

template <typename T>
Metrics evaluate(const nn::ModelParamsT<T>& params,
                 std::span<const synth::SequenceExample> examples);

extern template DigitString predict<float>(const nn::ModelParamsT<float>&, const GrayImage&);
extern template DigitString predict<double>(const nn::ModelParamsT<double>&,
                                            const GrayImage&);
extern template Metrics evaluate<float>(const nn::ModelParamsT<float>&,
                                        std::span<const synth::SequenceExample>);
extern template Metrics evaluate<double>(const nn::ModelParamsT<double>&,
                                         std::span<const synth::SequenceExample>);

}  // namespace ruleocr::train
