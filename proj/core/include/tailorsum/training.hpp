#pragma once

// Losses, the analytic backward pass, Adagrad, and the two-phase training
// loop (teacher-forced NLL, then self-critical fine-tuning).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tailorsum/data.hpp"
#include "tailorsum/model.hpp"

namespace tailorsum {

inline constexpr double kLogFloor = 1e-12;

struct LossResult {
  double nll = 0.0;       // -sum_t log p(y_t)
  double coverage = 0.0;  // sum_t sum_i min(a_i^t, cov_i^t)
  double loss = 0.0;      // nll + coverage_weight * coverage
  std::size_t tokens = 0;
  // Number of steps whose target probability fell below kLogFloor.
  std::size_t floored = 0;
  // Per-step contributions to `loss`, in target order.
  Vec step_losses;

  double per_token_nll() const { return tokens == 0 ? 0.0 : nll / static_cast<double>(tokens); }
};

// Teacher-forced loss of `targets` given `source`. When `grads` is non-null
// the gradient of `scale * loss` is accumulated into it. `boost` may be empty.
LossResult sequence_loss(const ModelParams& params, std::span<const TokenId> source,
                         std::span<const TokenId> targets, double coverage_weight, double scale,
                         ModelParams* grads, std::span<const double> boost = {});

LossResult nll_loss(const ModelParams& params, const EncodedExample& example,
                    double coverage_weight, ModelParams* grads);

struct Rollout {
  enum class Mode { sampled, greedy };

  std::vector<TokenId> tokens;
  Vec step_log_probs;
  Mode mode = Mode::greedy;

  double log_prob_sum() const;
};

// Next-token distribution given the tokens produced so far.
using NextDistribution = std::function<Vec(std::span<const TokenId> prefix)>;

// Draws each token from the step distribution with `sampler`, or takes the
// argmax (lowest id on ties) when `sampler` is null. `banned` ids are never
// chosen. Log-probabilities are those of the unmasked distribution, floored
// at kLogFloor. Stops after STOP or `max_length` tokens.
Rollout rollout(const NextDistribution& next, std::size_t max_length, Rng* sampler,
                std::span<const TokenId> banned = {});

// Ids a decoder must never emit: PAD, START and every control token.
std::vector<TokenId> banned_ids(const Vocabulary& vocab);
std::vector<TokenId> banned_ids(std::size_t vocab_size, std::span<const TokenId> control_ids);

// Sampled and greedy rollouts of the unboosted model on one article.
std::pair<Rollout, Rollout> scst_rollout(const ModelParams& params,
                                         std::span<const TokenId> source, Rng& sampler,
                                         std::size_t max_length,
                                         std::span<const TokenId> banned = {});

using RolloutReward = std::function<double(const Rollout&)>;

struct RlLossResult {
  double loss = 0.0;
  double reward_sampled = 0.0;
  double reward_greedy = 0.0;
  // r(y^b) - r(y^s): dL_rl / d log p(y^s_t), a constant for every step.
  double grad_scale = 0.0;
};

// L_rl = [r(y^b) - r(y^s)] * sum_t log p(y^s_t). Reward failures are
// rethrown as std::runtime_error naming `article_id`.
RlLossResult rl_loss(const RolloutReward& reward, const Rollout& sampled, const Rollout& greedy,
                     std::string_view article_id = {});

// (1 - alpha) * nll + alpha * rl; alpha must lie in [0, 1].
double combined_loss(double nll, double rl, double alpha);

struct AdagradState {
  Vec accumulators;  // flat layout, see model.hpp
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;

  static AdagradState create(const ModelParams& params, double learning_rate = 0.15,
                             double initial_accumulator = 0.1);
  bool operator==(const AdagradState&) const = default;
};

struct StepStatus {
  bool applied = true;
  std::string diagnostic;
};

// acc += g^2; theta -= lr * g / sqrt(acc). A non-finite gradient rejects the
// whole step and leaves params and state untouched.
StepStatus adagrad_step(ModelParams& params, const ModelParams& grads, AdagradState& state);

struct TrainConfig {
  double alpha = 0.9;  // weight of L_rl during the fine-tuning phase
  double learning_rate = 0.15;
  double initial_accumulator = 0.1;
  std::size_t pretrain_iterations = 0;  // alpha = 0 phase
  std::size_t rl_iterations = 0;        // alpha = `alpha` phase
  std::uint64_t seed = 1;
  double coverage_weight = 1.0;  // 0 switches the coverage loss off
  std::size_t max_decode_length = 100;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
};

// Throws std::invalid_argument naming the offending field.
void validate(const TrainConfig& config);

struct LossRecord {
  std::size_t iteration = 0;
  double nll = 0.0;
  double rl = 0.0;
  double combined = 0.0;
  double mean_reward = 0.0;
  std::size_t tokens = 0;

  bool operator==(const LossRecord&) const = default;
};

// "iteration<TAB>nll<TAB>rl<TAB>combined<TAB>mean_reward" with a header row.
std::string format_loss_curve(std::span<const LossRecord> curve);

struct TrainState {
  ModelParams params;
  AdagradState optimizer;
};

struct TrainResult {
  TrainState state;
  std::vector<LossRecord> curve;
  std::size_t iterations_run = 0;
  std::size_t floored_steps = 0;
  std::size_t reward_calls = 0;
  bool diverged = false;
  std::string message;
};

// Reward of a decoded token sequence for a particular training example.
using SequenceReward = std::function<double(const EncodedExample&, std::span<const TokenId>)>;

struct TrainHooks {
  std::function<void(std::size_t iteration, const TrainState&)> on_checkpoint;
  std::function<void(const LossRecord&)> on_record;
};

// Runs `pretrain_iterations` of teacher-forced NLL followed by
// `rl_iterations` at the configured alpha, one example per step, visiting
// examples in a seeded shuffled order per epoch. The reward is consulted
// only when alpha > 0; target summaries are not used when alpha == 1. On a
// non-finite loss or gradient, training stops and returns the last
// checkpointed state with `diverged` set.
TrainResult train(TrainState initial, std::span<const EncodedExample> corpus,
                  const TrainConfig& config, const SequenceReward& reward = {},
                  std::span<const TokenId> banned = {}, const TrainHooks& hooks = {});

// Mean teacher-forced per-token NLL over a set of examples (no coverage).
double mean_token_nll(const ModelParams& params, std::span<const EncodedExample> examples);

}  // namespace tailorsum
