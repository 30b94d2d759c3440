#include "tailorsum/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace tailorsum {
namespace {

struct Forward {
  EncoderStates enc;
  std::vector<DecoderStepOut> steps;
};

Forward run_teacher_forced(const ModelParams& params, std::span<const TokenId> source,
                           std::span<const TokenId> targets, std::span<const double> boost) {
  Forward fw{encode(params, source), {}};
  fw.steps.reserve(targets.size());
  LstmState state = fw.enc.final_state;
  Vec coverage(fw.enc.size(), 0.0);
  TokenId prev = kStartId;
  for (TokenId target : targets) {
    if (target >= fw.enc.extended_size) {
      throw std::invalid_argument("sequence_loss: target id " + std::to_string(target) +
                                  " outside the extended vocabulary");
    }
    fw.steps.push_back(decoder_step(params, fw.enc, state, prev, boost, coverage));
    state = fw.steps.back().state;
    coverage = fw.steps.back().coverage;
    prev = target;
  }
  return fw;
}

void backward(const ModelParams& params, const Forward& fw, std::span<const TokenId> targets,
              double coverage_weight, double scale, std::span<const double> boost,
              ModelParams& grads) {
  const std::size_t n = fw.enc.size();
  const std::size_t h = params.dims.hidden;
  const std::size_t a_dim = params.dims.attention;
  const std::size_t v_size = params.dims.vocab;
  const std::size_t e_dim = params.dims.embed;

  std::vector<Vec> d_enc_states(n, Vec(h, 0.0));
  std::vector<Vec> d_enc_features(n, Vec(a_dim, 0.0));
  Vec d_hidden_next(h, 0.0);
  Vec d_cell_next(h, 0.0);
  Vec d_cov_next(n, 0.0);

  Vec d_att(n);
  Vec d_cov_in(n);
  Vec d_scores(n);
  Vec d_ctx(h);
  Vec d_dec_feature(a_dim);
  Vec d_q(a_dim);
  Vec d_joint(2 * h);
  Vec joint(2 * h);
  Vec d_input(e_dim);
  Vec d_prev_hidden(h);
  Vec d_prev_cell(h);

  for (std::size_t t = fw.steps.size(); t-- > 0;) {
    const DecoderStepOut& st = fw.steps[t];
    const Vec& att = st.attn.attention;
    const Vec& cov = st.prev_coverage;
    const Vec& s = st.state.hidden;
    const Vec& ctx = st.attn.context;
    const TokenId w = targets[t];

    Vec d_hidden = d_hidden_next;
    const Vec& d_cell = d_cell_next;
    d_att = d_cov_next;
    d_cov_in = d_cov_next;
    std::fill(d_ctx.begin(), d_ctx.end(), 0.0);
    std::fill(d_input.begin(), d_input.end(), 0.0);
    double d_pgen = 0.0;

    const double p = st.final_dist[w];
    if (p >= kLogFloor) {
      const double g = -scale / p;
      double copy_mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (fw.enc.source_ids[i] == w) {
          copy_mass += att[i];
          d_att[i] += g * (1.0 - st.p_gen);
        }
      }
      const double pv_w = w < v_size ? st.p_vocab[w] : 0.0;
      d_pgen += g * (pv_w - copy_mass);
      if (w < v_size) {
        // dz_j = Pv_j (delta_jw - Pv_w) * g * p_gen
        const double gv = g * st.p_gen;
        std::copy(s.begin(), s.end(), joint.begin());
        std::copy(ctx.begin(), ctx.end(), joint.begin() + static_cast<std::ptrdiff_t>(h));
        Vec dz(v_size);
        for (std::size_t j = 0; j < v_size; ++j) {
          dz[j] = st.p_vocab[j] * ((j == w ? gv : 0.0) - pv_w * gv);
        }
        axpy(1.0, dz, grads.output_bias);
        add_outer(grads.output_proj, dz, joint);
        std::fill(d_joint.begin(), d_joint.end(), 0.0);
        matvec_transposed_add(params.output_proj, dz, d_joint);
        for (std::size_t k = 0; k < h; ++k) {
          d_hidden[k] += d_joint[k];
          d_ctx[k] += d_joint[h + k];
        }
      }
    }

    if (coverage_weight != 0.0) {
      const double c = scale * coverage_weight;
      for (std::size_t i = 0; i < n; ++i) {
        if (att[i] <= cov[i]) {
          d_att[i] += c;
        } else {
          d_cov_in[i] += c;
        }
      }
    }

    // p_gen = sigmoid(w_context . ctx + w_state . s + w_input . y + b)
    const auto y = embedding_of(params, st.input_token);
    const double du = d_pgen * st.p_gen * (1.0 - st.p_gen);
    if (du != 0.0) {
      axpy(du, ctx, grads.gen_switch.w_context);
      axpy(du, s, grads.gen_switch.w_state);
      axpy(du, y, grads.gen_switch.w_input);
      grads.gen_switch.bias += du;
      axpy(du, params.gen_switch.w_context, d_ctx);
      axpy(du, params.gen_switch.w_state, d_hidden);
      axpy(du, params.gen_switch.w_input, d_input);
    }

    // h*_t = sum_i a_i h_i
    for (std::size_t i = 0; i < n; ++i) {
      d_att[i] += dot(d_ctx, fw.enc.states[i]);
      axpy(att[i], d_ctx, d_enc_states[i]);
    }

    std::fill(d_scores.begin(), d_scores.end(), 0.0);
    softmax_backward(att, d_att, d_scores);

    std::fill(d_dec_feature.begin(), d_dec_feature.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double de = d_scores[i] * (boost.empty() ? 1.0 : boost[i]);
      if (de == 0.0) continue;
      const auto act = st.attn.activations.row(i);
      axpy(de, act, grads.attention.v);
      for (std::size_t k = 0; k < a_dim; ++k) {
        d_q[k] = de * params.attention.v[k] * (1.0 - act[k] * act[k]);
      }
      axpy(1.0, d_q, d_enc_features[i]);
      axpy(1.0, d_q, d_dec_feature);
      axpy(cov[i], d_q, grads.attention.w_cov);
      d_cov_in[i] += dot(params.attention.w_cov, d_q);
    }
    add_outer(grads.attention.w_dec, d_dec_feature, s);
    axpy(1.0, d_dec_feature, grads.attention.bias);
    matvec_transposed_add(params.attention.w_dec, d_dec_feature, d_hidden);

    std::fill(d_prev_hidden.begin(), d_prev_hidden.end(), 0.0);
    std::fill(d_prev_cell.begin(), d_prev_cell.end(), 0.0);
    recurrent_step_backward(params.decoder, st.lstm, d_hidden, d_cell, grads.decoder, d_input,
                            d_prev_hidden, d_prev_cell);
    const TokenId emb_row = st.input_token < v_size ? st.input_token : kUnkId;
    axpy(1.0, d_input, grads.embedding.row(emb_row));

    d_hidden_next = d_prev_hidden;
    d_cell_next = d_prev_cell;
    d_cov_next = d_cov_in;
  }

  // Encoder: the decoder started from the final encoder state.
  for (std::size_t i = 0; i < n; ++i) {
    add_outer(grads.attention.w_enc, d_enc_features[i], fw.enc.states[i]);
    matvec_transposed_add(params.attention.w_enc, d_enc_features[i], d_enc_states[i]);
  }
  Vec carry_hidden = std::move(d_hidden_next);
  Vec carry_cell = std::move(d_cell_next);
  for (std::size_t i = n; i-- > 0;) {
    axpy(1.0, d_enc_states[i], carry_hidden);
    std::fill(d_input.begin(), d_input.end(), 0.0);
    std::fill(d_prev_hidden.begin(), d_prev_hidden.end(), 0.0);
    std::fill(d_prev_cell.begin(), d_prev_cell.end(), 0.0);
    recurrent_step_backward(params.encoder, fw.enc.caches[i], carry_hidden, carry_cell,
                            grads.encoder, d_input, d_prev_hidden, d_prev_cell);
    const TokenId src = fw.enc.source_ids[i];
    axpy(1.0, d_input, grads.embedding.row(src < v_size ? src : kUnkId));
    carry_hidden = d_prev_hidden;
    carry_cell = d_prev_cell;
  }
}

void zero(ModelParams& p) {
  p.for_each_block([](std::string_view, std::span<double> b) { std::fill(b.begin(), b.end(), 0.0); });
}

std::vector<std::span<double>> blocks_of(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each_block([&out](std::string_view, std::span<double> b) { out.push_back(b); });
  return out;
}

std::vector<std::pair<std::string_view, std::span<const double>>> blocks_of(const ModelParams& p) {
  std::vector<std::pair<std::string_view, std::span<const double>>> out;
  p.for_each_block(
      [&out](std::string_view name, std::span<const double> b) { out.emplace_back(name, b); });
  return out;
}

}  // namespace

LossResult sequence_loss(const ModelParams& params, std::span<const TokenId> source,
                         std::span<const TokenId> targets, double coverage_weight, double scale,
                         ModelParams* grads, std::span<const double> boost) {
  if (targets.empty()) throw std::invalid_argument("sequence_loss: empty target");
  const Forward fw = run_teacher_forced(params, source, targets, boost);
  LossResult result;
  result.tokens = targets.size();
  result.step_losses.reserve(fw.steps.size());
  for (std::size_t t = 0; t < fw.steps.size(); ++t) {
    const double p = fw.steps[t].final_dist[targets[t]];
    double nll = 0.0;
    if (p < kLogFloor) {
      ++result.floored;
      nll = -std::log(kLogFloor);
    } else {
      nll = -std::log(p);
    }
    const Vec& att = fw.steps[t].attn.attention;
    const Vec& cov = fw.steps[t].prev_coverage;
    double overlap = 0.0;
    for (std::size_t i = 0; i < att.size(); ++i) overlap += std::min(att[i], cov[i]);
    result.nll += nll;
    result.coverage += overlap;
    result.step_losses.push_back(nll + coverage_weight * overlap);
  }
  result.loss = result.nll + coverage_weight * result.coverage;
  if (grads != nullptr && scale != 0.0) {
    backward(params, fw, targets, coverage_weight, scale, boost, *grads);
  }
  return result;
}

LossResult nll_loss(const ModelParams& params, const EncodedExample& example,
                    double coverage_weight, ModelParams* grads) {
  return sequence_loss(params, example.source, example.target, coverage_weight, 1.0, grads,
                       example.boost);
}

double Rollout::log_prob_sum() const {
  double total = 0.0;
  for (double lp : step_log_probs) total += lp;
  return total;
}

Rollout rollout(const NextDistribution& next, std::size_t max_length, Rng* sampler,
                std::span<const TokenId> banned) {
  Rollout out;
  out.mode = sampler != nullptr ? Rollout::Mode::sampled : Rollout::Mode::greedy;
  while (out.tokens.size() < max_length) {
    Vec dist = next(out.tokens);
    Vec masked = dist;
    for (TokenId b : banned) {
      if (b < masked.size()) masked[b] = 0.0;
    }
    TokenId choice = 0;
    if (sampler != nullptr) {
      double total = 0.0;
      for (double p : masked) total += p;
      double draw = uniform01(*sampler) * total;
      choice = masked.size() - 1;
      for (std::size_t i = 0; i < masked.size(); ++i) {
        if (masked[i] <= 0.0) continue;
        if (draw < masked[i]) {
          choice = i;
          break;
        }
        draw -= masked[i];
      }
      while (masked[choice] <= 0.0 && choice > 0) --choice;
    } else {
      choice = static_cast<TokenId>(std::max_element(masked.begin(), masked.end()) - masked.begin());
    }
    out.tokens.push_back(choice);
    out.step_log_probs.push_back(std::log(std::max(dist[choice], kLogFloor)));
    if (choice == kStopId) break;
  }
  return out;
}

std::vector<TokenId> banned_ids(std::size_t vocab_size, std::span<const TokenId> control_ids) {
  std::vector<TokenId> out = {kPadId, kStartId};
  for (TokenId id : control_ids) {
    if (id < vocab_size) out.push_back(id);
  }
  return out;
}

std::vector<TokenId> banned_ids(const Vocabulary& vocab) {
  return banned_ids(vocab.size(), vocab.control_ids());
}

std::pair<Rollout, Rollout> scst_rollout(const ModelParams& params,
                                         std::span<const TokenId> source, Rng& sampler,
                                         std::size_t max_length, std::span<const TokenId> banned) {
  const EncoderStates enc = encode(params, source);
  auto make_next = [&params, &enc]() {
    struct Session {
      LstmState state;
      Vec coverage;
    };
    auto session = std::make_shared<Session>(Session{enc.final_state, Vec(enc.size(), 0.0)});
    return [&params, &enc, session](std::span<const TokenId> prefix) {
      const TokenId prev = prefix.empty() ? kStartId : prefix.back();
      DecoderStepOut out = decoder_step(params, enc, session->state, prev, {}, session->coverage);
      session->state = std::move(out.state);
      session->coverage = std::move(out.coverage);
      return std::move(out.final_dist);
    };
  };
  Rollout sampled = rollout(make_next(), max_length, &sampler, banned);
  Rollout greedy = rollout(make_next(), max_length, nullptr, banned);
  return {std::move(sampled), std::move(greedy)};
}

RlLossResult rl_loss(const RolloutReward& reward, const Rollout& sampled, const Rollout& greedy,
                     std::string_view article_id) {
  RlLossResult r;
  try {
    r.reward_sampled = reward(sampled);
    r.reward_greedy = reward(greedy);
  } catch (const std::exception& e) {
    throw std::runtime_error("reward failed for article " + std::string(article_id) + ": " +
                             e.what());
  }
  r.grad_scale = r.reward_greedy - r.reward_sampled;
  r.loss = r.grad_scale * sampled.log_prob_sum();
  return r;
}

double combined_loss(double nll, double rl, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1]");
  }
  return (1.0 - alpha) * nll + alpha * rl;
}

AdagradState AdagradState::create(const ModelParams& params, double learning_rate,
                                  double initial_accumulator) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(initial_accumulator > 0.0)) throw std::invalid_argument("initial_accumulator must be > 0");
  AdagradState s;
  s.accumulators.assign(params.parameter_count(), initial_accumulator);
  s.learning_rate = learning_rate;
  s.initial_accumulator = initial_accumulator;
  return s;
}

StepStatus adagrad_step(ModelParams& params, const ModelParams& grads, AdagradState& state) {
  if (params.dims != grads.dims || state.accumulators.size() != params.parameter_count()) {
    throw std::invalid_argument("adagrad_step: shape mismatch");
  }
  const auto grad_blocks = blocks_of(grads);
  std::size_t offset = 0;
  for (const auto& [name, block] : grad_blocks) {
    for (std::size_t i = 0; i < block.size(); ++i) {
      if (!std::isfinite(block[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient in " << name << "[" << i << "] (flat index " << offset + i
            << ")";
        return {false, msg.str()};
      }
    }
    offset += block.size();
  }
  const auto param_blocks = blocks_of(params);
  offset = 0;
  for (std::size_t b = 0; b < param_blocks.size(); ++b) {
    const auto g = grad_blocks[b].second;
    auto theta = param_blocks[b];
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i] == 0.0) continue;
      double& acc = state.accumulators[offset + i];
      acc += g[i] * g[i];
      theta[i] -= state.learning_rate * g[i] / std::sqrt(acc);
    }
    offset += g.size();
  }
  return {};
}

void validate(const TrainConfig& config) {
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw std::invalid_argument("alpha: must lie in [0, 1]");
  }
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning_rate: must be > 0");
  if (!(config.initial_accumulator > 0.0)) {
    throw std::invalid_argument("initial_accumulator: must be > 0");
  }
  if (!(config.coverage_weight >= 0.0)) throw std::invalid_argument("coverage_weight: must be >= 0");
  if (config.max_decode_length == 0) throw std::invalid_argument("max_decode_length: must be >= 1");
}

std::string format_loss_curve(std::span<const LossRecord> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration\tnll\trl\tcombined\tmean_reward\n";
  for (const auto& r : curve) {
    out << r.iteration << '\t' << r.nll << '\t' << r.rl << '\t' << r.combined << '\t'
        << r.mean_reward << '\n';
  }
  return out.str();
}

TrainResult train(TrainState initial, std::span<const EncodedExample> corpus,
                  const TrainConfig& config, const SequenceReward& reward,
                  std::span<const TokenId> banned, const TrainHooks& hooks) {
  validate(config);
  const std::size_t total = config.pretrain_iterations + config.rl_iterations;
  if (total > 0 && corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (config.rl_iterations > 0 && config.alpha > 0.0 && !reward) {
    throw std::invalid_argument("train: an SCST phase needs a reward function");
  }
  if (initial.optimizer.accumulators.size() != initial.params.parameter_count()) {
    initial.optimizer = AdagradState::create(initial.params, config.learning_rate,
                                             config.initial_accumulator);
  }

  TrainResult result;
  result.state = std::move(initial);
  TrainState last_good = result.state;
  ModelParams grads = ModelParams::zeros(result.state.params.dims);

  Rng order_rng = make_stream(config.seed, "order");
  Rng sampling_rng = make_stream(config.seed, "sampling");
  std::vector<std::size_t> order(corpus.size());
  std::size_t cursor = order.size();

  for (std::size_t it = 1; it <= total; ++it) {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    const EncodedExample& ex = corpus[order[cursor++]];
    const double alpha = it <= config.pretrain_iterations ? 0.0 : config.alpha;
    ModelParams& params = result.state.params;
    zero(grads);

    LossRecord rec;
    rec.iteration = it;
    double nll_term = 0.0;
    if (alpha < 1.0) {
      const LossResult lr =
          sequence_loss(params, ex.source, ex.target, config.coverage_weight, 1.0 - alpha, &grads,
                        ex.boost);
      rec.nll = lr.nll;
      rec.tokens = lr.tokens;
      nll_term = lr.loss;
      result.floored_steps += lr.floored;
    }
    if (alpha > 0.0) {
      auto [sampled, greedy] =
          scst_rollout(params, ex.source, sampling_rng, config.max_decode_length, banned);
      const RolloutReward bound = [&](const Rollout& r) {
        ++result.reward_calls;
        return reward(ex, r.tokens);
      };
      const RlLossResult rl = rl_loss(bound, sampled, greedy, std::to_string(order[cursor - 1]));
      rec.rl = rl.loss;
      rec.mean_reward = rl.reward_sampled;
      if (rl.grad_scale != 0.0) {
        sequence_loss(params, ex.source, sampled.tokens, 0.0, -alpha * rl.grad_scale, &grads);
      }
    }
    rec.combined = combined_loss(nll_term, rec.rl, alpha);

    StepStatus status;
    if (!std::isfinite(rec.combined)) {
      status = {false, "non-finite loss at iteration " + std::to_string(it)};
    } else {
      status = adagrad_step(params, grads, result.state.optimizer);
    }
    if (!status.applied) {
      result.diverged = true;
      result.message = status.diagnostic;
      result.state = std::move(last_good);
      return result;
    }

    result.curve.push_back(rec);
    result.iterations_run = it;
    if (hooks.on_record) hooks.on_record(rec);
    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
      last_good = result.state;
      if (hooks.on_checkpoint) hooks.on_checkpoint(it, result.state);
    }
  }
  return result;
}

double mean_token_nll(const ModelParams& params, std::span<const EncodedExample> examples) {
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    const LossResult r = sequence_loss(params, ex.source, ex.target, 0.0, 0.0, nullptr, ex.boost);
    nll += r.nll;
    tokens += r.tokens;
  }
  return tokens == 0 ? 0.0 : nll / static_cast<double>(tokens);
}

}  // namespace tailorsum
