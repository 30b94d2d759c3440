#pragma once

// Pointer-generator forward pass.
//
// Dimension table (V = vocab, E = embed, H = hidden, A = attention):
//
//   embedding            V x E
//   encoder / decoder    LSTM, input E, hidden H
//   attention.v          A
//   attention.w_enc      A x H     (W_h, applied to encoder states)
//   attention.w_dec      A x H     (W_s, applied to the decoder state)
//   attention.bias       A         (b_att)
//   attention.w_cov      A         (coverage weight)
//   switch.w_context     H         (w_h)
//   switch.w_state       H         (w_s)
//   switch.w_input       E         (w_y)
//   switch.bias          1         (b_gen)
//   output.weight        V x 2H    (applied to [s_t ; h*_t])
//   output.bias          V
//
// The flat parameter layout used by gradient checking and the optimizer is
// the concatenation of these blocks in exactly the order above, each
// row-major; LSTM blocks expand to w_input, w_hidden, bias.
//
// Attention score for source position i at decoder step t:
//
//   e_i = beta_i * v . tanh(w_enc h_i + w_dec s_t + w_cov * cov_i + bias)
//
// beta multiplies the signed score, so boosting a position whose raw score
// is negative lowers its attention. That is deliberate; see README.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "tailorsum/numerics.hpp"
#include "tailorsum/random.hpp"
#include "tailorsum/vocabulary.hpp"

namespace tailorsum {

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t embed = 0;
  std::size_t hidden = 0;
  std::size_t attention = 0;

  bool operator==(const ModelDims&) const = default;
};

struct AttentionParams {
  Vec v;
  Tensor2 w_enc;
  Tensor2 w_dec;
  Vec bias;
  Vec w_cov;

  bool operator==(const AttentionParams&) const = default;
};

struct SwitchParams {
  Vec w_context;
  Vec w_state;
  Vec w_input;
  double bias = 0.0;

  bool operator==(const SwitchParams&) const = default;
};

struct ModelParams {
  ModelDims dims;
  Tensor2 embedding;
  LstmParams encoder;
  LstmParams decoder;
  AttentionParams attention;
  SwitchParams gen_switch;
  Tensor2 output_proj;
  Vec output_bias;

  static ModelParams zeros(const ModelDims& dims);
  // Uniform [-0.1, 0.1] everywhere, then forget-gate biases set to 1.
  static ModelParams initialize(const ModelDims& dims, Rng& rng);

  // Visits every parameter block in flat-layout order as (name, values).
  template <class F>
  void for_each_block(F&& f) {
    visit_blocks(*this, f);
  }
  template <class F>
  void for_each_block(F&& f) const {
    visit_blocks(*this, f);
  }

  std::size_t parameter_count() const;
  Vec flatten() const;
  void assign_flat(std::span<const double> flat);
  // Throws std::invalid_argument on inconsistent shapes or non-finite values.
  void validate() const;

  bool operator==(const ModelParams&) const = default;

 private:
  template <class Self, class F>
  static void visit_blocks(Self& p, F& f) {
    f("embedding", std::span(p.embedding.values));
    f("encoder.w_input", std::span(p.encoder.w_input.values));
    f("encoder.w_hidden", std::span(p.encoder.w_hidden.values));
    f("encoder.bias", std::span(p.encoder.bias));
    f("decoder.w_input", std::span(p.decoder.w_input.values));
    f("decoder.w_hidden", std::span(p.decoder.w_hidden.values));
    f("decoder.bias", std::span(p.decoder.bias));
    f("attention.v", std::span(p.attention.v));
    f("attention.w_enc", std::span(p.attention.w_enc.values));
    f("attention.w_dec", std::span(p.attention.w_dec.values));
    f("attention.bias", std::span(p.attention.bias));
    f("attention.w_cov", std::span(p.attention.w_cov));
    f("switch.w_context", std::span(p.gen_switch.w_context));
    f("switch.w_state", std::span(p.gen_switch.w_state));
    f("switch.w_input", std::span(p.gen_switch.w_input));
    f("switch.bias", std::span(&p.gen_switch.bias, 1));
    f("output.weight", std::span(p.output_proj.values));
    f("output.bias", std::span(p.output_bias));
  }
};

struct EncoderStates {
  std::vector<Vec> states;  // h_1 .. h_n
  std::vector<TokenId> source_ids;
  std::size_t extended_size = 0;
  LstmState final_state;
  std::vector<Vec> features;  // w_enc h_i, reused at every decoder step
  std::vector<LstmCache> caches;

  std::size_t size() const { return states.size(); }
};

// Ids >= vocab are out-of-vocabulary copies: they are embedded as UNK but
// kept as-is for copying. extended_size = max(vocab, max id + 1).
EncoderStates encode(const ModelParams& params, std::span<const TokenId> source_ids);

struct AttentionOut {
  Vec attention;    // a^t
  Vec context;      // h*_t
  Vec raw_scores;   // v . tanh(...), before boosting
  Vec scores;       // beta_i * raw_scores_i
  Tensor2 activations;  // n x A tanh values
};

// `boost` and `coverage` may be empty, meaning all-ones and all-zeros.
AttentionOut attend(const ModelParams& params, const EncoderStates& enc,
                    std::span<const double> decoder_hidden, std::span<const double> boost,
                    std::span<const double> coverage);

double generation_switch(const ModelParams& params, std::span<const double> context,
                         std::span<const double> decoder_hidden,
                         std::span<const double> input_embedding);

// softmax(output.weight [s_t ; h*_t] + output.bias) over the base vocabulary.
Vec vocab_distribution(const ModelParams& params, std::span<const double> decoder_hidden,
                       std::span<const double> context);

// p(w) = p_gen P_vocab(w) + (1 - p_gen) sum_{i: src_i = w} a_i over the
// extended vocabulary of size `extended_size`.
Vec final_distribution(double p_gen, std::span<const double> p_vocab,
                       std::span<const double> attention, std::span<const TokenId> source_ids,
                       std::size_t extended_size);

// Embedding row for a token; out-of-vocabulary ids use UNK.
std::span<const double> embedding_of(const ModelParams& params, TokenId id);

struct DecoderStepOut {
  AttentionOut attn;
  double p_gen = 0.0;
  Vec p_vocab;
  Vec final_dist;
  LstmState state;
  Vec coverage;  // coverage before the step plus a^t

  // Kept for the backward pass.
  TokenId input_token = 0;
  LstmCache lstm;
  Vec prev_coverage;
};

DecoderStepOut decoder_step(const ModelParams& params, const EncoderStates& enc,
                            const LstmState& prev_state, TokenId prev_token,
                            std::span<const double> boost, std::span<const double> coverage);

}  // namespace tailorsum
