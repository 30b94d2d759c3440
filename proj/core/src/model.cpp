#include "tailorsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tailorsum {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& dims) {
  require(dims.vocab > kReservedCount && dims.embed > 0 && dims.hidden > 0 && dims.attention > 0,
          "model dims must be positive and vocab must exceed the reserved tokens");
  ModelParams p;
  p.dims = dims;
  p.embedding = Tensor2(dims.vocab, dims.embed);
  p.encoder = LstmParams::zeros(dims.embed, dims.hidden);
  p.decoder = LstmParams::zeros(dims.embed, dims.hidden);
  p.attention.v.assign(dims.attention, 0.0);
  p.attention.w_enc = Tensor2(dims.attention, dims.hidden);
  p.attention.w_dec = Tensor2(dims.attention, dims.hidden);
  p.attention.bias.assign(dims.attention, 0.0);
  p.attention.w_cov.assign(dims.attention, 0.0);
  p.gen_switch.w_context.assign(dims.hidden, 0.0);
  p.gen_switch.w_state.assign(dims.hidden, 0.0);
  p.gen_switch.w_input.assign(dims.embed, 0.0);
  p.output_proj = Tensor2(dims.vocab, 2 * dims.hidden);
  p.output_bias.assign(dims.vocab, 0.0);
  return p;
}

ModelParams ModelParams::initialize(const ModelDims& dims, Rng& rng) {
  ModelParams p = zeros(dims);
  p.for_each_block([&rng](std::string_view, std::span<double> block) {
    for (double& x : block) x = uniform(rng, -0.1, 0.1);
  });
  for (LstmParams* cell : {&p.encoder, &p.decoder}) {
    const std::size_t h = cell->hidden_size();
    std::fill(cell->bias.begin() + static_cast<std::ptrdiff_t>(h),
              cell->bias.begin() + static_cast<std::ptrdiff_t>(2 * h), 1.0);
  }
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&n](std::string_view, std::span<const double> block) { n += block.size(); });
  return n;
}

Vec ModelParams::flatten() const {
  Vec flat;
  flat.reserve(parameter_count());
  for_each_block([&flat](std::string_view, std::span<const double> block) {
    flat.insert(flat.end(), block.begin(), block.end());
  });
  return flat;
}

void ModelParams::assign_flat(std::span<const double> flat) {
  require(flat.size() == parameter_count(), "assign_flat: expected " +
                                                std::to_string(parameter_count()) + " values, got " +
                                                std::to_string(flat.size()));
  std::size_t offset = 0;
  for_each_block([&](std::string_view, std::span<double> block) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), block.size(), block.begin());
    offset += block.size();
  });
}

void ModelParams::validate() const {
  const ModelParams reference = zeros(dims);
  std::vector<std::size_t> expected;
  reference.for_each_block(
      [&expected](std::string_view, std::span<const double> b) { expected.push_back(b.size()); });
  std::size_t i = 0;
  for_each_block([&](std::string_view name, std::span<const double> block) {
    require(block.size() == expected[i++], "parameter block " + std::string(name) +
                                               " does not match the dimension table");
    for (double x : block) require(std::isfinite(x), "parameter block " + std::string(name) +
                                                         " holds a non-finite value");
  });
  require(embedding.rows == dims.vocab && embedding.cols == dims.embed, "embedding shape");
  require(output_proj.rows == dims.vocab && output_proj.cols == 2 * dims.hidden,
          "output.weight shape");
  require(attention.w_enc.rows == dims.attention && attention.w_enc.cols == dims.hidden,
          "attention.w_enc shape");
  require(attention.w_dec.rows == dims.attention && attention.w_dec.cols == dims.hidden,
          "attention.w_dec shape");
}

std::span<const double> embedding_of(const ModelParams& params, TokenId id) {
  return params.embedding.row(id < params.dims.vocab ? id : kUnkId);
}

EncoderStates encode(const ModelParams& params, std::span<const TokenId> source_ids) {
  if (source_ids.empty()) throw std::invalid_argument("encode: empty source");
  const std::size_t h = params.dims.hidden;
  EncoderStates enc;
  enc.source_ids.assign(source_ids.begin(), source_ids.end());
  enc.extended_size =
      std::max(params.dims.vocab, *std::max_element(source_ids.begin(), source_ids.end()) + 1);
  enc.states.reserve(source_ids.size());
  enc.features.reserve(source_ids.size());
  enc.caches.resize(source_ids.size());

  LstmState state = LstmState::zeros(h);
  for (std::size_t i = 0; i < source_ids.size(); ++i) {
    state = recurrent_step(params.encoder, embedding_of(params, source_ids[i]), state.hidden,
                           state.cell, &enc.caches[i]);
    Vec feature(params.dims.attention, 0.0);
    matvec_add(params.attention.w_enc, state.hidden, feature);
    enc.states.push_back(state.hidden);
    enc.features.push_back(std::move(feature));
  }
  enc.final_state = std::move(state);
  return enc;
}

AttentionOut attend(const ModelParams& params, const EncoderStates& enc,
                    std::span<const double> decoder_hidden, std::span<const double> boost,
                    std::span<const double> coverage) {
  const std::size_t n = enc.size();
  const std::size_t a_dim = params.dims.attention;
  require(decoder_hidden.size() == params.dims.hidden,
          "attend: decoder state has size " + std::to_string(decoder_hidden.size()));
  require(boost.empty() || boost.size() == n,
          "attend: boost length " + std::to_string(boost.size()) + " != source length " +
              std::to_string(n));
  require(coverage.empty() || coverage.size() == n,
          "attend: coverage length " + std::to_string(coverage.size()) + " != source length " +
              std::to_string(n));

  Vec dec_feature = params.attention.bias;
  matvec_add(params.attention.w_dec, decoder_hidden, dec_feature);

  AttentionOut out;
  out.activations = Tensor2(n, a_dim);
  out.raw_scores.resize(n);
  out.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cov = coverage.empty() ? 0.0 : coverage[i];
    auto act = out.activations.row(i);
    const Vec& feat = enc.features[i];
    double score = 0.0;
    for (std::size_t k = 0; k < a_dim; ++k) {
      act[k] = std::tanh(feat[k] + dec_feature[k] + params.attention.w_cov[k] * cov);
      score += params.attention.v[k] * act[k];
    }
    out.raw_scores[i] = score;
    out.scores[i] = boost.empty() ? score : boost[i] * score;
  }
  out.attention = softmax(out.scores);
  out.context.assign(params.dims.hidden, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(out.attention[i], enc.states[i], out.context);
  return out;
}

double generation_switch(const ModelParams& params, std::span<const double> context,
                         std::span<const double> decoder_hidden,
                         std::span<const double> input_embedding) {
  const SwitchParams& s = params.gen_switch;
  return sigmoid(dot(s.w_context, context) + dot(s.w_state, decoder_hidden) +
                 dot(s.w_input, input_embedding) + s.bias);
}

Vec vocab_distribution(const ModelParams& params, std::span<const double> decoder_hidden,
                       std::span<const double> context) {
  const std::size_t h = params.dims.hidden;
  require(decoder_hidden.size() == h && context.size() == h, "vocab_distribution: shape mismatch");
  Vec joint(2 * h);
  std::copy(decoder_hidden.begin(), decoder_hidden.end(), joint.begin());
  std::copy(context.begin(), context.end(), joint.begin() + static_cast<std::ptrdiff_t>(h));
  Vec logits = params.output_bias;
  matvec_add(params.output_proj, joint, logits);
  return softmax(logits);
}

Vec final_distribution(double p_gen, std::span<const double> p_vocab,
                       std::span<const double> attention, std::span<const TokenId> source_ids,
                       std::size_t extended_size) {
  require(attention.size() == source_ids.size(), "final_distribution: attention/source mismatch");
  require(p_vocab.size() <= extended_size,
          "final_distribution: extended_size smaller than the base vocabulary");
  for (TokenId id : source_ids) {
    require(id < extended_size, "final_distribution: source id " + std::to_string(id) +
                                    " exceeds extended size " + std::to_string(extended_size));
  }
  Vec dist(extended_size, 0.0);
  for (std::size_t w = 0; w < p_vocab.size(); ++w) dist[w] = p_gen * p_vocab[w];
  const double copy = 1.0 - p_gen;
  for (std::size_t i = 0; i < source_ids.size(); ++i) dist[source_ids[i]] += copy * attention[i];
  return dist;
}

DecoderStepOut decoder_step(const ModelParams& params, const EncoderStates& enc,
                            const LstmState& prev_state, TokenId prev_token,
                            std::span<const double> boost, std::span<const double> coverage) {
  require(prev_token < enc.extended_size,
          "decoder_step: previous token " + std::to_string(prev_token) + " out of range");
  DecoderStepOut out;
  out.input_token = prev_token;
  const auto input = embedding_of(params, prev_token);
  out.state = recurrent_step(params.decoder, input, prev_state.hidden, prev_state.cell, &out.lstm);
  out.attn = attend(params, enc, out.state.hidden, boost, coverage);
  out.p_gen = generation_switch(params, out.attn.context, out.state.hidden, input);
  out.p_vocab = vocab_distribution(params, out.state.hidden, out.attn.context);
  out.final_dist = final_distribution(out.p_gen, out.p_vocab, out.attn.attention, enc.source_ids,
                                      enc.extended_size);
  if (coverage.empty()) {
    out.prev_coverage.assign(enc.size(), 0.0);
  } else {
    out.prev_coverage.assign(coverage.begin(), coverage.end());
  }
  out.coverage = out.prev_coverage;
  axpy(1.0, out.attn.attention, out.coverage);
  return out;
}

}  // namespace tailorsum
