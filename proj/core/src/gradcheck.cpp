#include "tailorsum/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "tailorsum/random.hpp"
#include "tailorsum/training.hpp"

namespace tailorsum {
namespace {

using LD = long double;
using LVec = std::vector<LD>;

struct Flat {
  LVec values;
  std::map<std::string, std::size_t, std::less<>> offsets;

  const LD* at(std::string_view name) const { return values.data() + offsets.find(name)->second; }
};

Flat flatten_wide(const ModelParams& params, std::size_t index, LD delta) {
  Flat f;
  params.for_each_block([&](std::string_view name, std::span<const double> block) {
    f.offsets.emplace(std::string(name), f.values.size());
    for (double v : block) f.values.push_back(static_cast<LD>(v));
  });
  if (index < f.values.size()) f.values[index] += delta;
  return f;
}

LD sig(LD x) { return 1.0L / (1.0L + std::exp(-x)); }

// y = W x for a row-major rows x cols block.
LVec mul(const LD* w, std::size_t rows, std::size_t cols, const LVec& x) {
  LVec y(rows, 0.0L);
  for (std::size_t r = 0; r < rows; ++r) {
    LD s = 0.0L;
    for (std::size_t c = 0; c < cols; ++c) s += w[r * cols + c] * x[c];
    y[r] = s;
  }
  return y;
}

LVec softmax_wide(const LVec& z) {
  const LD m = *std::max_element(z.begin(), z.end());
  LVec e(z.size());
  LD total = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) total += (e[i] = std::exp(z[i] - m));
  for (LD& v : e) v /= total;
  return e;
}

struct Cell {
  LVec h, c;
};

Cell lstm(const Flat& f, std::string_view prefix, std::size_t in_dim, std::size_t hid,
          const LVec& x, const Cell& prev) {
  const std::string p(prefix);
  const LVec a = mul(f.at(p + ".w_input"), 4 * hid, in_dim, x);
  const LVec b = mul(f.at(p + ".w_hidden"), 4 * hid, hid, prev.h);
  const LD* bias = f.at(p + ".bias");
  Cell next{LVec(hid), LVec(hid)};
  for (std::size_t k = 0; k < hid; ++k) {
    const LD i = sig(a[k] + b[k] + bias[k]);
    const LD fg = sig(a[hid + k] + b[hid + k] + bias[hid + k]);
    const LD g = std::tanh(a[2 * hid + k] + b[2 * hid + k] + bias[2 * hid + k]);
    const LD o = sig(a[3 * hid + k] + b[3 * hid + k] + bias[3 * hid + k]);
    next.c[k] = fg * prev.c[k] + i * g;
    next.h[k] = o * std::tanh(next.c[k]);
  }
  return next;
}

}  // namespace

long double reference_loss(const ModelParams& params, std::span<const TokenId> source,
                           std::span<const TokenId> targets, double coverage_weight,
                           std::size_t index, long double delta) {
  if (source.empty() || targets.empty()) throw std::invalid_argument("reference_loss: empty sequence");
  const ModelDims& d = params.dims;
  const Flat f = flatten_wide(params, index, delta);
  const std::size_t n = source.size();
  const std::size_t ext = std::max(d.vocab, *std::max_element(source.begin(), source.end()) + 1);

  const auto embed = [&](TokenId id) {
    const TokenId row = id < d.vocab ? id : kUnkId;
    const LD* e = f.at("embedding") + row * d.embed;
    return LVec(e, e + d.embed);
  };

  std::vector<LVec> enc;
  Cell state{LVec(d.hidden, 0.0L), LVec(d.hidden, 0.0L)};
  for (TokenId id : source) {
    state = lstm(f, "encoder", d.embed, d.hidden, embed(id), state);
    enc.push_back(state.h);
  }
  std::vector<LVec> enc_feat;
  for (const auto& h : enc) enc_feat.push_back(mul(f.at("attention.w_enc"), d.attention, d.hidden, h));

  LVec coverage(n, 0.0L);
  LD loss = 0.0L;
  TokenId prev = kStartId;
  for (TokenId target : targets) {
    const LVec x = embed(prev);
    state = lstm(f, "decoder", d.embed, d.hidden, x, state);
    const LVec dec_feat = mul(f.at("attention.w_dec"), d.attention, d.hidden, state.h);
    LVec scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      LD s = 0.0L;
      for (std::size_t k = 0; k < d.attention; ++k) {
        s += f.at("attention.v")[k] *
             std::tanh(enc_feat[i][k] + dec_feat[k] + f.at("attention.bias")[k] +
                       f.at("attention.w_cov")[k] * coverage[i]);
      }
      scores[i] = s;
    }
    const LVec att = softmax_wide(scores);
    LVec context(d.hidden, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d.hidden; ++k) context[k] += att[i] * enc[i][k];
    }
    LD z = *f.at("switch.bias");
    for (std::size_t k = 0; k < d.hidden; ++k) {
      z += f.at("switch.w_context")[k] * context[k] + f.at("switch.w_state")[k] * state.h[k];
    }
    for (std::size_t k = 0; k < d.embed; ++k) z += f.at("switch.w_input")[k] * x[k];
    const LD p_gen = sig(z);

    LVec joint(state.h);
    joint.insert(joint.end(), context.begin(), context.end());
    LVec logits = mul(f.at("output.weight"), d.vocab, 2 * d.hidden, joint);
    for (std::size_t w = 0; w < d.vocab; ++w) logits[w] += f.at("output.bias")[w];
    const LVec pv = softmax_wide(logits);

    if (target >= ext) throw std::invalid_argument("reference_loss: target outside extended vocabulary");
    LD p = target < d.vocab ? p_gen * pv[target] : 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      if (source[i] == target) p += (1.0L - p_gen) * att[i];
    }
    loss -= std::log(p < static_cast<LD>(kLogFloor) ? static_cast<LD>(kLogFloor) : p);
    for (std::size_t i = 0; i < n; ++i) {
      loss += static_cast<LD>(coverage_weight) * std::min(att[i], coverage[i]);
      coverage[i] += att[i];
    }
    prev = target;
  }
  return loss;
}

ModelGradCheck check_model_gradients(const ModelParams& params, std::span<const TokenId> source,
                                     std::span<const TokenId> targets, double coverage_weight,
                                     double epsilon, double tolerance) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  ModelGradCheck out;
  ModelParams grads = ModelParams::zeros(params.dims);
  out.loss = sequence_loss(params, source, targets, coverage_weight, 1.0, &grads).loss;
  out.analytic = grads.flatten();
  out.numeric.resize(out.analytic.size());
  const LD eps = static_cast<LD>(epsilon);
  for (std::size_t i = 0; i < out.numeric.size(); ++i) {
    const LD up = reference_loss(params, source, targets, coverage_weight, i, eps);
    const LD down = reference_loss(params, source, targets, coverage_weight, i, -eps);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("non-finite loss while probing coordinate " + std::to_string(i));
    }
    out.numeric[i] = static_cast<double>((up - down) / (2.0L * eps));
  }
  out.report = check_gradients(out.analytic, out.numeric, tolerance);
  return out;
}

ModelGradCheck run_gradcheck(const ModelDims& dims, std::uint64_t seed, double epsilon,
                             double tolerance) {
  if (dims.vocab <= kReservedCount) throw std::invalid_argument("gradcheck: vocab too small");
  Rng init = make_stream(seed, "init");
  const ModelParams params = ModelParams::initialize(dims, init);
  Rng pick = make_stream(seed, "gradcheck");
  const std::size_t words = dims.vocab - kReservedCount;
  const auto word = [&] {
    // Two extra ids beyond the vocabulary stand for copied OOV words.
    return kReservedCount + uniform_index(pick, words + 2);
  };
  std::vector<TokenId> source(8);
  for (auto& id : source) id = word();
  std::vector<TokenId> targets;
  for (std::size_t t = 0; t < 5; ++t) {
    targets.push_back(t % 2 == 0 ? source[uniform_index(pick, source.size())] : word());
  }
  // Targets beyond the source's extended vocabulary are not representable.
  const TokenId ext = std::max(dims.vocab, *std::max_element(source.begin(), source.end()) + 1);
  for (auto& id : targets) {
    if (id >= ext) id = kUnkId;
  }
  targets.push_back(kStopId);
  return check_model_gradients(params, source, targets, 1.0, epsilon, tolerance);
}

}  // namespace tailorsum
