#pragma once

// Finite-difference checking of the full teacher-forced loss. Probes go
// through a separate long double evaluation of the loss, not the production
// forward pass.

#include <cstdint>
#include <span>
#include <string>

#include "tailorsum/model.hpp"
#include "tailorsum/numerics.hpp"

namespace tailorsum {

// nll + coverage_weight * coverage, computed independently of sequence_loss,
// with the parameter at flat index `index` shifted by `delta` (no shift when
// index is out of range).
long double reference_loss(const ModelParams& params, std::span<const TokenId> source,
                           std::span<const TokenId> targets, double coverage_weight,
                           std::size_t index = static_cast<std::size_t>(-1),
                           long double delta = 0.0L);

struct ModelGradCheck {
  GradCheckReport report;
  Vec analytic;
  Vec numeric;
  double loss = 0.0;
};

// Central differences of reference_loss against sequence_loss gradients.
ModelGradCheck check_model_gradients(const ModelParams& params, std::span<const TokenId> source,
                                     std::span<const TokenId> targets, double coverage_weight,
                                     double epsilon = 1e-5, double tolerance = 1e-4);

// The standard self-check: random model of the given dims, a fixed-length
// random source containing out-of-vocabulary ids, and a target mixing copied
// and generated tokens, all drawn from `seed`.
ModelGradCheck run_gradcheck(const ModelDims& dims, std::uint64_t seed, double epsilon = 1e-5,
                             double tolerance = 1e-4);

}  // namespace tailorsum
